"""Pure-Python stabilizer kernel with exact global phase.

A state is held in the canonical form ``omega * U_C * U_H |s>`` where U_C is
a Clifford layer tracked by binary matrices (G, F, M) and a mod-4 phase
vector gamma, U_H is a layer of Hadamards selected by the bit vector v, |s>
is a computational basis string and omega is a free complex scalar.

The compiled kernel in ``_chcore.pyx`` implements the same API; this module
is the fallback selected when the extension is unavailable.  Both kernels
must consume random numbers identically (one uniform per genuinely random
measurement branch) so that seeded runs agree bit-for-bit across backends.
"""

from __future__ import annotations

import numpy as np

from ..pauli import (
    GATE_CX,
    GATE_CZ,
    GATE_H,
    GATE_S,
    GATE_SDG,
    GATE_SWAP,
    GATE_X,
    GATE_Y,
    GATE_Z,
)

_SQRT2_INV = 1.0 / np.sqrt(2.0)
_I_POW = (1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j)


class CHState:
    """n-qubit stabilizer state with exact global phase."""

    __slots__ = ("n", "G", "F", "M", "gamma", "v", "s", "omega")

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("need at least one qubit")
        self.n = n
        self.G = np.eye(n, dtype=np.uint8)
        self.F = np.eye(n, dtype=np.uint8)
        self.M = np.zeros((n, n), dtype=np.uint8)
        self.gamma = np.zeros(n, dtype=np.int64)
        self.v = np.zeros(n, dtype=np.uint8)
        self.s = np.zeros(n, dtype=np.uint8)
        self.omega = 1.0 + 0.0j

    def copy(self) -> "CHState":
        out = CHState.__new__(CHState)
        out.n = self.n
        out.G = self.G.copy()
        out.F = self.F.copy()
        out.M = self.M.copy()
        out.gamma = self.gamma.copy()
        out.v = self.v.copy()
        out.s = self.s.copy()
        out.omega = self.omega
        return out

    # ---- right-multiplications into the Clifford layer -------------------

    def _s_right(self, q: int) -> None:
        self.M[:, q] ^= self.F[:, q]
        self.gamma -= self.F[:, q]
        self.gamma %= 4

    def _cz_right(self, q: int, r: int) -> None:
        self.M[:, q] ^= self.F[:, r]
        self.M[:, r] ^= self.F[:, q]
        self.gamma += 2 * (self.F[:, q] & self.F[:, r])
        self.gamma %= 4

    def _cnot_right(self, q: int, r: int) -> None:
        self.G[:, q] ^= self.G[:, r]
        self.F[:, r] ^= self.F[:, q]
        self.M[:, q] ^= self.M[:, r]

    # ---- left-multiplied gates -------------------------------------------

    def sg(self, q: int) -> None:
        self.M[q, :] ^= self.G[q, :]
        self.gamma[q] = (self.gamma[q] - 1) % 4

    def sdg(self, q: int) -> None:
        self.M[q, :] ^= self.G[q, :]
        self.gamma[q] = (self.gamma[q] + 1) % 4

    def z(self, q: int) -> None:
        self.gamma[q] = (self.gamma[q] + 2) % 4

    def x(self, q: int) -> None:
        u = self.s ^ (self.F[q, :] & (1 - self.v)) ^ (self.M[q, :] & self.v)
        beta = int(np.count_nonzero(self.M[q, :] & (1 - self.v) & self.s))
        beta += int(np.count_nonzero(self.F[q, :] & self.v & self.M[q, :]))
        beta += int(np.count_nonzero(self.F[q, :] & self.v & self.s))
        self.omega *= _I_POW[self.gamma[q] % 4] * (1.0 if beta % 2 == 0 else -1.0)
        self.s = u

    def y(self, q: int) -> None:
        # Y = i X Z
        self.z(q)
        self.x(q)
        self.omega *= 1.0j

    def cz(self, a: int, b: int) -> None:
        self.M[a, :] ^= self.G[b, :]
        self.M[b, :] ^= self.G[a, :]

    def cx(self, c: int, t: int) -> None:
        extra = int(np.count_nonzero(self.M[c, :] & self.F[t, :])) % 2
        self.gamma[c] = (self.gamma[c] + self.gamma[t] + 2 * extra) % 4
        self.G[t, :] ^= self.G[c, :]
        self.F[c, :] ^= self.F[t, :]
        self.M[c, :] ^= self.M[t, :]

    def swap(self, a: int, b: int) -> None:
        self.cx(a, b)
        self.cx(b, a)
        self.cx(a, b)

    def h(self, q: int) -> None:
        t = self.s ^ (self.G[q, :] & self.v)
        u = self.s ^ (self.F[q, :] & (1 - self.v)) ^ (self.M[q, :] & self.v)
        alpha = int(np.count_nonzero(self.G[q, :] & (1 - self.v) & self.s)) % 2
        beta = int(np.count_nonzero(self.M[q, :] & (1 - self.v) & self.s))
        beta += int(np.count_nonzero(self.F[q, :] & self.v & self.M[q, :]))
        beta += int(np.count_nonzero(self.F[q, :] & self.v & self.s))
        beta %= 2
        delta = (self.gamma[q] + 2 * (alpha + beta)) % 4
        self._update_sum(t, u, int(delta), alpha)

    def phase_mul(self, c: complex) -> None:
        self.omega *= c

    def apply_gates(self, codes, qubits) -> None:
        for idx in range(len(codes)):
            code = codes[idx]
            a = qubits[idx, 0]
            b = qubits[idx, 1]
            if code == GATE_H:
                self.h(a)
            elif code == GATE_S:
                self.sg(a)
            elif code == GATE_SDG:
                self.sdg(a)
            elif code == GATE_X:
                self.x(a)
            elif code == GATE_Y:
                self.y(a)
            elif code == GATE_Z:
                self.z(a)
            elif code == GATE_CX:
                self.cx(a, b)
            elif code == GATE_CZ:
                self.cz(a, b)
            elif code == GATE_SWAP:
                self.swap(a, b)
            else:
                raise ValueError(f"bad gate code {code}")

    def pauli(self, xb, zb, k: int) -> None:
        """Apply i^k X^xb Z^zb (Z factors first, then X factors)."""
        for q in range(self.n):
            if zb[q]:
                self.z(q)
        for q in range(self.n):
            if xb[q]:
                self.x(q)
        self.omega *= _I_POW[k % 4]

    # ---- superposition recombination (the H / projector workhorse) -------

    def _update_sum(self, t, u, delta: int, alpha: int) -> None:
        """Rewrite U_H(|t> + i^delta |u>)/sqrt(2)-style sums back to canonical form."""
        sign = -1.0 if alpha % 2 else 1.0
        if np.array_equal(t, u):
            self.s = t
            self.omega *= _SQRT2_INV * sign * (1.0 + _I_POW[delta % 4])
            return

        diff = t ^ u
        set0 = np.flatnonzero(diff & (1 - self.v))
        set1 = np.flatnonzero(diff & self.v)

        if len(set0) > 0:
            q = int(set0[0])
            for i in set0[1:]:
                self._cnot_right(q, int(i))
            for i in set1:
                self._cz_right(q, int(i))
        else:
            q = int(set1[0])
            for i in set1[1:]:
                self._cnot_right(int(i), q)

        if t[q]:
            y = u.copy()
            y[q] ^= 1
            z_bit = bool(u[q])
            y_bit = bool(y[q])
        else:
            y = t.copy()
            y_bit = bool(t[q])
            z_bit = not y_bit

        omega, a_bit, b_bit, c_bit = _h_decompose(bool(self.v[q]), y_bit, z_bit, delta)

        self.s = y
        self.s[q] = 1 if c_bit else 0
        self.omega *= sign * omega
        if a_bit:
            self._s_right(q)
        self.v[q] = 1 if b_bit else 0

    # ---- measurement support ----------------------------------------------

    def z_outcome(self, q: int) -> int:
        """-1 if a Z_q measurement is random, else the deterministic bit."""
        if np.any(self.v & self.G[q, :]):
            return -1
        return int(np.count_nonzero(self.s & self.G[q, :])) % 2

    def project_z(self, q: int, bit: int) -> None:
        """Project (and renormalize) onto Z_q = (-1)^bit; omega=0 if impossible."""
        t = self.s.copy()
        u = (self.G[q, :] & self.v) ^ self.s
        delta = (2 * (int(np.count_nonzero(self.G[q, :] & (1 - self.v) & self.s)) % 2)
                 + 2 * bit) % 4
        if np.array_equal(t, u):
            self.omega *= _SQRT2_INV
        self._update_sum(t, u, delta, 0)

    # ---- amplitudes --------------------------------------------------------

    def amplitude(self, index: int) -> complex:
        """<index|state> with qubit 0 as the most significant bit."""
        y = np.zeros(self.n, dtype=np.uint8)
        for q in range(self.n):
            y[q] = (index >> (self.n - 1 - q)) & 1
        mu = 0
        u = np.zeros(self.n, dtype=np.uint8)
        for p in range(self.n):
            if y[p]:
                u ^= self.F[p, :]
                mu += int(self.gamma[p])
                mu += 2 * (int(np.count_nonzero(self.M[p, :] & u)) % 2)
        if not np.all(self.v | (u == self.s)):
            return 0.0 + 0.0j
        sign = -1.0 if int(np.count_nonzero(self.v & u & self.s)) % 2 else 1.0
        nv = int(np.count_nonzero(self.v))
        return self.omega * (2.0 ** (-nv / 2.0)) * _I_POW[mu % 4] * sign


def _h_decompose(v: bool, y: bool, z: bool, delta: int):
    """Single-qubit rewrite H^v(|y> + i^delta |z>) = omega S^a H^b |c>."""
    if y == z:
        raise ValueError("basis bits must differ")
    if not v:
        omega = _I_POW[(delta * int(y)) % 4]
        delta2 = (delta * (-1 if y else 1)) % 4
        c = bool(delta2 >> 1)
        a = bool(delta2 & 1)
        b = True
    else:
        if delta % 2 == 0:
            a = False
            b = False
            c = bool(delta >> 1)
            omega = -1.0 + 0.0j if (c and y) else 1.0 + 0.0j
        else:
            omega = _SQRT2_INV * (1.0 + _I_POW[delta % 4])
            b = True
            a = True
            c = not ((delta >> 1) ^ int(y))
    return omega, a, b, c


# ---- inner products ---------------------------------------------------------


def norm_ops(state: CHState):
    """Gate list O with O|state> = omega1 |0...0>; returns (ops, omega1).

    Ops are (code, a, b) triples replayable as left gates on any state;
    the recorded S/CZ entries arise only once the Clifford layer is trivial,
    where left and right multiplication coincide.
    """
    st = state.copy()
    ops: list[tuple[int, int, int]] = []
    n = st.n

    for j in range(n):
        if not st.G[j, j]:
            pivot = -1
            for i in range(j + 1, n):
                if st.G[i, j]:
                    pivot = i
                    break
            if pivot < 0:
                raise RuntimeError("singular Clifford-layer matrix")
            for c, t in ((pivot, j), (j, pivot), (pivot, j)):
                st.cx(c, t)
                ops.append((GATE_CX, c, t))
        for i in range(n):
            if i != j and st.G[i, j]:
                st.cx(j, i)
                ops.append((GATE_CX, j, i))

    for r in range(n):
        for c in range(r + 1, n):
            if st.M[r, c]:
                st._cz_right(r, c)
                ops.append((GATE_CZ, r, c))
    for q in range(n):
        if st.M[q, q]:
            st._s_right(q)
            ops.append((GATE_S, q, 0))

    for q in range(n):
        if st.v[q]:
            st.h(q)
            ops.append((GATE_H, q, 0))
    for q in range(n):
        if st.s[q]:
            st.x(q)
            ops.append((GATE_X, q, 0))

    return ops, st.omega


def _replay(state: CHState, ops) -> None:
    for code, a, b in ops:
        if code == GATE_CX:
            state.cx(a, b)
        elif code == GATE_CZ:
            state.cz(a, b)
        elif code == GATE_S:
            state.sg(a)
        elif code == GATE_H:
            state.h(a)
        elif code == GATE_X:
            state.x(a)
        else:
            raise ValueError(f"bad replay op {code}")


def inner_product(bra: CHState, ket: CHState) -> complex:
    """<bra|ket> including global phase."""
    if bra.n != ket.n:
        raise ValueError("qubit counts differ")
    ops, omega1 = norm_ops(bra)
    st = ket.copy()
    _replay(st, ops)
    return np.conj(omega1) * st.amplitude(0)


def pauli_inner_products(bra: CHState, ket: CHState, paulis) -> np.ndarray:
    """<bra| P |ket> for each (xbits, zbits, k) triple, sharing one bra pass."""
    if bra.n != ket.n:
        raise ValueError("qubit counts differ")
    ops, omega1 = norm_ops(bra)
    out = np.empty(len(paulis), dtype=np.complex128)
    for idx, (xb, zb, k) in enumerate(paulis):
        st = ket.copy()
        st.pauli(xb, zb, k)
        _replay(st, ops)
        out[idx] = np.conj(omega1) * st.amplitude(0)
    return out


# ---- Pauli measurement / projection ----------------------------------------


def _conj_to_z(xb, zb, k: int):
    """Gates mapping P = i^k X^xb Z^zb onto sign * Z_q0 by conjugation.

    Returns (ops, inverse_ops, q0, sign) with sign in {+1,-1}; requires a
    Hermitian, non-identity P.
    """
    support = [q for q in range(len(xb)) if xb[q] or zb[q]]
    if not support:
        raise ValueError("cannot measure a scalar operator")
    overlap = sum(1 for q in support if xb[q] and zb[q])
    phase_k = (k - overlap) % 4
    if phase_k % 2:
        raise ValueError("operator is not Hermitian")
    sign = 1 if phase_k == 0 else -1

    # inv collects per-gate inverses in forward order; reversing the whole
    # list then yields the inverse sequence.
    ops: list[tuple[int, int, int]] = []
    inv: list[tuple[int, int, int]] = []
    for q in support:
        if xb[q] and zb[q]:
            ops.append((GATE_SDG, q, 0))
            ops.append((GATE_H, q, 0))
            inv.append((GATE_S, q, 0))
            inv.append((GATE_H, q, 0))
        elif xb[q]:
            ops.append((GATE_H, q, 0))
            inv.append((GATE_H, q, 0))
    q0 = support[0]
    for q in support[1:]:
        ops.append((GATE_CX, q, q0))
        inv.append((GATE_CX, q, q0))
    inv.reverse()
    return ops, inv, q0, sign


def _apply_ops(state: CHState, ops) -> None:
    for code, a, b in ops:
        if code == GATE_H:
            state.h(a)
        elif code == GATE_S:
            state.sg(a)
        elif code == GATE_SDG:
            state.sdg(a)
        elif code == GATE_CX:
            state.cx(a, b)
        else:
            raise ValueError(f"bad conjugation op {code}")


def pauli_expect(state: CHState, xb, zb, k: int) -> int:
    """<P> of a Hermitian Pauli on a stabilizer state: +1, -1 or 0."""
    ops, inv, q0, sign = _conj_to_z(xb, zb, k)
    _apply_ops(state, ops)
    o = state.z_outcome(q0)
    _apply_ops(state, inv)
    if o < 0:
        return 0
    value = 1 if o == 0 else -1
    return value * sign


def project_pauli(state: CHState, xb, zb, k: int, target_sign: int) -> float:
    """Project onto the target_sign eigenspace of P, renormalizing.

    Returns the branch probability q in {0, 0.5, 1}; the state is
    annihilated (omega = 0) when q = 0.
    """
    ops, inv, q0, sign = _conj_to_z(xb, zb, k)
    _apply_ops(state, ops)
    bit = 0 if sign == target_sign else 1
    o = state.z_outcome(q0)
    if o < 0:
        q = 0.5
    else:
        q = 1.0 if o == bit else 0.0
    if q > 0.0:
        state.project_z(q0, bit)
        _apply_ops(state, inv)
    else:
        state.omega = 0.0 + 0.0j
    return q


def measure_pauli_pair(ket: CHState, bra, xb, zb, k: int, rng):
    """Joint measurement of P on a ket/bra pair per the branching rule.

    ``bra`` may be None, meaning the bra state equals the ket (collapsed
    stochastic mode).  Returns (outcome_bit, weight_factor); outcome_bit 0
    encodes the +1 result.  weight 0 signals an aborted shot.  Exactly one
    uniform is consumed iff the branch is genuinely random.
    """
    ops, inv, q0, sign = _conj_to_z(xb, zb, k)
    bit_plus = 0 if sign == 1 else 1

    _apply_ops(ket, ops)
    oi = ket.z_outcome(q0)
    qpi = 0.5 if oi < 0 else (1.0 if oi == bit_plus else 0.0)
    if bra is None:
        qpj = qpi
    else:
        _apply_ops(bra, ops)
        oj = bra.z_outcome(q0)
        qpj = 0.5 if oj < 0 else (1.0 if oj == bit_plus else 0.0)

    a = np.sqrt(qpi * qpj)
    b = np.sqrt((1.0 - qpi) * (1.0 - qpj))
    w = a + b
    if w == 0.0:
        _apply_ops(ket, inv)
        if bra is not None:
            _apply_ops(bra, inv)
        return 0, 0.0

    p_plus = a / w
    if p_plus >= 1.0:
        plus = True
    elif p_plus <= 0.0:
        plus = False
    else:
        plus = rng.random() < p_plus

    bit = bit_plus if plus else 1 - bit_plus
    ket.project_z(q0, bit)
    _apply_ops(ket, inv)
    if bra is not None:
        bra.project_z(q0, bit)
        _apply_ops(bra, inv)
    return (0 if plus else 1), float(w)
