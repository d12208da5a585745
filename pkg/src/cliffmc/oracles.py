"""Independent verification backends for tests and acceptance checks.

Nothing here is used by the production sampling path.  Three backends:

* dense state-vector and density-matrix evolution (n <= 10) applying the
  exact channels, with measurements averaged over outcomes;
* a sign-tracking stabilizer tableau (destabilizer form) used as the
  reference trajectory for the Pauli-frame sampler;
* a Pauli-frame sampler for fully stochastic circuits, distributionally
  equivalent to the shot engine's collapsed mode.
"""

from __future__ import annotations

import numpy as np

from .channels import ChannelDecomposition
from .engine import (
    CompiledCircuit,
    EV_APPLY,
    EV_MEASURE,
    EV_PROJECT,
    EV_RESET,
    EV_UNITARY,
    NoisyCircuit,
)
from .pauli import (
    GATE_CX, GATE_CZ, GATE_H, GATE_S, GATE_SDG, GATE_SWAP,
    GATE_X, GATE_Y, GATE_Z,
    PauliOperator,
)

_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2.0)
_S = np.diag([1.0, 1.0j]).astype(np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Y = np.array([[0, -1.0j], [1.0j, 0]], dtype=np.complex128)
_Z = np.diag([1.0, -1.0]).astype(np.complex128)
_CX = np.eye(4, dtype=np.complex128)[[0, 1, 3, 2]]
_CZ = np.diag([1.0, 1.0, 1.0, -1.0]).astype(np.complex128)
_SWAP = np.eye(4, dtype=np.complex128)[[0, 2, 1, 3]]

GATE_MATRICES = {
    GATE_H: _H, GATE_S: _S, GATE_SDG: _S.conj().T,
    GATE_X: _X, GATE_Y: _Y, GATE_Z: _Z,
    GATE_CX: _CX, GATE_CZ: _CZ, GATE_SWAP: _SWAP,
}


def apply_gate_vec(vec: np.ndarray, code: int, qubits: tuple[int, ...], n: int) -> np.ndarray:
    """Apply one gate to a 2^n state vector (qubit 0 = most significant)."""
    mat = GATE_MATRICES[code]
    k = len(qubits)
    tensor = vec.reshape((2,) * n)
    moved = np.moveaxis(tensor, qubits, range(k))
    out = (mat @ moved.reshape(2**k, -1)).reshape((2,) * n)
    return np.moveaxis(out, range(k), qubits).reshape(-1)


def clifford_unitary(gates, n: int) -> np.ndarray:
    """Dense unitary of a gate sequence (gates applied left to right)."""
    u = np.eye(2**n, dtype=np.complex128)
    for g in gates:
        u = np.column_stack(
            [apply_gate_vec(u[:, c], g.code, g.qubits, n) for c in range(u.shape[1])]
        )
    return u


def pauli_matrix(p: PauliOperator) -> np.ndarray:
    """Dense matrix of i^k X^x Z^z."""
    mat = np.array([[p.phase]], dtype=np.complex128)
    for xq, zq in zip(p.x, p.z):
        local = np.eye(2, dtype=np.complex128)
        if zq:
            local = _Z @ local
        if xq:
            local = _X @ local
        mat = np.kron(mat, local)
    return mat


def kraus_matrices(channel: ChannelDecomposition, qubits: tuple[int, ...],
                   n: int) -> list[tuple[float, np.ndarray]]:
    """Dense (probability, K) pairs of a channel embedded on n qubits."""
    out = []
    for kt in channel.kraus_terms:
        k_mat = np.zeros((2**n, 2**n), dtype=np.complex128)
        for term in kt.terms:
            mapped = [
                type(g)(g.kind, tuple(qubits[q] for q in g.qubits)) for g in term.gates
            ]
            k_mat += term.coefficient * clifford_unitary(mapped, n)
        out.append((kt.probability, k_mat))
    return out


def channel_superop_2q(channel: ChannelDecomposition) -> np.ndarray:
    """Dense channel action on the channel's own qubits, as rho -> sum pKrhoK."""
    n = channel.arity
    dim = 2**n
    basis = np.eye(dim * dim)
    mats = kraus_matrices(channel, tuple(range(n)), n)
    sup = np.zeros((dim * dim, dim * dim), dtype=np.complex128)
    for col in range(dim * dim):
        rho = basis[:, col].reshape(dim, dim)
        out = np.zeros_like(rho, dtype=np.complex128)
        for p, k_mat in mats:
            out += p * (k_mat @ rho @ k_mat.conj().T)
        sup[:, col] = out.reshape(-1)
    return sup


def is_cptp(channel: ChannelDecomposition, tol: float = 1e-10) -> bool:
    """Complete positivity and trace preservation of the dense reconstruction."""
    n = channel.arity
    dim = 2**n
    mats = kraus_matrices(channel, tuple(range(n)), n)
    # Choi matrix: sum over p K applied to each |i><j| block.
    choi = np.zeros((dim * dim, dim * dim), dtype=np.complex128)
    for i in range(dim):
        for j in range(dim):
            e = np.zeros((dim, dim), dtype=np.complex128)
            e[i, j] = 1.0
            out = np.zeros_like(e)
            for p, k_mat in mats:
                out += p * (k_mat @ e @ k_mat.conj().T)
            choi[i * dim:(i + 1) * dim, j * dim:(j + 1) * dim] = out
    eigs = np.linalg.eigvalsh((choi + choi.conj().T) / 2.0)
    if eigs.min() < -tol:
        return False
    trace_part = np.zeros((dim, dim), dtype=np.complex128)
    for p, k_mat in mats:
        trace_part += p * (k_mat.conj().T @ k_mat)
    return bool(np.allclose(trace_part, np.eye(dim), atol=tol))


DENSE_EVOLVE_CAP = 10


def dense_evolve(circuit: NoisyCircuit | CompiledCircuit,
                 input_vec: np.ndarray | None = None) -> np.ndarray:
    """Exact density-matrix evolution; measurements averaged over outcomes."""
    compiled = circuit.compiled() if isinstance(circuit, NoisyCircuit) else circuit
    n = compiled.n
    if n > DENSE_EVOLVE_CAP:
        raise ValueError(f"dense evolution capped at {DENSE_EVOLVE_CAP} qubits")
    dim = 2**n
    if input_vec is None:
        vec = np.zeros(dim, dtype=np.complex128)
        vec[0] = 1.0
    else:
        vec = np.asarray(input_vec, dtype=np.complex128)
    rho = np.outer(vec, vec.conj())

    def channel_mats(idx):
        ch = compiled.channels[idx]
        qubits = _channel_qubits(compiled, idx)
        return kraus_matrices(ch.channel, qubits, n)

    for row in compiled.events:
        ev_type, a, b, pre = (int(v) for v in row)
        if ev_type == EV_UNITARY:
            out = np.zeros_like(rho)
            for p, k_mat in channel_mats(a):
                out += p * (k_mat @ rho @ k_mat.conj().T)
            rho = out
            continue
        if ev_type == EV_APPLY:
            p_mat = pauli_matrix(compiled.paulis[a])
            rho = p_mat @ rho @ p_mat.conj().T
            continue
        if ev_type == EV_PROJECT:
            sign = 1.0 if b == 0 else -1.0
            p_mat = pauli_matrix(compiled.paulis[a])
            proj = (np.eye(dim) + sign * p_mat) / 2.0
            rho = proj @ rho @ proj
            rho /= np.trace(rho).real
            continue
        if pre >= 0:
            out = np.zeros_like(rho)
            for p, k_mat in channel_mats(pre):
                out += p * (k_mat @ rho @ k_mat.conj().T)
            rho = out
        p_mat = pauli_matrix(compiled.paulis[a])
        plus = (np.eye(dim) + p_mat) / 2.0
        minus = (np.eye(dim) - p_mat) / 2.0
        if ev_type == EV_MEASURE:
            rho = plus @ rho @ plus + minus @ rho @ minus
        else:  # reset: correct the -1 branch with the flip operator
            q_mat = pauli_matrix(compiled.paulis[b])
            rho = plus @ rho @ plus + q_mat @ (minus @ rho @ minus) @ q_mat.conj().T
    return rho


def _channel_qubits(compiled: CompiledCircuit, idx: int) -> tuple[int, ...]:
    return compiled.channel_qubits[idx]


def dense_expectation(rho: np.ndarray, p: PauliOperator) -> complex:
    return complex(np.trace(pauli_matrix(p) @ rho))


# ---- stabilizer tableau (reference trajectories) ----------------------------


class TableauSim:
    """Destabilizer/stabilizer tableau with sign tracking.

    Row convention: a row (x, z, r) represents (-1)^r i^(x.z) X^x Z^z, i.e.
    the canonical Hermitian Pauli with sign (-1)^r.
    """

    def __init__(self, n: int):
        self.n = n
        self.x = np.zeros((2 * n, n), dtype=np.uint8)
        self.z = np.zeros((2 * n, n), dtype=np.uint8)
        self.r = np.zeros(2 * n, dtype=np.uint8)
        for i in range(n):
            self.x[i, i] = 1          # destabilizer X_i
            self.z[n + i, i] = 1      # stabilizer Z_i

    # -- gate conjugations --

    def h(self, q):
        self.r ^= self.x[:, q] & self.z[:, q]
        self.x[:, q], self.z[:, q] = self.z[:, q].copy(), self.x[:, q].copy()

    def sg(self, q):
        self.r ^= self.x[:, q] & self.z[:, q]
        self.z[:, q] ^= self.x[:, q]

    def sdg(self, q):
        self.r ^= self.x[:, q] & (1 - self.z[:, q])
        self.z[:, q] ^= self.x[:, q]

    def xg(self, q):
        self.r ^= self.z[:, q]

    def yg(self, q):
        self.r ^= self.x[:, q] ^ self.z[:, q]

    def zg(self, q):
        self.r ^= self.x[:, q]

    def cx(self, c, t):
        self.r ^= self.x[:, c] & self.z[:, t] & (self.x[:, t] ^ self.z[:, c] ^ 1)
        self.x[:, t] ^= self.x[:, c]
        self.z[:, c] ^= self.z[:, t]

    def cz(self, a, b):
        self.h(b)
        self.cx(a, b)
        self.h(b)

    def swap(self, a, b):
        for arr in (self.x, self.z):
            arr[:, [a, b]] = arr[:, [b, a]]

    def apply_gate(self, code, a, b):
        if code == GATE_H:
            self.h(a)
        elif code == GATE_S:
            self.sg(a)
        elif code == GATE_SDG:
            self.sdg(a)
        elif code == GATE_X:
            self.xg(a)
        elif code == GATE_Y:
            self.yg(a)
        elif code == GATE_Z:
            self.zg(a)
        elif code == GATE_CX:
            self.cx(a, b)
        elif code == GATE_CZ:
            self.cz(a, b)
        elif code == GATE_SWAP:
            self.swap(a, b)
        else:
            raise ValueError(f"bad gate code {code}")

    def apply_pauli(self, p: PauliOperator):
        flips = ((self.x @ p.z) + (self.z @ p.x)) % 2
        self.r ^= flips.astype(np.uint8)

    # -- measurement --

    @staticmethod
    def _g(x1, z1, x2, z2):
        """Exponent of i when multiplying canonical single-qubit Paulis."""
        if x1 == 0 and z1 == 0:
            return 0
        if x1 == 1 and z1 == 1:
            return int(z2) - int(x2)
        if x1 == 1 and z1 == 0:
            return int(z2) * (2 * int(x2) - 1)
        return int(x2) * (1 - 2 * int(z2))

    def _rowsum_into(self, hx, hz, hr, i):
        phase = 2 * hr + 2 * int(self.r[i])
        for q in range(self.n):
            phase += self._g(self.x[i, q], self.z[i, q], hx[q], hz[q])
        hx ^= self.x[i]
        hz ^= self.z[i]
        return (phase % 4) // 2

    def _rowsum(self, h, i):
        self.r[h] = self._rowsum_into(self.x[h], self.z[h], int(self.r[h]), i)

    def _pauli_sign_bit(self, p: PauliOperator) -> int:
        overlap = int(np.count_nonzero(p.x & p.z))
        k = (p.k - overlap) % 4
        if k % 2:
            raise ValueError("operator is not Hermitian")
        return k // 2

    def measure_pauli(self, p: PauliOperator, rng, force: int | None = None) -> int:
        """Measure a Hermitian Pauli; returns outcome bit (0 = +1).

        ``force`` post-selects the stated bit when the outcome is random.
        """
        rp = self._pauli_sign_bit(p)
        anti = ((self.x @ p.z) + (self.z @ p.x)) % 2
        stab_anti = np.flatnonzero(anti[self.n:]) + self.n
        if len(stab_anti) > 0:
            pivot = int(stab_anti[0])
            for i in np.flatnonzero(anti):
                if int(i) != pivot:
                    self._rowsum(int(i), pivot)
            # old stabilizer becomes the destabilizer partner
            d = pivot - self.n
            self.x[d] = self.x[pivot].copy()
            self.z[d] = self.z[pivot].copy()
            self.r[d] = self.r[pivot]
            if force is None:
                outcome = int(rng.random() < 0.5)
            else:
                outcome = int(force)
            self.x[pivot] = p.x.copy()
            self.z[pivot] = p.z.copy()
            self.r[pivot] = (rp + outcome) % 2
            return outcome
        # deterministic: accumulate stabilizer rows flagged by destabilizers
        hx = np.zeros(self.n, dtype=np.uint8)
        hz = np.zeros(self.n, dtype=np.uint8)
        hr = 0
        for d in np.flatnonzero(anti[: self.n]):
            hr = self._rowsum_into(hx, hz, hr, int(d) + self.n)
        if not (np.array_equal(hx, p.x) and np.array_equal(hz, p.z)):
            raise RuntimeError("deterministic measurement accumulation failed")
        outcome = (hr + rp) % 2
        if force is not None and outcome != force:
            raise ValueError("cannot post-select a deterministic opposite outcome")
        return outcome

    def reset_pauli(self, p: PauliOperator, flip: PauliOperator, rng) -> None:
        if self.measure_pauli(p, rng) == 1:
            self.apply_pauli(flip)


# ---- Pauli-frame sampler -----------------------------------------------------


class PauliFrameSampler:
    """Trajectory sampler for fully stochastic circuits.

    A single noiseless reference trajectory fixes the random (quiescent)
    measurement outcomes via the tableau backend; sampled Pauli faults are
    then propagated as an error frame whose anticommutation with each
    measured operator flips the recorded bit.  Detector and logical-flip
    statistics match the exact distribution (reference randomness cancels
    in detectors and does not couple to the frame).
    """

    def __init__(self, circuit: NoisyCircuit | CompiledCircuit,
                 logicals: list[PauliOperator], ref_rng):
        compiled = circuit.compiled() if isinstance(circuit, NoisyCircuit) else circuit
        self.compiled = compiled
        self.n = compiled.n
        self.logicals = logicals
        self._build_reference(ref_rng)
        self._compile_frame_program()

    def _build_reference(self, rng):
        """Noiseless tableau pass: apply each channel's leading Kraus branch
        (the ideal gate) and sample the genuinely random outcomes once."""
        compiled = self.compiled
        tab = TableauSim(self.n)
        ref = np.zeros(compiled.n_slots, dtype=np.uint8)
        for row in compiled.events:
            ev_type, a, b, pre = (int(v) for v in row)
            if ev_type == EV_UNITARY:
                codes, qubits = compiled.channels[a].encoded[0][0]
                for g in range(len(codes)):
                    tab.apply_gate(int(codes[g]), int(qubits[g, 0]), int(qubits[g, 1]))
            elif ev_type == EV_APPLY:
                tab.apply_pauli(compiled.paulis[a])
            elif ev_type == EV_PROJECT:
                tab.measure_pauli(compiled.paulis[a], rng, force=b)
            elif ev_type == EV_MEASURE:
                ref[b] = tab.measure_pauli(compiled.paulis[a], rng)
            elif ev_type == EV_RESET:
                tab.reset_pauli(compiled.paulis[a], compiled.paulis[b], rng)
        self.reference = ref

    def _compile_frame_program(self):
        """Flatten events into frame ops: (kind, payload) tuples.

        A stochastic channel whose Kraus branches share the leading-branch
        gate list as a prefix (bare Pauli mixtures, or an ideal gate with a
        Pauli suffix per branch) compiles into a deterministic conjugation
        step plus a sampled Pauli-delta step.
        """
        compiled = self.compiled
        prog = []
        noise_seen = False

        def add_channel(idx: int):
            nonlocal noise_seen
            ch = compiled.channels[idx]
            base, deltas = _frame_channel_parts(compiled, idx)
            if len(base[0]) > 0:
                prog.append(("g", base))
            if ch.n_kraus > 1:
                noise_seen = True
                prog.append(("n", ch.kraus_cum, deltas))

        for row in compiled.events:
            ev_type, a, b, pre = (int(v) for v in row)
            if ev_type == EV_UNITARY:
                add_channel(a)
            elif ev_type == EV_APPLY:
                pass  # Pauli conjugation leaves frame bits unchanged
            elif ev_type == EV_PROJECT:
                if noise_seen:
                    raise ValueError("projection events must precede all noise")
            elif ev_type == EV_MEASURE:
                if pre >= 0:
                    add_channel(pre)
                p = compiled.paulis[a]
                prog.append(("m", b, p.x.copy(), p.z.copy()))
            elif ev_type == EV_RESET:
                if pre >= 0:
                    add_channel(pre)
                p = compiled.paulis[a]
                support = np.flatnonzero(p.x | p.z)
                if len(support) != 1:
                    raise ValueError("frame sampler supports single-qubit resets only")
                prog.append(("r", int(support[0])))
        self.program = prog

    def sample(self, rng) -> tuple[np.ndarray, np.ndarray]:
        """One trajectory: (record bits, logical flip bits per logical)."""
        fx = np.zeros(self.n, dtype=np.uint8)
        fz = np.zeros(self.n, dtype=np.uint8)
        record = self.reference.copy()
        for op in self.program:
            kind = op[0]
            if kind == "g":
                codes, qubits = op[1]
                for g in range(len(codes)):
                    _frame_gate(fx, fz, int(codes[g]), int(qubits[g, 0]), int(qubits[g, 1]))
            elif kind == "n":
                cum, bits = op[1], op[2]
                r = 0
                if len(cum) > 1:
                    r = min(int(np.searchsorted(cum, rng.random(), side="right")),
                            len(cum) - 1)
                bx, bz = bits[r]
                if bx is not None:
                    fx ^= bx
                    fz ^= bz
            elif kind == "m":
                slot, px, pz = op[1], op[2], op[3]
                flip = (int(fx @ pz) + int(fz @ px)) % 2
                record[slot] ^= flip
            else:  # reset
                q = op[1]
                fx[q] = 0
                fz[q] = 0
        flips = np.array(
            [(int(fx @ p.z) + int(fz @ p.x)) % 2 for p in self.logicals],
            dtype=np.uint8,
        )
        return record, flips

    # -- deterministic fault injection (decoder soundness scans) --

    def noise_sites(self) -> list[tuple[int, int]]:
        """(program position, branch count) of every sampled-noise step."""
        return [(i, len(op[2])) for i, op in enumerate(self.program) if op[0] == "n"]

    def propagate_faults(self, faults: dict[int, int]
                         ) -> tuple[np.ndarray, np.ndarray]:
        """Push chosen fault branches through the circuit with no sampling.

        ``faults`` maps a noise-site program position to a Kraus branch
        index.  Returns (record flip bits, logical flip bits) relative to
        the noiseless reference; detectors computed from the flip record
        directly equal the detectors of the faulted run.
        """
        fx = np.zeros(self.n, dtype=np.uint8)
        fz = np.zeros(self.n, dtype=np.uint8)
        record = np.zeros(self.compiled.n_slots, dtype=np.uint8)
        for pos, op in enumerate(self.program):
            kind = op[0]
            if kind == "g":
                codes, qubits = op[1]
                for g in range(len(codes)):
                    _frame_gate(fx, fz, int(codes[g]), int(qubits[g, 0]),
                                int(qubits[g, 1]))
            elif kind == "n":
                r = faults.get(pos, 0)
                bx, bz = op[2][r]
                if bx is not None:
                    fx ^= bx
                    fz ^= bz
            elif kind == "m":
                slot, px, pz = op[1], op[2], op[3]
                record[slot] = (int(fx @ pz) + int(fz @ px)) % 2
            else:
                q = op[1]
                fx[q] = 0
                fz[q] = 0
        flips = np.array(
            [(int(fx @ p.z) + int(fz @ p.x)) % 2 for p in self.logicals],
            dtype=np.uint8,
        )
        return record, flips


def _frame_channel_parts(compiled: CompiledCircuit, idx: int):
    """Split a stochastic channel into (base gate encoding, per-kraus deltas).

    Requires every Kraus branch to extend the leading branch's gate list by
    Pauli gates only; deltas are (x, z) bit pairs, (None, None) = identity.
    """
    ch = compiled.channels[idx]
    if not ch.stochastic:
        raise ValueError("frame sampling needs all-stochastic noise")
    n = compiled.n
    base_codes, base_qubits = ch.encoded[0][0]
    n_base = len(base_codes)
    deltas = []
    for r in range(ch.n_kraus):
        codes, qubits = ch.encoded[r][0]
        if (len(codes) < n_base
                or not np.array_equal(codes[:n_base], base_codes)
                or not np.array_equal(qubits[:n_base], base_qubits)):
            raise ValueError("Kraus branches must share the leading branch prefix")
        bx = np.zeros(n, dtype=np.uint8)
        bz = np.zeros(n, dtype=np.uint8)
        for g in range(n_base, len(codes)):
            code = int(codes[g])
            q = int(qubits[g, 0])
            if code == GATE_X:
                bx[q] ^= 1
            elif code == GATE_Z:
                bz[q] ^= 1
            elif code == GATE_Y:
                bx[q] ^= 1
                bz[q] ^= 1
            else:
                raise ValueError("Kraus suffixes must be Pauli gates")
        if bx.any() or bz.any():
            deltas.append((bx, bz))
        else:
            deltas.append((None, None))
    return (base_codes, base_qubits), deltas


def _frame_gate(fx, fz, code, a, b):
    """Conjugate frame bits through one Clifford gate (signs irrelevant)."""
    if code == GATE_H:
        fx[a], fz[a] = fz[a], fx[a]
    elif code in (GATE_S, GATE_SDG):
        fz[a] ^= fx[a]
    elif code in (GATE_X, GATE_Y, GATE_Z):
        pass
    elif code == GATE_CX:
        fx[b] ^= fx[a]
        fz[a] ^= fz[b]
    elif code == GATE_CZ:
        fz[a] ^= fx[b]
        fz[b] ^= fx[a]
    elif code == GATE_SWAP:
        fx[a], fx[b] = fx[b], fx[a]
        fz[a], fz[b] = fz[b], fz[a]
    else:
        raise ValueError(f"bad gate code {code}")


def pauli_frame_sample(circuit: NoisyCircuit, logicals: list[PauliOperator],
                       rng) -> tuple[np.ndarray, np.ndarray]:
    """One Pauli-frame trajectory of an all-stochastic circuit.

    Returns (record, logical flip bits).  For repeated sampling construct a
    PauliFrameSampler once and call ``sample``.
    """
    sampler = PauliFrameSampler(circuit, logicals, rng)
    return sampler.sample(rng)
