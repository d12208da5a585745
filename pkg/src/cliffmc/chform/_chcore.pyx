# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stabilizer kernel with exact global phase.

Mirrors ``_chcore_py`` exactly, including the order in which uniforms are
drawn from the random stream, and adds ``run_shot_compiled`` which executes
a whole compiled circuit per call.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.stdlib cimport free, malloc
from libc.string cimport memcpy, memset
from libc.math cimport sqrt

import numpy as np

cimport numpy as cnp
from numpy.random cimport bitgen_t

cnp.import_array()

ctypedef cnp.uint8_t u8
ctypedef cnp.int32_t i32
ctypedef cnp.int64_t i64

cdef double SQRT2_INV = 0.7071067811865475244008443621
cdef double complex IPOW[4]
IPOW[0] = 1.0 + 0.0j
IPOW[1] = 0.0 + 1.0j
IPOW[2] = -1.0 + 0.0j
IPOW[3] = 0.0 - 1.0j

# gate opcodes, matching cliffmc.pauli
cdef enum:
    G_H = 0
    G_S = 1
    G_SDG = 2
    G_X = 3
    G_Y = 4
    G_Z = 5
    G_CX = 6
    G_CZ = 7
    G_SWAP = 8

cdef enum:
    EV_UNITARY = 0
    EV_MEASURE = 1
    EV_RESET = 2
    EV_PROJECT = 3
    EV_APPLY = 4


cdef class CHState:
    """n-qubit stabilizer state in canonical form omega * U_C * U_H |s>."""

    cdef public int n
    cdef object _buf  # numpy backing storage keeps the pointers alive
    cdef u8* G
    cdef u8* F
    cdef u8* M
    cdef i64* gamma
    cdef u8* v
    cdef u8* s
    cdef u8* t_buf
    cdef u8* u_buf
    cdef public double complex omega

    def __cinit__(self, int n):
        if n < 1:
            raise ValueError("need at least one qubit")
        self.n = n
        nb = 3 * n * n + 4 * n
        self._buf = (np.zeros(nb, dtype=np.uint8), np.zeros(n, dtype=np.int64))
        cdef u8[::1] mem = self._buf[0]
        cdef i64[::1] gmem = self._buf[1]
        self.G = &mem[0]
        self.F = &mem[n * n]
        self.M = &mem[2 * n * n]
        self.v = &mem[3 * n * n]
        self.s = &mem[3 * n * n + n]
        self.t_buf = &mem[3 * n * n + 2 * n]
        self.u_buf = &mem[3 * n * n + 3 * n]
        self.gamma = &gmem[0]
        cdef int i
        for i in range(n):
            self.G[i * n + i] = 1
            self.F[i * n + i] = 1
        self.omega = 1.0 + 0.0j

    cpdef CHState copy(self):
        cdef CHState out = CHState(self.n)
        out._buf[0][:] = self._buf[0]
        out._buf[1][:] = self._buf[1]
        out.omega = self.omega
        return out

    # ---- debugging views (copies) ----

    @property
    def tableau(self):
        n = self.n
        mem = np.asarray(self._buf[0])
        return {
            "G": mem[: n * n].reshape(n, n).copy(),
            "F": mem[n * n: 2 * n * n].reshape(n, n).copy(),
            "M": mem[2 * n * n: 3 * n * n].reshape(n, n).copy(),
            "gamma": np.asarray(self._buf[1]).copy(),
            "v": mem[3 * n * n: 3 * n * n + n].copy(),
            "s": mem[3 * n * n + n: 3 * n * n + 2 * n].copy(),
        }

    # ---- right-multiplications ----

    cdef void _s_right(self, int q) nogil:
        cdef int i, n = self.n
        for i in range(n):
            self.M[i * n + q] ^= self.F[i * n + q]
            self.gamma[i] = (self.gamma[i] + 4 - self.F[i * n + q]) & 3

    cdef void _cz_right(self, int q, int r) nogil:
        cdef int i, n = self.n
        for i in range(n):
            self.M[i * n + q] ^= self.F[i * n + r]
            self.M[i * n + r] ^= self.F[i * n + q]
            self.gamma[i] = (self.gamma[i] + 2 * (self.F[i * n + q] & self.F[i * n + r])) & 3

    cdef void _cnot_right(self, int q, int r) nogil:
        cdef int i, n = self.n
        for i in range(n):
            self.G[i * n + q] ^= self.G[i * n + r]
            self.F[i * n + r] ^= self.F[i * n + q]
            self.M[i * n + q] ^= self.M[i * n + r]

    # ---- left-multiplied gates ----

    cdef void _sg(self, int q) nogil:
        cdef int j, n = self.n
        for j in range(n):
            self.M[q * n + j] ^= self.G[q * n + j]
        self.gamma[q] = (self.gamma[q] + 3) & 3

    cdef void _sdg(self, int q) nogil:
        cdef int j, n = self.n
        for j in range(n):
            self.M[q * n + j] ^= self.G[q * n + j]
        self.gamma[q] = (self.gamma[q] + 1) & 3

    cdef void _z(self, int q) nogil:
        self.gamma[q] = (self.gamma[q] + 2) & 3

    cdef void _x(self, int q) nogil:
        cdef int j, n = self.n
        cdef int beta = 0
        cdef u8 uj
        for j in range(n):
            uj = self.s[j] ^ (self.F[q * n + j] & (1 - self.v[j])) ^ (self.M[q * n + j] & self.v[j])
            beta += self.M[q * n + j] & (1 - self.v[j]) & self.s[j]
            beta += self.F[q * n + j] & self.v[j] & self.M[q * n + j]
            beta += self.F[q * n + j] & self.v[j] & self.s[j]
            self.u_buf[j] = uj
        self.omega = self.omega * IPOW[self.gamma[q] & 3]
        if beta & 1:
            self.omega = -self.omega
        memcpy(self.s, self.u_buf, n)

    cdef void _y(self, int q) nogil:
        self._z(q)
        self._x(q)
        self.omega = self.omega * IPOW[1]

    cdef void _cz(self, int a, int b) nogil:
        cdef int j, n = self.n
        for j in range(n):
            self.M[a * n + j] ^= self.G[b * n + j]
            self.M[b * n + j] ^= self.G[a * n + j]

    cdef void _cx(self, int c, int t) nogil:
        cdef int j, n = self.n
        cdef int extra = 0
        for j in range(n):
            extra += self.M[c * n + j] & self.F[t * n + j]
        self.gamma[c] = (self.gamma[c] + self.gamma[t] + 2 * (extra & 1)) & 3
        for j in range(n):
            self.G[t * n + j] ^= self.G[c * n + j]
            self.F[c * n + j] ^= self.F[t * n + j]
            self.M[c * n + j] ^= self.M[t * n + j]

    cdef void _swap(self, int a, int b) nogil:
        self._cx(a, b)
        self._cx(b, a)
        self._cx(a, b)

    cdef void _h(self, int q) nogil:
        cdef int j, n = self.n
        cdef int alpha = 0, beta = 0
        for j in range(n):
            self.t_buf[j] = self.s[j] ^ (self.G[q * n + j] & self.v[j])
            self.u_buf[j] = self.s[j] ^ (self.F[q * n + j] & (1 - self.v[j])) ^ (self.M[q * n + j] & self.v[j])
            alpha += self.G[q * n + j] & (1 - self.v[j]) & self.s[j]
            beta += self.M[q * n + j] & (1 - self.v[j]) & self.s[j]
            beta += self.F[q * n + j] & self.v[j] & self.M[q * n + j]
            beta += self.F[q * n + j] & self.v[j] & self.s[j]
        alpha &= 1
        beta &= 1
        cdef int delta = (self.gamma[q] + 2 * (alpha + beta)) & 3
        self._update_sum(delta, alpha)

    cdef void _update_sum(self, int delta, int alpha) nogil:
        """Recombine U_H(|t_buf> + i^delta |u_buf>) into canonical form."""
        cdef int n = self.n
        cdef int j, q = -1, on_v = 0
        cdef double complex sign = -1.0 if (alpha & 1) else 1.0
        cdef bint equal = True
        for j in range(n):
            if self.t_buf[j] != self.u_buf[j]:
                equal = False
                break
        if equal:
            memcpy(self.s, self.t_buf, n)
            self.omega = self.omega * (SQRT2_INV * sign * (1.0 + IPOW[delta & 3]))
            return

        for j in range(n):
            if (self.t_buf[j] ^ self.u_buf[j]) and not self.v[j]:
                q = j
                break
        if q >= 0:
            for j in range(n):
                if j == q or not (self.t_buf[j] ^ self.u_buf[j]):
                    continue
                if self.v[j]:
                    self._cz_right(q, j)
                else:
                    self._cnot_right(q, j)
        else:
            for j in range(n):
                if (self.t_buf[j] ^ self.u_buf[j]) and self.v[j]:
                    if q < 0:
                        q = j
                    else:
                        self._cnot_right(j, q)
            on_v = 1

        cdef int y_bit, z_bit
        if self.t_buf[q]:
            memcpy(self.s, self.u_buf, n)
            z_bit = self.u_buf[q]
            y_bit = z_bit ^ 1
        else:
            memcpy(self.s, self.t_buf, n)
            y_bit = self.t_buf[q]
            z_bit = y_bit ^ 1

        # single-qubit decomposition H^v(|y> + i^delta |z>) = w S^a H^b |c>
        cdef double complex w
        cdef int a_bit, b_bit, c_bit, delta2
        if not self.v[q]:
            w = IPOW[(delta * y_bit) & 3]
            delta2 = (delta * (-1 if y_bit else 1)) & 3
            c_bit = delta2 >> 1
            a_bit = delta2 & 1
            b_bit = 1
        else:
            if not (delta & 1):
                a_bit = 0
                b_bit = 0
                c_bit = delta >> 1
                w = -1.0 if (c_bit and y_bit) else 1.0
            else:
                w = SQRT2_INV * (1.0 + IPOW[delta & 3])
                b_bit = 1
                a_bit = 1
                c_bit = 1 - ((delta >> 1) ^ y_bit)

        self.s[q] = <u8> c_bit
        self.omega = self.omega * (sign * w)
        if a_bit:
            self._s_right(q)
        self.v[q] = <u8> b_bit

    # ---- measurement support ----

    cdef int _z_outcome(self, int q) nogil:
        cdef int j, n = self.n, par = 0
        for j in range(n):
            if self.v[j] & self.G[q * n + j]:
                return -1
            par ^= self.s[j] & self.G[q * n + j]
        return par

    cdef void _project_z(self, int q, int bit) nogil:
        cdef int j, n = self.n, par = 0
        cdef bint equal = True
        for j in range(n):
            self.t_buf[j] = self.s[j]
            self.u_buf[j] = (self.G[q * n + j] & self.v[j]) ^ self.s[j]
            if self.t_buf[j] != self.u_buf[j]:
                equal = False
            par ^= self.G[q * n + j] & (1 - self.v[j]) & self.s[j]
        cdef int delta = (2 * par + 2 * bit) & 3
        if equal:
            self.omega = self.omega * SQRT2_INV
        self._update_sum(delta, 0)

    cdef void _pauli(self, const u8* xb, const u8* zb, int k) nogil:
        cdef int q, n = self.n
        for q in range(n):
            if zb[q]:
                self._z(q)
        for q in range(n):
            if xb[q]:
                self._x(q)
        self.omega = self.omega * IPOW[k & 3]

    cdef double complex _amplitude(self, long index) nogil:
        cdef int n = self.n
        cdef int p, j
        cdef long mu = 0
        cdef int nv = 0, sgn = 0
        cdef u8 yp
        memset(self.u_buf, 0, n)
        for p in range(n):
            yp = <u8> ((index >> (n - 1 - p)) & 1)
            if yp:
                mu += self.gamma[p]
                sgn = 0  # reuse as scratch parity below
                for j in range(n):
                    self.u_buf[j] ^= self.F[p * n + j]
                for j in range(n):
                    sgn ^= self.M[p * n + j] & self.u_buf[j]
                mu += 2 * sgn
        cdef double complex out = self.omega
        sgn = 0
        for j in range(n):
            if self.v[j]:
                nv += 1
                sgn ^= self.u_buf[j] & self.s[j]
            elif self.u_buf[j] != self.s[j]:
                return 0.0 + 0.0j
        out = out * IPOW[mu & 3]
        if sgn:
            out = -out
        return out * (2.0 ** (-0.5 * nv))

    # ---- Python-facing wrappers ----

    def sg(self, int q):
        self._sg(q)

    def sdg(self, int q):
        self._sdg(q)

    def z(self, int q):
        self._z(q)

    def x(self, int q):
        self._x(q)

    def y(self, int q):
        self._y(q)

    def h(self, int q):
        self._h(q)

    def cx(self, int c, int t):
        self._cx(c, t)

    def cz(self, int a, int b):
        self._cz(a, b)

    def swap(self, int a, int b):
        self._swap(a, b)

    def phase_mul(self, c):
        self.omega = self.omega * c

    def apply_gates(self, i32[::1] codes, i32[:, ::1] qubits):
        cdef int idx
        for idx in range(codes.shape[0]):
            self._gate(codes[idx], qubits[idx, 0], qubits[idx, 1])

    cdef void _gate(self, int code, int a, int b) nogil:
        if code == G_H:
            self._h(a)
        elif code == G_S:
            self._sg(a)
        elif code == G_SDG:
            self._sdg(a)
        elif code == G_X:
            self._x(a)
        elif code == G_Y:
            self._y(a)
        elif code == G_Z:
            self._z(a)
        elif code == G_CX:
            self._cx(a, b)
        elif code == G_CZ:
            self._cz(a, b)
        elif code == G_SWAP:
            self._swap(a, b)

    def pauli(self, const u8[::1] xb, const u8[::1] zb, int k):
        self._pauli(&xb[0], &zb[0], k)

    def z_outcome(self, int q):
        return self._z_outcome(q)

    def project_z(self, int q, int bit):
        self._project_z(q, bit)

    def amplitude(self, index):
        return complex(self._amplitude(<long> index))


# ---- conjugation of a Pauli onto a single Z ---------------------------------


cdef int _conj_info(const u8* xb, const u8* zb, int n, int* q0_out) nogil:
    """Returns the +-1 sign of the conjugated operator; q0_out gets the pivot.

    Returns 0 for the identity and 2 for a non-Hermitian phase (error codes
    resolved by the caller, which knows the Pauli's phase exponent k).
    """
    cdef int q, ov = 0, q0 = -1
    for q in range(n):
        if (xb[q] or zb[q]) and q0 < 0:
            q0 = q
        if xb[q] and zb[q]:
            ov += 1
    q0_out[0] = q0
    return ov


cdef void _conj_fwd(CHState st, const u8* xb, const u8* zb, int q0) nogil:
    cdef int q
    for q in range(st.n):
        if xb[q] and zb[q]:
            st._sdg(q)
            st._h(q)
        elif xb[q]:
            st._h(q)
    for q in range(st.n):
        if q != q0 and (xb[q] or zb[q]):
            st._cx(q, q0)


cdef void _conj_bwd(CHState st, const u8* xb, const u8* zb, int q0) nogil:
    cdef int q
    for q in range(st.n - 1, -1, -1):
        if q != q0 and (xb[q] or zb[q]):
            st._cx(q, q0)
    for q in range(st.n - 1, -1, -1):
        if xb[q] and zb[q]:
            st._h(q)
            st._sg(q)
        elif xb[q]:
            st._h(q)


cdef int _conj_sign(const u8* xb, const u8* zb, int n, int k, int* q0_out) except? -9:
    cdef int ov = _conj_info(xb, zb, n, q0_out)
    if q0_out[0] < 0:
        raise ValueError("cannot measure a scalar operator")
    cdef int phase_k = (k - ov) % 4
    if phase_k < 0:
        phase_k += 4
    if phase_k & 1:
        raise ValueError("operator is not Hermitian")
    return 1 if phase_k == 0 else -1


def pauli_expect(CHState state, const u8[::1] xb, const u8[::1] zb, int k):
    """<P> of a Hermitian Pauli on a stabilizer state: +1, -1 or 0."""
    cdef int q0
    cdef int sign = _conj_sign(&xb[0], &zb[0], state.n, k, &q0)
    _conj_fwd(state, &xb[0], &zb[0], q0)
    cdef int o = state._z_outcome(q0)
    _conj_bwd(state, &xb[0], &zb[0], q0)
    if o < 0:
        return 0
    return sign if o == 0 else -sign


def project_pauli(CHState state, const u8[::1] xb, const u8[::1] zb, int k,
                  int target_sign):
    """Project onto the target_sign eigenspace of P, renormalizing."""
    cdef int q0
    cdef int sign = _conj_sign(&xb[0], &zb[0], state.n, k, &q0)
    _conj_fwd(state, &xb[0], &zb[0], q0)
    cdef int bit = 0 if sign == target_sign else 1
    cdef int o = state._z_outcome(q0)
    cdef double q
    if o < 0:
        q = 0.5
    else:
        q = 1.0 if o == bit else 0.0
    if q > 0.0:
        state._project_z(q0, bit)
        _conj_bwd(state, &xb[0], &zb[0], q0)
    else:
        state.omega = 0.0 + 0.0j
    return q


cdef double _next(bitgen_t* bg) nogil:
    return bg.next_double(bg.state)


cdef bitgen_t* _bitgen(object rng) except NULL:
    """Raw generator pointer from a numpy Generator (same stream as .random())."""
    capsule = rng.bit_generator.capsule
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef (int, double) _measure_pair(CHState ket, CHState bra, const u8* xb,
                                 const u8* zb, int k, bitgen_t* bg) except *:
    cdef int q0
    cdef int sign = _conj_sign(xb, zb, ket.n, k, &q0)
    cdef int bit_plus = 0 if sign == 1 else 1

    _conj_fwd(ket, xb, zb, q0)
    cdef int oi = ket._z_outcome(q0)
    cdef double qpi = 0.5 if oi < 0 else (1.0 if oi == bit_plus else 0.0)
    cdef double qpj
    if bra is None:
        qpj = qpi
    else:
        _conj_fwd(bra, xb, zb, q0)
        oj = bra._z_outcome(q0)
        qpj = 0.5 if oj < 0 else (1.0 if oj == bit_plus else 0.0)

    cdef double a = sqrt(qpi * qpj)
    cdef double b = sqrt((1.0 - qpi) * (1.0 - qpj))
    cdef double w = a + b
    cdef bint plus
    if w == 0.0:
        _conj_bwd(ket, xb, zb, q0)
        if bra is not None:
            _conj_bwd(bra, xb, zb, q0)
        return 0, 0.0

    cdef double p_plus = a / w
    if p_plus >= 1.0:
        plus = True
    elif p_plus <= 0.0:
        plus = False
    else:
        plus = _next(bg) < p_plus

    cdef int bit = bit_plus if plus else 1 - bit_plus
    ket._project_z(q0, bit)
    _conj_bwd(ket, xb, zb, q0)
    if bra is not None:
        bra._project_z(q0, bit)
        _conj_bwd(bra, xb, zb, q0)
    return (0 if plus else 1), w


def measure_pauli_pair(CHState ket, bra, const u8[::1] xb, const u8[::1] zb,
                       int k, rng):
    """Joint ket/bra measurement; see the fallback kernel for the contract."""
    cdef bitgen_t* bg = _bitgen(rng)
    cdef CHState brc = None if bra is None else <CHState> bra
    out = _measure_pair(ket, brc, &xb[0], &zb[0], k, bg)
    return out[0], out[1]


# ---- inner products ----------------------------------------------------------


cdef int _norm_collect(CHState st, i32* oc, i32* oa, i32* ob) except -1:
    """Gauss-Jordan normalization to omega|0...0>, recording replayable ops."""
    cdef int n = st.n
    cdef int cnt = 0, j, i, pivot, step
    for j in range(n):
        if not st.G[j * n + j]:
            pivot = -1
            for i in range(j + 1, n):
                if st.G[i * n + j]:
                    pivot = i
                    break
            if pivot < 0:
                raise RuntimeError("singular Clifford-layer matrix")
            for step in range(3):
                if step == 1:
                    st._cx(j, pivot)
                    oc[cnt] = G_CX; oa[cnt] = j; ob[cnt] = pivot
                else:
                    st._cx(pivot, j)
                    oc[cnt] = G_CX; oa[cnt] = pivot; ob[cnt] = j
                cnt += 1
        for i in range(n):
            if i != j and st.G[i * n + j]:
                st._cx(j, i)
                oc[cnt] = G_CX; oa[cnt] = j; ob[cnt] = i
                cnt += 1
    for i in range(n):
        for j in range(i + 1, n):
            if st.M[i * n + j]:
                st._cz_right(i, j)
                oc[cnt] = G_CZ; oa[cnt] = i; ob[cnt] = j
                cnt += 1
    for j in range(n):
        if st.M[j * n + j]:
            st._s_right(j)
            oc[cnt] = G_S; oa[cnt] = j; ob[cnt] = 0
            cnt += 1
    for j in range(n):
        if st.v[j]:
            st._h(j)
            oc[cnt] = G_H; oa[cnt] = j; ob[cnt] = 0
            cnt += 1
    for j in range(n):
        if st.s[j]:
            st._x(j)
            oc[cnt] = G_X; oa[cnt] = j; ob[cnt] = 0
            cnt += 1
    return cnt


cdef void _replay(CHState st, const i32* oc, const i32* oa, const i32* ob,
                  int cnt) nogil:
    cdef int idx
    for idx in range(cnt):
        if oc[idx] == G_CX:
            st._cx(oa[idx], ob[idx])
        elif oc[idx] == G_CZ:
            st._cz(oa[idx], ob[idx])
        elif oc[idx] == G_S:
            st._sg(oa[idx])
        elif oc[idx] == G_H:
            st._h(oa[idx])
        elif oc[idx] == G_X:
            st._x(oa[idx])


cdef int _ops_cap(int n) nogil:
    return 2 * n * n + 8 * n + 16


def norm_ops(CHState state):
    """(ops, omega1) with ops replayable as left gates; mirrors the fallback."""
    cdef CHState st = state.copy()
    cdef int cap = _ops_cap(st.n)
    oc_arr = np.empty(cap, dtype=np.int32)
    oa_arr = np.empty(cap, dtype=np.int32)
    ob_arr = np.empty(cap, dtype=np.int32)
    cdef i32[::1] oc = oc_arr, oa = oa_arr, ob = ob_arr
    cdef int cnt = _norm_collect(st, &oc[0], &oa[0], &ob[0])
    ops = [(int(oc_arr[i]), int(oa_arr[i]), int(ob_arr[i])) for i in range(cnt)]
    return ops, complex(st.omega)


def inner_product(CHState bra, CHState ket):
    """<bra|ket> including global phase."""
    if bra.n != ket.n:
        raise ValueError("qubit counts differ")
    cdef CHState br = bra.copy()
    cdef int cap = _ops_cap(br.n)
    cdef i32* oc = <i32*> malloc(3 * cap * sizeof(i32))
    if oc == NULL:
        raise MemoryError()
    cdef i32* oa = oc + cap
    cdef i32* ob = oc + 2 * cap
    cdef int cnt
    cdef CHState kt
    try:
        cnt = _norm_collect(br, oc, oa, ob)
        kt = ket.copy()
        _replay(kt, oc, oa, ob, cnt)
        return complex(br.omega.conjugate() * kt._amplitude(0))
    finally:
        free(oc)


def pauli_inner_products(CHState bra, CHState ket, paulis):
    """<bra| P |ket> for each (xbits, zbits, k) triple, one bra pass."""
    if bra.n != ket.n:
        raise ValueError("qubit counts differ")
    cdef CHState br = bra.copy()
    cdef int cap = _ops_cap(br.n)
    cdef i32* oc = <i32*> malloc(3 * cap * sizeof(i32))
    if oc == NULL:
        raise MemoryError()
    cdef i32* oa = oc + cap
    cdef i32* ob = oc + 2 * cap
    out = np.empty(len(paulis), dtype=np.complex128)
    cdef double complex[::1] out_v = out
    cdef int cnt, idx = 0
    cdef CHState kt
    cdef const u8[::1] xb, zb
    try:
        cnt = _norm_collect(br, oc, oa, ob)
        for xb_o, zb_o, k in paulis:
            xb = xb_o
            zb = zb_o
            kt = ket.copy()
            kt._pauli(&xb[0], &zb[0], <int> k)
            _replay(kt, oc, oa, ob, cnt)
            out_v[idx] = br.omega.conjugate() * kt._amplitude(0)
            idx += 1
        return out
    finally:
        free(oc)


# ---- compiled whole-shot executor --------------------------------------------


def run_shot_compiled(compiled, obs, rng):
    """Execute one shot from flat tables; returns the ShotResult fields.

    Consumes uniforms in the same order as the reference executor in
    ``cliffmc.engine``.
    """
    cdef bitgen_t* bg = _bitgen(rng)
    flat = compiled.flat_tables()
    cdef i64[:, ::1] events = compiled.events
    cdef u8[:, ::1] pauli_x = compiled.pauli_x
    cdef u8[:, ::1] pauli_z = compiled.pauli_z
    cdef i64[::1] pauli_k = compiled.pauli_k
    cdef i64[::1] kraus_off = flat["kraus_off"]
    cdef i64[::1] kraus_cnt = flat["kraus_cnt"]
    cdef double[::1] kraus_cum = flat["kraus_cum"]
    cdef double[::1] one_norm_sq = flat["one_norm_sq"]
    cdef i64[::1] term_off = flat["term_off"]
    cdef i64[::1] term_cnt = flat["term_cnt"]
    cdef double[::1] term_cum = flat["term_cum"]
    cdef double complex[::1] term_phase = flat["term_phase"]
    cdef i64[::1] gate_off = flat["gate_off"]
    cdef i64[::1] gate_cnt = flat["gate_cnt"]
    cdef i32[::1] gate_codes = flat["gate_codes"]
    cdef i32[:, ::1] gate_qubits = flat["gate_qubits"]

    cdef int n = compiled.n
    cdef bint collapsed = compiled.all_stochastic
    cdef CHState ket = CHState(n)
    cdef CHState bra = None if collapsed else CHState(n)
    record = np.zeros(compiled.n_slots, dtype=np.uint8)
    cdef u8[::1] rec = record
    cdef double complex weight = 1.0 + 0.0j
    cdef double abs_weight = 1.0

    cdef Py_ssize_t row
    cdef int ev_type, a, b, pre, c_idx
    cdef long koff, g, toff, goff
    cdef int kc, tc, r, ti, tj, gidx, sign
    cdef double u, w
    cdef int bit
    cdef bint aborted = False

    for row in range(events.shape[0]):
        ev_type = <int> events[row, 0]
        a = <int> events[row, 1]
        b = <int> events[row, 2]
        pre = <int> events[row, 3]

        if ev_type == EV_UNITARY or pre >= 0:
            c_idx = a if ev_type == EV_UNITARY else pre
            koff = kraus_off[c_idx]
            kc = <int> kraus_cnt[c_idx]
            r = 0
            if kc > 1:
                u = _next(bg)
                while r < kc - 1 and u >= kraus_cum[koff + r]:
                    r += 1
            g = koff + r
            toff = term_off[g]
            tc = <int> term_cnt[g]
            ti = 0
            tj = 0
            if tc > 1:
                u = _next(bg)
                while ti < tc - 1 and u >= term_cum[toff + ti]:
                    ti += 1
                if not collapsed:
                    u = _next(bg)
                    while tj < tc - 1 and u >= term_cum[toff + tj]:
                        tj += 1
            goff = gate_off[toff + ti]
            for gidx in range(<int> gate_cnt[toff + ti]):
                ket._gate(gate_codes[goff + gidx], gate_qubits[goff + gidx, 0],
                          gate_qubits[goff + gidx, 1])
            if collapsed:
                weight = weight * one_norm_sq[g]
            else:
                goff = gate_off[toff + tj]
                for gidx in range(<int> gate_cnt[toff + tj]):
                    bra._gate(gate_codes[goff + gidx], gate_qubits[goff + gidx, 0],
                              gate_qubits[goff + gidx, 1])
                weight = weight * (one_norm_sq[g] * term_phase[toff + ti]
                                   * term_phase[toff + tj].conjugate())
            abs_weight *= one_norm_sq[g]
            if ev_type == EV_UNITARY:
                continue

        if ev_type == EV_APPLY:
            ket._pauli(&pauli_x[a, 0], &pauli_z[a, 0], <int> pauli_k[a])
            if bra is not None:
                bra._pauli(&pauli_x[a, 0], &pauli_z[a, 0], <int> pauli_k[a])
            continue
        if ev_type == EV_PROJECT:
            sign = 1 if b == 0 else -1
            if project_pauli(ket, pauli_x[a], pauli_z[a], <int> pauli_k[a], sign) == 0.0:
                raise RuntimeError("preparation projection hit a zero-probability branch")
            if bra is not None:
                project_pauli(bra, pauli_x[a], pauli_z[a], <int> pauli_k[a], sign)
            continue

        # measure / reset
        bit, w = _measure_pair(ket, bra, &pauli_x[a, 0], &pauli_z[a, 0],
                               <int> pauli_k[a], bg)
        if w == 0.0:
            aborted = True
            break
        weight = weight * w
        abs_weight *= w
        if ev_type == EV_MEASURE:
            rec[b] = <u8> bit
        elif bit == 1:
            ket._pauli(&pauli_x[b, 0], &pauli_z[b, 0], <int> pauli_k[b])
            if bra is not None:
                bra._pauli(&pauli_x[b, 0], &pauli_z[b, 0], <int> pauli_k[b])

    if aborted:
        return 0.0 + 0.0j, record, None, True, 0.0

    cdef const u8[::1] xb, zb
    inner = np.empty(len(obs), dtype=np.complex128)
    cdef double complex[::1] inner_v = inner
    cdef int idx = 0
    if collapsed:
        for xb_o, zb_o, k in obs:
            xb = xb_o
            zb = zb_o
            inner_v[idx] = <double> pauli_expect(ket, xb, zb, <int> k)
            idx += 1
    else:
        inner = pauli_inner_products(bra, ket, obs)
    return complex(weight), record, inner, False, abs_weight
