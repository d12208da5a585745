"""Logical process tomography: expectation tables, PTMs, diamond error.

The single-qubit logical channel is assembled from 12 estimated logical
Pauli expectations (4 input states x 3 observables), optionally forced to
be unital, filtered by the per-element acceptability rule, and scored by
its diamond distance from the identity channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

INPUT_STATES = ("0_L", "1_L", "+_L", "-_L")  # Z+1, Z-1, X+1, Y+1 eigenstates
OBSERVABLES = ("X_L", "Y_L", "Z_L")


@dataclass
class ExpectationTable:
    """Real parts of <P_L> per input state, with stddevs and shot counts."""

    mean: np.ndarray    # (4 states, 3 observables)
    stddev: np.ndarray  # same shape
    shots: np.ndarray   # same shape, int

    @classmethod
    def empty(cls) -> "ExpectationTable":
        return cls(np.zeros((4, 3)), np.zeros((4, 3)), np.zeros((4, 3), dtype=np.int64))

    def set(self, state: str, obs: str, mean: float, stddev: float, shots: int) -> None:
        i, j = INPUT_STATES.index(state), OBSERVABLES.index(obs)
        self.mean[i, j] = mean
        self.stddev[i, j] = stddev
        self.shots[i, j] = shots

    def get(self, state: str, obs: str) -> tuple[float, float, int]:
        i, j = INPUT_STATES.index(state), OBSERVABLES.index(obs)
        return float(self.mean[i, j]), float(self.stddev[i, j]), int(self.shots[i, j])

    def range_violations(self) -> list[tuple[str, str, float, float]]:
        """Entries with |mean| > 1 + 5 stddev (possible at high variance)."""
        out = []
        for i, state in enumerate(INPUT_STATES):
            for j, obs in enumerate(OBSERVABLES):
                if abs(self.mean[i, j]) > 1.0 + 5.0 * self.stddev[i, j]:
                    out.append((state, obs, float(self.mean[i, j]),
                                float(self.stddev[i, j])))
        return out

    def copy(self) -> "ExpectationTable":
        return ExpectationTable(self.mean.copy(), self.stddev.copy(), self.shots.copy())


@dataclass
class LogicalChannel:
    """4x4 real Pauli transfer matrix with per-element standard deviations."""

    ptm: np.ndarray
    stddev: np.ndarray
    provenance: dict = field(default_factory=dict)

    def copy(self) -> "LogicalChannel":
        return LogicalChannel(self.ptm.copy(), self.stddev.copy(),
                              dict(self.provenance))


def ptm_from_expectations(table: ExpectationTable,
                          provenance: dict | None = None) -> LogicalChannel:
    """Columns from the informationally complete input set; top row by trace
    preservation; element stddevs propagated as sums of |coefficient| * eps."""
    m, e = table.mean, table.stddev
    ptm = np.zeros((4, 4))
    eps = np.zeros((4, 4))
    ptm[0, 0] = 1.0
    for j in range(3):  # observable row j+1
        m0, m1, mp, mm = m[0, j], m[1, j], m[2, j], m[3, j]
        e0, e1, ep, em = e[0, j], e[1, j], e[2, j], e[3, j]
        ptm[j + 1, 0] = (m0 + m1) / 2.0
        ptm[j + 1, 1] = (2.0 * mp - m0 - m1) / 2.0
        ptm[j + 1, 2] = (2.0 * mm - m0 - m1) / 2.0
        ptm[j + 1, 3] = (m0 - m1) / 2.0
        eps[j + 1, 0] = (e0 + e1) / 2.0
        eps[j + 1, 1] = (2.0 * ep + e0 + e1) / 2.0
        eps[j + 1, 2] = (2.0 * em + e0 + e1) / 2.0
        eps[j + 1, 3] = (e0 + e1) / 2.0
    return LogicalChannel(ptm, eps, provenance or {})


def force_unital(obj):
    """<P>'_0 = (<P>_0 - <P>_1)/2, <P>'_1 = -<P>'_0, eps' averaged.

    Accepts an ExpectationTable or a LogicalChannel and returns the same
    kind; the forced channel's first column is (1, 0, 0, 0)^T.
    """
    if isinstance(obj, ExpectationTable):
        out = obj.copy()
        for j in range(3):
            m0, m1 = obj.mean[0, j], obj.mean[1, j]
            e0, e1 = obj.stddev[0, j], obj.stddev[1, j]
            out.mean[0, j] = (m0 - m1) / 2.0
            out.mean[1, j] = -out.mean[0, j]
            out.stddev[0, j] = out.stddev[1, j] = (e0 + e1) / 2.0
        return out
    if isinstance(obj, LogicalChannel):
        # reconstruct the implied table entries: m0 = N_{o,I} + N_{o,Z},
        # m1 = N_{o,I} - N_{o,Z}; the rule then shifts the X/Y columns by
        # the removed non-unitality and zeroes the first column.
        out = obj.copy()
        for j in range(3):
            n0 = obj.ptm[j + 1, 0]
            e0 = obj.stddev[j + 1, 0]
            out.ptm[j + 1, 0] = 0.0
            out.ptm[j + 1, 1] = obj.ptm[j + 1, 1] + n0
            out.ptm[j + 1, 2] = obj.ptm[j + 1, 2] + n0
            out.stddev[j + 1, 0] = e0
            out.stddev[j + 1, 1] = obj.stddev[j + 1, 1] - obj.stddev[j + 1, 0] + e0
            out.stddev[j + 1, 2] = obj.stddev[j + 1, 2] - obj.stddev[j + 1, 0] + e0
        out.ptm[0] = (1.0, 0.0, 0.0, 0.0)
        return out
    raise TypeError("force_unital takes an ExpectationTable or LogicalChannel")


ELEMENT_ERROR_CAP = 1.0e-5


def acceptability(channel: LogicalChannel) -> tuple[bool, np.ndarray]:
    """Per element: 2 eps <= N, or |N - I| <= 1e-5; accepted iff all pass."""
    identity = np.eye(4)
    cond_var = 2.0 * channel.stddev <= channel.ptm
    cond_err = np.abs(channel.ptm - identity) <= ELEMENT_ERROR_CAP
    flags = cond_var | cond_err
    return bool(flags.all()), flags


# ---- diamond error -------------------------------------------------------------

_PAULIS = (
    np.eye(2, dtype=np.complex128),
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.diag([1.0, -1.0]).astype(np.complex128),
)


def ptm_apply(ptm: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Action of a PTM on a single-qubit density matrix."""
    coeffs = np.array([np.trace(p @ rho) / 2.0 for p in _PAULIS])
    out_coeffs = ptm @ coeffs.real  # real PTM acting on real Pauli coordinates
    out = np.zeros((2, 2), dtype=np.complex128)
    for c, p in zip(out_coeffs, _PAULIS):
        out += c * p
    return out


def choi_matrix(ptm: np.ndarray) -> np.ndarray:
    """J = sum_ij E_ij (x) Phi(E_ij); identity maps to twice the maximally
    entangled projector."""
    j_mat = np.zeros((4, 4), dtype=np.complex128)
    for i in range(2):
        for jj in range(2):
            e = np.zeros((2, 2), dtype=np.complex128)
            e[i, jj] = 1.0
            out = _ptm_apply_op(ptm, e)
            j_mat[2 * i: 2 * i + 2, 2 * jj: 2 * jj + 2] = out
    return j_mat


def _ptm_apply_op(ptm: np.ndarray, op: np.ndarray) -> np.ndarray:
    coeffs = np.array([np.trace(p @ op) / 2.0 for p in _PAULIS])
    out_coeffs = ptm.astype(np.complex128) @ coeffs
    out = np.zeros((2, 2), dtype=np.complex128)
    for c, p in zip(out_coeffs, _PAULIS):
        out += c * p
    return out


def _sqrt_rho(bloch: np.ndarray) -> np.ndarray:
    rho = 0.5 * (_PAULIS[0] + bloch[0] * _PAULIS[1] + bloch[1] * _PAULIS[2]
                 + bloch[2] * _PAULIS[3])
    vals, vecs = np.linalg.eigh(rho)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def _diamond_objective(j_delta: np.ndarray, bloch: np.ndarray) -> float:
    r = float(np.linalg.norm(bloch))
    if r > 1.0:
        bloch = bloch / r
    sq = np.kron(_sqrt_rho(bloch), np.eye(2))
    mat = sq @ j_delta @ sq
    return float(np.sum(np.abs(np.linalg.eigvalsh(mat))))


def diamond_error(channel: LogicalChannel | np.ndarray, tol: float = 1e-8) -> float:
    """Diamond-norm distance of a trace-preserving real PTM from identity.

    Maximizes ||(sqrt(rho) (x) I) J_Delta (sqrt(rho) (x) I)||_1 over the
    Bloch ball by coarse grid plus local refinement.
    """
    ptm = channel.ptm if isinstance(channel, LogicalChannel) else np.asarray(channel)
    if ptm.shape != (4, 4) or not np.isrealobj(ptm):
        raise ValueError("PTM must be a real 4x4 matrix")
    if not np.allclose(ptm[0], (1.0, 0.0, 0.0, 0.0), atol=1e-9):
        raise ValueError("PTM must be trace preserving (top row (1,0,0,0))")
    j_delta = choi_matrix(ptm) - choi_matrix(np.eye(4))

    candidates = [np.zeros(3)]
    for radius in (0.5, 0.99):
        for u in range(6):
            for w in range(3):
                theta = np.pi * (w + 0.5) / 3.0
                phi = 2.0 * np.pi * u / 6.0
                candidates.append(radius * np.array([
                    np.sin(theta) * np.cos(phi),
                    np.sin(theta) * np.sin(phi),
                    np.cos(theta),
                ]))
    candidates.extend([np.array(a, dtype=float) for a in
                       ((0.99, 0, 0), (0, 0.99, 0), (0, 0, 0.99),
                        (-0.99, 0, 0), (0, -0.99, 0), (0, 0, -0.99))])

    best_val = -1.0
    best_pt = candidates[0]
    for pt in candidates:
        val = _diamond_objective(j_delta, pt)
        if val > best_val:
            best_val = val
            best_pt = pt

    res = minimize(
        lambda a: -_diamond_objective(j_delta, a),
        best_pt,
        method="Nelder-Mead",
        options={"xatol": tol, "fatol": tol, "maxiter": 2000},
    )
    return float(max(best_val, -res.fun))
