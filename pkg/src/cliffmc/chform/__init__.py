"""Exact-global-phase stabilizer states and their update rules.

The heavy lifting lives in a kernel module with two interchangeable
implementations: a Cython extension (``_chcore``) and a pure-Python twin
(``_chcore_py``).  The compiled kernel is preferred; set the environment
variable ``CLIFFMC_PURE_PYTHON=1`` to force the fallback (used by the
backend-equivalence tests and the benchmark).
"""

from __future__ import annotations

import os

import numpy as np

from ..pauli import CliffordGate, PauliOperator, encode_gates

if os.environ.get("CLIFFMC_PURE_PYTHON") == "1":
    from . import _chcore_py as kernel

    BACKEND = "python"
else:
    try:
        from . import _chcore as kernel  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - build-environment dependent
        from . import _chcore_py as kernel

        BACKEND = "python"

CHState = kernel.CHState

DENSE_QUBIT_CAP = 12


def init_zero(n: int) -> CHState:
    """|0...0> on n >= 1 qubits with omega = 1."""
    return CHState(n)


def apply_clifford(state: CHState, gate: CliffordGate) -> CHState:
    """Return gate|state>, global phase included."""
    gate.validate(state.n)
    out = state.copy()
    codes, qubits = encode_gates([gate])
    out.apply_gates(codes, qubits)
    return out


def apply_pauli(state: CHState, p: PauliOperator) -> CHState:
    """Return P|state>, phase included."""
    if p.n != state.n:
        raise ValueError("operator/state qubit counts differ")
    out = state.copy()
    out.pauli(p.x, p.z, p.k)
    return out


def inner_product(bra: CHState, ket: CHState) -> complex:
    """<bra|ket> exactly (up to floating point)."""
    return kernel.inner_product(bra, ket)


def pauli_expectation(state: CHState, p: PauliOperator) -> int:
    """<P> of a Hermitian Pauli on a stabilizer state: always +1, -1 or 0."""
    _require_hermitian(p, state.n)
    return kernel.pauli_expect(state, p.x, p.z, p.k)


def projector_overlap(state: CHState, p: PauliOperator, sign: int) -> float:
    """<state| (I + sign*P)/2 |state>, a probability in {0, 1/2, 1}."""
    _require_hermitian(p, state.n)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    expect = kernel.pauli_expect(state, p.x, p.z, p.k)
    return (1.0 + sign * expect) / 2.0


def project(state: CHState, p: PauliOperator, sign: int) -> CHState:
    """Normalized projection onto the sign eigenspace of P."""
    _require_hermitian(p, state.n)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    out = state.copy()
    q = kernel.project_pauli(out, p.x, p.z, p.k, sign)
    if q == 0.0:
        raise ValueError("projection onto a zero-probability branch")
    return out


def to_dense(state: CHState, cap: int = DENSE_QUBIT_CAP) -> np.ndarray:
    """Full 2^n amplitude vector (qubit 0 = most significant bit)."""
    if state.n > cap:
        raise ValueError(f"n={state.n} exceeds dense cap {cap}")
    dim = 1 << state.n
    vec = np.empty(dim, dtype=np.complex128)
    for idx in range(dim):
        vec[idx] = state.amplitude(idx)
    return vec


def _require_hermitian(p: PauliOperator, n: int) -> None:
    if p.n != n:
        raise ValueError("operator/state qubit counts differ")
    if not p.is_hermitian():
        raise ValueError(f"operator {p.label()} is not Hermitian")
