"""Pauli operators and Clifford gates on n qubits.

A Pauli is stored in the symplectic convention ``i^k * X^x * Z^z`` where
``x`` and ``z`` are bit vectors and ``k in {0,1,2,3}`` encodes the phase
``i^k``.  A Y factor on one qubit is ``x=z=1`` together with one factor of
``i`` (since Y = i X Z).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PHASES = (1, 1j, -1, -1j)

# Gate opcodes shared with the stabilizer kernels.
GATE_H = 0
GATE_S = 1
GATE_SDG = 2
GATE_X = 3
GATE_Y = 4
GATE_Z = 5
GATE_CX = 6
GATE_CZ = 7
GATE_SWAP = 8

GATE_CODES = {
    "H": GATE_H,
    "S": GATE_S,
    "SDG": GATE_SDG,
    "X": GATE_X,
    "Y": GATE_Y,
    "Z": GATE_Z,
    "CX": GATE_CX,
    "CZ": GATE_CZ,
    "SWAP": GATE_SWAP,
}
GATE_NAMES = {code: name for name, code in GATE_CODES.items()}
GATE_ARITY = {
    GATE_H: 1, GATE_S: 1, GATE_SDG: 1, GATE_X: 1, GATE_Y: 1, GATE_Z: 1,
    GATE_CX: 2, GATE_CZ: 2, GATE_SWAP: 2,
}


@dataclass(frozen=True)
class CliffordGate:
    """One named Clifford gate acting on explicit qubit indices."""

    kind: str
    qubits: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in GATE_CODES:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        arity = GATE_ARITY[GATE_CODES[self.kind]]
        if len(self.qubits) != arity:
            raise ValueError(f"{self.kind} takes {arity} qubit(s), got {self.qubits}")
        if arity == 2 and self.qubits[0] == self.qubits[1]:
            raise ValueError(f"{self.kind} qubit indices must be distinct")

    @property
    def code(self) -> int:
        return GATE_CODES[self.kind]

    def validate(self, n: int) -> None:
        for q in self.qubits:
            if not 0 <= q < n:
                raise IndexError(f"qubit {q} out of range for n={n}")


def encode_gates(gates, n: int | None = None):
    """Pack a gate sequence into (codes, qubit-pair) arrays for the kernels."""
    codes = np.empty(len(gates), dtype=np.int32)
    qubits = np.zeros((len(gates), 2), dtype=np.int32)
    for idx, g in enumerate(gates):
        if n is not None:
            g.validate(n)
        codes[idx] = g.code
        qubits[idx, 0] = g.qubits[0]
        if len(g.qubits) > 1:
            qubits[idx, 1] = g.qubits[1]
    return codes, qubits


@dataclass
class PauliOperator:
    """n-qubit Pauli ``i^k X^x Z^z`` with explicit fourth-root-of-unity phase."""

    n: int
    x: np.ndarray
    z: np.ndarray
    k: int = 0

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=np.uint8)
        self.z = np.ascontiguousarray(self.z, dtype=np.uint8)
        if self.x.shape != (self.n,) or self.z.shape != (self.n,):
            raise ValueError("x/z bit vectors must have length n")
        self.k = int(self.k) % 4

    @classmethod
    def identity(cls, n: int) -> "PauliOperator":
        return cls(n, np.zeros(n, dtype=np.uint8), np.zeros(n, dtype=np.uint8))

    @classmethod
    def single(cls, n: int, qubit: int, axis: str) -> "PauliOperator":
        p = cls.identity(n)
        if axis == "X":
            p.x[qubit] = 1
        elif axis == "Z":
            p.z[qubit] = 1
        elif axis == "Y":
            p.x[qubit] = 1
            p.z[qubit] = 1
            p.k = 1
        else:
            raise ValueError(f"axis must be X, Y or Z, got {axis!r}")
        return p

    @classmethod
    def from_label(cls, label: str, phase: complex = 1) -> "PauliOperator":
        n = len(label)
        p = cls.identity(n)
        for q, ch in enumerate(label.upper()):
            if ch == "I":
                continue
            if ch in "XY":
                p.x[q] = 1
            if ch in "ZY":
                p.z[q] = 1
            if ch == "Y":
                p.k += 1
            if ch not in "XYZ":
                raise ValueError(f"invalid Pauli label character {ch!r}")
        p.k = (p.k + PHASES.index(complex(phase))) % 4
        return p

    @property
    def phase(self) -> complex:
        return PHASES[self.k]

    @property
    def weight(self) -> int:
        return int(np.count_nonzero(self.x | self.z))

    def is_hermitian(self) -> bool:
        overlap = int(np.count_nonzero(self.x & self.z))
        return (self.k - overlap) % 2 == 0

    def commutes_with(self, other: "PauliOperator") -> bool:
        sym = int(self.x @ other.z) + int(self.z @ other.x)
        return sym % 2 == 0

    def __mul__(self, other: "PauliOperator") -> "PauliOperator":
        if self.n != other.n:
            raise ValueError("qubit counts differ")
        # Moving Z^z1 past X^x2 picks up (-1)^(z1.x2).
        k = (self.k + other.k + 2 * int(self.z @ other.x)) % 4
        return PauliOperator(self.n, self.x ^ other.x, self.z ^ other.z, k)

    def scaled(self, phase: complex) -> "PauliOperator":
        return PauliOperator(self.n, self.x.copy(), self.z.copy(),
                             (self.k + PHASES.index(complex(phase))) % 4)

    def label(self) -> str:
        out = []
        k = self.k
        for xq, zq in zip(self.x, self.z):
            if xq and zq:
                out.append("Y")
                k -= 1
            elif xq:
                out.append("X")
            elif zq:
                out.append("Z")
            else:
                out.append("I")
        prefix = {0: "+", 1: "+i", 2: "-", 3: "-i"}[k % 4]
        return prefix + "".join(out)

    def __repr__(self):
        return f"PauliOperator({self.label()!r})"
