"""Noisy gates as probability mixtures of Clifford superpositions.

Every channel is stored as a double decomposition: a probability
distribution over Kraus terms, each Kraus operator expanded as a weighted
sum of Clifford gate sequences.  Kraus operators follow the normalization
Tr(K^dag K) = 2^k on k qubits, which makes the mixture probabilities
unique.  Samplers draw (kraus, ket-term, bra-term) triples whose weighted
average reproduces the channel exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .pauli import CliffordGate, encode_gates

# exp(-i pi/4) * sqrt(2), written out to keep the branch deterministic
_SQRT_MINUS_2I = complex(1.0, -1.0)

_PAULI_1Q = ("X", "Y", "Z")


@dataclass(frozen=True)
class CliffordTerm:
    """One weighted Clifford gate sequence inside a Kraus expansion."""

    coefficient: complex
    gates: tuple[CliffordGate, ...]


@dataclass
class KrausTerm:
    """A Kraus operator K = sum_i alpha_i C_i with its sampling tables."""

    probability: float
    terms: tuple[CliffordTerm, ...]
    one_norm: float = field(init=False)

    def __post_init__(self):
        if not self.terms:
            raise ValueError("a Kraus term needs at least one Clifford term")
        self.one_norm = float(sum(abs(t.coefficient) for t in self.terms))
        if self.one_norm <= 0.0:
            raise ValueError("one-norm must be positive")


@dataclass
class ChannelDecomposition:
    """A k-qubit channel as a mixture of Clifford-superposition Kraus terms.

    Qubit indices inside the gate sequences are channel-local (0..k-1);
    circuits remap them onto physical qubits when events are built.
    """

    arity: int
    kraus_terms: tuple[KrausTerm, ...]
    kind: str = "unitary-mixture"  # unitary-mixture | coherent | measure | reset

    def __post_init__(self):
        total = sum(kt.probability for kt in self.kraus_terms)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"Kraus probabilities sum to {total}, not 1")

    @property
    def is_stochastic(self) -> bool:
        """True when every Kraus term is a single Clifford of unit weight."""
        return all(
            len(kt.terms) == 1 and abs(abs(kt.terms[0].coefficient) - 1.0) < 1e-12
            for kt in self.kraus_terms
        )

    @property
    def is_trivial(self) -> bool:
        """Single deterministic Clifford term (a noiseless gate)."""
        return len(self.kraus_terms) == 1 and len(self.kraus_terms[0].terms) == 1


@dataclass(frozen=True)
class SampledGateTerm:
    """One sampled (kraus, ket-Clifford, bra-Clifford) triple with its weight."""

    kraus_index: int
    ket_index: int
    bra_index: int
    weight: complex


def _single(gates: tuple[CliffordGate, ...], coeff: complex = 1.0) -> tuple[CliffordTerm, ...]:
    return (CliffordTerm(coeff, gates),)


def identity_channel(arity: int = 1) -> ChannelDecomposition:
    return ChannelDecomposition(arity, (KrausTerm(1.0, _single(())),))


def clifford_channel(*gates: CliffordGate, arity: int = 1) -> ChannelDecomposition:
    """Noiseless gate wrapped as a single-term channel."""
    return ChannelDecomposition(arity, (KrausTerm(1.0, _single(tuple(gates))),))


def reduce_z_angle(theta: float) -> tuple[float, int]:
    """Reduce a Z-rotation angle to [-pi/4, pi/4] plus k quarter turns.

    Z(theta) = e^{-i k pi/4} S^k Z(residual) with k in {0,1,2,3}.
    """
    theta = math.fmod(theta, 2.0 * math.pi)
    if theta < 0.0:
        theta += 2.0 * math.pi
    k = int(round(theta / (math.pi / 2.0)))
    residual = theta - k * (math.pi / 2.0)
    return residual, k % 4


def dephasing_channel(theta: float) -> ChannelDecomposition:
    """Coherent Z(theta) = exp(-i theta Z / 2) as an optimal Clifford sum.

    On the reduced angle phi in [0, pi/4] the expansion is
    (cos(phi/2) - sin(phi/2)) I + sqrt(-2i) sin(phi/2) S, with extracted
    quarter turns prepended as S factors and their phase folded into the
    coefficients.  Negative residuals use the conjugate expansion with an
    S-dagger factor.
    """
    if not math.isfinite(theta):
        raise ValueError("theta must be finite")
    phi, k = reduce_z_angle(theta)
    quarter_phase = np.exp(-0.25j * math.pi * k)
    base = tuple(CliffordGate("S", (0,)) for _ in range(k))

    c = math.cos(abs(phi) / 2.0)
    s = math.sin(abs(phi) / 2.0)
    terms = []
    if c - s > 1e-15:
        terms.append(CliffordTerm(quarter_phase * (c - s), base))
    if s > 1e-15:
        if phi >= 0.0:
            coeff = quarter_phase * _SQRT_MINUS_2I * s
            gates = base + (CliffordGate("S", (0,)),)
        else:
            coeff = quarter_phase * np.conj(_SQRT_MINUS_2I) * s
            gates = base + (CliffordGate("SDG", (0,)),)
        terms.append(CliffordTerm(coeff, gates))
    if not terms:
        terms.append(CliffordTerm(quarter_phase, base))
    return ChannelDecomposition(1, (KrausTerm(1.0, tuple(terms)),), kind="coherent")


def twirled_dephasing(theta: float) -> ChannelDecomposition:
    """Pauli twirl of Z(theta): a Z flip with probability sin^2(theta/2)."""
    if not math.isfinite(theta):
        raise ValueError("theta must be finite")
    p_z = math.sin(theta / 2.0) ** 2
    kraus = []
    if p_z < 1.0:
        kraus.append(KrausTerm(1.0 - p_z, _single(())))
    if p_z > 0.0:
        kraus.append(KrausTerm(p_z, _single((CliffordGate("Z", (0,)),))))
    return ChannelDecomposition(1, tuple(kraus))


def depolarizing(p: float, arity: int = 1) -> ChannelDecomposition:
    """Uniform non-identity Pauli mixture with total fault probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("probability out of range")
    if arity == 1:
        labels = [(a,) for a in _PAULI_1Q]
    elif arity == 2:
        labels = [
            (a, b)
            for a in ("I",) + _PAULI_1Q
            for b in ("I",) + _PAULI_1Q
            if not (a == "I" and b == "I")
        ]
    else:
        raise ValueError("depolarizing supports arity 1 or 2")

    kraus = []
    if p < 1.0:
        kraus.append(KrausTerm(1.0 - p, _single(())))
    if p > 0.0:
        share = p / len(labels)
        for label in labels:
            gates = tuple(
                CliffordGate(axis, (q,)) for q, axis in enumerate(label) if axis != "I"
            )
            kraus.append(KrausTerm(share, _single(gates)))
    return ChannelDecomposition(arity, tuple(kraus))


def bitflip(p: float) -> ChannelDecomposition:
    """X with probability p, identity otherwise."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("probability out of range")
    kraus = []
    if p < 1.0:
        kraus.append(KrausTerm(1.0 - p, _single(())))
    if p > 0.0:
        kraus.append(KrausTerm(p, _single((CliffordGate("X", (0,)),))))
    return ChannelDecomposition(1, tuple(kraus))


def clifford_extent_sq4(channel: ChannelDecomposition) -> float:
    """<||alpha||_1^4> over the Kraus mixture; minus 1 this is the gate's eta."""
    if channel.kind not in ("unitary-mixture", "coherent"):
        raise ValueError("extent is defined for unitary-mixture/coherent channels")
    return float(sum(kt.probability * kt.one_norm**4 for kt in channel.kraus_terms))


class CompiledChannel:
    """Sampling tables for one channel bound to physical qubit indices."""

    __slots__ = (
        "channel", "kraus_cum", "term_cum", "unit_phases", "one_norm_sq",
        "encoded", "n_kraus", "stochastic", "trivial",
    )

    def __init__(self, channel: ChannelDecomposition, qubits: tuple[int, ...], n: int):
        if len(qubits) != channel.arity:
            raise ValueError("qubit tuple does not match channel arity")
        self.channel = channel
        self.n_kraus = len(channel.kraus_terms)
        self.stochastic = channel.is_stochastic
        self.trivial = channel.is_trivial
        self.kraus_cum = np.cumsum([kt.probability for kt in channel.kraus_terms])
        self.kraus_cum[-1] = 1.0
        self.term_cum = []
        self.unit_phases = []
        self.one_norm_sq = np.array(
            [kt.one_norm**2 for kt in channel.kraus_terms], dtype=np.float64
        )
        self.encoded = []
        for kt in channel.kraus_terms:
            mags = np.array([abs(t.coefficient) for t in kt.terms], dtype=np.float64)
            cum = np.cumsum(mags / kt.one_norm)
            cum[-1] = 1.0
            self.term_cum.append(cum)
            self.unit_phases.append(
                np.array([t.coefficient / abs(t.coefficient) for t in kt.terms],
                         dtype=np.complex128)
            )
            encs = []
            for t in kt.terms:
                mapped = [
                    CliffordGate(g.kind, tuple(qubits[q] for q in g.qubits))
                    for g in t.gates
                ]
                encs.append(encode_gates(mapped, n))
            self.encoded.append(encs)

    def sample_indices(self, rng) -> tuple[int, int, int]:
        """Draw (r, i, j); consumes uniforms only for non-singleton choices."""
        r = 0
        if self.n_kraus > 1:
            r = int(np.searchsorted(self.kraus_cum, rng.random(), side="right"))
            r = min(r, self.n_kraus - 1)
        cum = self.term_cum[r]
        if len(cum) > 1:
            i = min(int(np.searchsorted(cum, rng.random(), side="right")), len(cum) - 1)
            j = min(int(np.searchsorted(cum, rng.random(), side="right")), len(cum) - 1)
        else:
            i = j = 0
        return r, i, j

    def sample_indices_collapsed(self, rng) -> tuple[int, int]:
        """Stochastic-mode draw with the bra tied to the ket (i = j)."""
        r = 0
        if self.n_kraus > 1:
            r = int(np.searchsorted(self.kraus_cum, rng.random(), side="right"))
            r = min(r, self.n_kraus - 1)
        return r, 0

    def weight(self, r: int, i: int, j: int) -> complex:
        phases = self.unit_phases[r]
        return self.one_norm_sq[r] * phases[i] * np.conj(phases[j])


def sample_term(channel: ChannelDecomposition, rng,
                qubits: tuple[int, ...] | None = None) -> SampledGateTerm:
    """Draw one SampledGateTerm from the product-form optimal distribution."""
    if channel.kind in ("measure", "reset"):
        raise ValueError("measure/reset channels are sampled by the engine")
    if qubits is None:
        qubits = tuple(range(channel.arity))
    compiled = CompiledChannel(channel, qubits, max(qubits) + 1)
    r, i, j = compiled.sample_indices(rng)
    return SampledGateTerm(r, i, j, compiled.weight(r, i, j))
