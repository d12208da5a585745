"""Shot execution: sampled Clifford circuit pairs with complex weights.

One shot draws a (kraus, ket-Clifford, bra-Clifford) triple per noisy gate,
simulates the two Clifford circuits with exact phases, handles mid-circuit
measurements and resets through joint state-dependent branching, and ends
with the inner products <sigma_j| P |sigma_i> per observable.

Circuits are compiled once into flat sampling/gate tables; the compiled
kernel executes whole shots from those tables, and `_run_shot_python`
is the reference executor used by the fallback backend.  Both consume the
random stream identically (see the kernel module docstring).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import chform
from .channels import ChannelDecomposition, CompiledChannel, clifford_extent_sq4
from .chform import CHState, kernel
from .pauli import PauliOperator

EV_UNITARY = 0
EV_MEASURE = 1
EV_RESET = 2
EV_PROJECT = 3  # noiseless post-selected projection (state preparation only)
EV_APPLY = 4    # noiseless Pauli application (state preparation only)


@dataclass(frozen=True)
class UnitaryEvent:
    channel: ChannelDecomposition
    qubits: tuple[int, ...]


@dataclass(frozen=True)
class MeasureEvent:
    pauli: PauliOperator
    slot: int
    pre_channel: UnitaryEvent | None = None


@dataclass(frozen=True)
class ResetEvent:
    pauli: PauliOperator
    flip: PauliOperator
    pre_channel: UnitaryEvent | None = None


@dataclass(frozen=True)
class ProjectEvent:
    pauli: PauliOperator
    sign: int


@dataclass(frozen=True)
class PauliEvent:
    pauli: PauliOperator


Event = UnitaryEvent | MeasureEvent | ResetEvent | ProjectEvent | PauliEvent


@dataclass
class NoisyCircuit:
    """Ordered noisy events on n qubits with dense, unique record slots."""

    n: int
    events: list[Event] = field(default_factory=list)

    def __post_init__(self):
        self._compiled = None

    def add(self, event: Event) -> None:
        self.events.append(event)
        self._compiled = None

    @property
    def n_slots(self) -> int:
        slots = [e.slot for e in self.events if isinstance(e, MeasureEvent)]
        return max(slots) + 1 if slots else 0

    @property
    def all_stochastic(self) -> bool:
        for ev in self.events:
            pres = []
            if isinstance(ev, UnitaryEvent):
                pres.append(ev)
            elif isinstance(ev, (MeasureEvent, ResetEvent)) and ev.pre_channel is not None:
                pres.append(ev.pre_channel)
            for u in pres:
                if not u.channel.is_stochastic:
                    return False
        return True

    def validate(self) -> None:
        slots = [e.slot for e in self.events if isinstance(e, MeasureEvent)]
        if sorted(slots) != list(range(len(slots))):
            raise ValueError("record slots must be dense and unique")
        for ev in self.events:
            if isinstance(ev, ResetEvent):
                if ev.flip.commutes_with(ev.pauli):
                    raise ValueError("reset flip operator must anticommute with P")

    def compiled(self) -> "CompiledCircuit":
        if self._compiled is None:
            self._compiled = CompiledCircuit(self)
        return self._compiled


class CompiledCircuit:
    """Flat sampling and gate tables for fast repeated shot execution."""

    def __init__(self, circuit: NoisyCircuit):
        circuit.validate()
        self.n = circuit.n
        self.n_slots = circuit.n_slots
        self.all_stochastic = circuit.all_stochastic

        channels: list[CompiledChannel] = []
        channel_qubits: list[tuple[int, ...]] = []
        paulis: list[PauliOperator] = []
        ev_rows: list[tuple[int, int, int, int]] = []

        def add_channel(u: UnitaryEvent) -> int:
            channels.append(CompiledChannel(u.channel, u.qubits, circuit.n))
            channel_qubits.append(u.qubits)
            return len(channels) - 1

        def add_pauli(p: PauliOperator) -> int:
            if not p.is_hermitian():
                raise ValueError(f"{p.label()} is not Hermitian")
            paulis.append(p)
            return len(paulis) - 1

        for ev in circuit.events:
            if isinstance(ev, UnitaryEvent):
                ev_rows.append((EV_UNITARY, add_channel(ev), -1, -1))
            elif isinstance(ev, MeasureEvent):
                pre = -1 if ev.pre_channel is None else add_channel(ev.pre_channel)
                ev_rows.append((EV_MEASURE, add_pauli(ev.pauli), ev.slot, pre))
            elif isinstance(ev, ResetEvent):
                pre = -1 if ev.pre_channel is None else add_channel(ev.pre_channel)
                flip = add_pauli(ev.flip)
                ev_rows.append((EV_RESET, add_pauli(ev.pauli), flip, pre))
            elif isinstance(ev, ProjectEvent):
                if ev.sign not in (1, -1):
                    raise ValueError("projection sign must be +1 or -1")
                ev_rows.append((EV_PROJECT, add_pauli(ev.pauli), 0 if ev.sign == 1 else 1, -1))
            elif isinstance(ev, PauliEvent):
                ev_rows.append((EV_APPLY, add_pauli(ev.pauli), -1, -1))
            else:
                raise TypeError(f"unknown event {ev!r}")

        self.channels = channels
        self.channel_qubits = channel_qubits
        self.paulis = paulis
        self.events = np.array(ev_rows, dtype=np.int64).reshape(len(ev_rows), 4)
        self.pauli_x = (
            np.vstack([p.x for p in paulis])
            if paulis else np.zeros((0, circuit.n), dtype=np.uint8)
        )
        self.pauli_z = (
            np.vstack([p.z for p in paulis])
            if paulis else np.zeros((0, circuit.n), dtype=np.uint8)
        )
        self.pauli_k = np.array([p.k for p in paulis], dtype=np.int64)
        self._flat = None

    def flat_tables(self):
        """Ragged-array encoding consumed by the compiled executor."""
        if self._flat is not None:
            return self._flat
        kraus_off, kraus_cnt = [], []
        kraus_cum, one_norm_sq = [], []
        term_off, term_cnt = [], []
        term_cum, term_phase = [], []
        gate_off, gate_cnt = [], []
        gate_codes, gate_qubits = [], []
        for ch in self.channels:
            kraus_off.append(len(kraus_cum))
            kraus_cnt.append(ch.n_kraus)
            kraus_cum.extend(ch.kraus_cum.tolist())
            one_norm_sq.extend(ch.one_norm_sq.tolist())
            for r in range(ch.n_kraus):
                term_off.append(len(term_cum))
                term_cnt.append(len(ch.term_cum[r]))
                term_cum.extend(ch.term_cum[r].tolist())
                term_phase.extend(ch.unit_phases[r].tolist())
                for codes, qubits in ch.encoded[r]:
                    gate_off.append(len(gate_codes))
                    gate_cnt.append(len(codes))
                    gate_codes.extend(codes.tolist())
                    gate_qubits.extend(qubits.tolist())
        self._flat = {
            "kraus_off": np.array(kraus_off, dtype=np.int64),
            "kraus_cnt": np.array(kraus_cnt, dtype=np.int64),
            "kraus_cum": np.array(kraus_cum, dtype=np.float64),
            "one_norm_sq": np.array(one_norm_sq, dtype=np.float64),
            "term_off": np.array(term_off, dtype=np.int64),
            "term_cnt": np.array(term_cnt, dtype=np.int64),
            "term_cum": np.array(term_cum, dtype=np.float64),
            "term_phase": np.array(term_phase, dtype=np.complex128),
            "gate_off": np.array(gate_off, dtype=np.int64),
            "gate_cnt": np.array(gate_cnt, dtype=np.int64),
            "gate_codes": np.array(gate_codes, dtype=np.int32),
            "gate_qubits": np.array(gate_qubits, dtype=np.int32).reshape(-1, 2),
        }
        return self._flat


@dataclass
class ShotResult:
    weight: complex
    record: np.ndarray
    inner: np.ndarray | None
    aborted: bool
    abs_weight: float = 0.0  # product of per-gate |w| factors, for diagnostics


def run_shot(circuit: NoisyCircuit | CompiledCircuit,
             observables: list[PauliOperator], rng) -> ShotResult:
    """Execute one shot and return weight, record and per-observable inner products."""
    compiled = circuit.compiled() if isinstance(circuit, NoisyCircuit) else circuit
    for p in observables:
        if p.n != compiled.n or not p.is_hermitian():
            raise ValueError("observables must be Hermitian on the circuit qubits")
    obs = [(p.x, p.z, p.k) for p in observables]
    if hasattr(kernel, "run_shot_compiled"):
        weight, record, inner, aborted, abs_weight = kernel.run_shot_compiled(
            compiled, obs, rng
        )
        return ShotResult(weight, record, inner, aborted, abs_weight)
    return _run_shot_python(compiled, obs, rng)


def _run_shot_python(compiled: CompiledCircuit, obs, rng) -> ShotResult:
    n = compiled.n
    collapsed = compiled.all_stochastic
    ket = CHState(n)
    bra = None if collapsed else CHState(n)
    record = np.zeros(compiled.n_slots, dtype=np.uint8)
    weight = 1.0 + 0.0j
    abs_weight = 1.0

    def apply_unitary(idx: int):
        nonlocal weight, abs_weight
        ch = compiled.channels[idx]
        if collapsed:
            r, i = ch.sample_indices_collapsed(rng)
            ket.apply_gates(*ch.encoded[r][i])
            weight *= ch.one_norm_sq[r]
            abs_weight *= ch.one_norm_sq[r]
        else:
            r, i, j = ch.sample_indices(rng)
            ket.apply_gates(*ch.encoded[r][i])
            bra.apply_gates(*ch.encoded[r][j])
            weight *= ch.weight(r, i, j)
            abs_weight *= ch.one_norm_sq[r]

    for row in compiled.events:
        ev_type, a, b, pre = int(row[0]), int(row[1]), int(row[2]), int(row[3])
        if ev_type == EV_UNITARY:
            apply_unitary(a)
            continue
        if ev_type == EV_APPLY:
            px, pz, pk = compiled.pauli_x[a], compiled.pauli_z[a], int(compiled.pauli_k[a])
            ket.pauli(px, pz, pk)
            if bra is not None:
                bra.pauli(px, pz, pk)
            continue
        if ev_type == EV_PROJECT:
            px, pz, pk = compiled.pauli_x[a], compiled.pauli_z[a], int(compiled.pauli_k[a])
            sign = 1 if b == 0 else -1
            if kernel.project_pauli(ket, px, pz, pk, sign) == 0.0:
                raise RuntimeError("preparation projection hit a zero-probability branch")
            if bra is not None:
                kernel.project_pauli(bra, px, pz, pk, sign)
            continue
        if pre >= 0:
            apply_unitary(pre)
        xb, zb, k = compiled.pauli_x[a], compiled.pauli_z[a], int(compiled.pauli_k[a])
        bit, w = kernel.measure_pauli_pair(ket, bra, xb, zb, k, rng)
        if w == 0.0:
            return ShotResult(0.0 + 0.0j, record, None, True, 0.0)
        weight *= w
        abs_weight *= w
        if ev_type == EV_MEASURE:
            record[b] = bit
        elif bit == 1:  # reset saw the -1 branch: flip both states back
            fx, fz, fk = compiled.pauli_x[b], compiled.pauli_z[b], int(compiled.pauli_k[b])
            ket.pauli(fx, fz, fk)
            if bra is not None:
                bra.pauli(fx, fz, fk)

    if collapsed:
        inner = np.array(
            [float(kernel.pauli_expect(ket, xb, zb, k)) for xb, zb, k in obs],
            dtype=np.complex128,
        )
    else:
        inner = kernel.pauli_inner_products(bra, ket, obs)
    return ShotResult(weight, record, inner, False, abs_weight)


def measure_pauli(ket: CHState, bra: CHState, p: PauliOperator, rng):
    """Joint measurement of Hermitian P on a ket/bra pair (in place).

    Returns (outcome_bit, weight_factor): bit 0 encodes the +1 outcome and
    weight 0 signals an aborted shot.  Both states are projected onto the
    sampled branch and renormalized.
    """
    if not p.is_hermitian():
        raise ValueError(f"{p.label()} is not Hermitian")
    return kernel.measure_pauli_pair(ket, bra, p.x, p.z, p.k, rng)


def reset_pauli(ket: CHState, bra: CHState, p: PauliOperator, q: PauliOperator, rng):
    """Reset the eigenvalue of P to +1 on both states; returns the weight factor."""
    if q.commutes_with(p):
        raise ValueError("flip operator must anticommute with P")
    bit, w = measure_pauli(ket, bra, p, rng)
    if w != 0.0 and bit == 1:
        ket.pauli(q.x, q.z, q.k)
        if bra is not None:
            bra.pauli(q.x, q.z, q.k)
    return w


class EstimateAccumulator:
    """Streaming per-observable mean/variance over complex shot contributions.

    Merging two accumulators equals accumulating the union of their shots.
    """

    def __init__(self, n_observables: int, ids: list | None = None):
        self.ids = list(ids) if ids is not None else list(range(n_observables))
        if len(self.ids) != n_observables:
            raise ValueError("ids length must match observable count")
        self.sum = np.zeros(n_observables, dtype=np.complex128)
        self.sum_abs2 = np.zeros(n_observables, dtype=np.float64)
        self.count = 0

    def add(self, contributions: np.ndarray) -> None:
        self.sum += contributions
        self.sum_abs2 += np.abs(contributions) ** 2
        self.count += 1

    def add_zero_shot(self) -> None:
        """Aborted shots are valid zero-valued samples and count toward N."""
        self.count += 1

    def merge(self, other: "EstimateAccumulator") -> None:
        if self.ids != other.ids:
            raise ValueError("accumulator observable ids differ")
        self.sum += other.sum
        self.sum_abs2 += other.sum_abs2
        self.count += other.count

    def estimate(self, observable_id) -> tuple[complex, float]:
        """(mean, stddev) where stddev uses the complex-modulus second moment."""
        if self.count < 2:
            raise ValueError("need at least two shots")
        idx = self.ids.index(observable_id)
        mean = self.sum[idx] / self.count
        var = max(0.0, self.sum_abs2[idx] / self.count - abs(mean) ** 2)
        return complex(mean), float(math.sqrt(var / self.count))


def shots_needed(target_epsilon: float, circuit: NoisyCircuit) -> int:
    """Shot count for stddev target_epsilon from the per-gate extent product."""
    if target_epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    prod = 1.0
    for ev in circuit.events:
        units = []
        if isinstance(ev, UnitaryEvent):
            units.append(ev)
        elif isinstance(ev, (MeasureEvent, ResetEvent)) and ev.pre_channel is not None:
            units.append(ev.pre_channel)
        for u in units:
            prod *= clifford_extent_sq4(u.channel)
    return int(math.ceil(prod / target_epsilon**2))
