"""Rotated surface code patches and timed idle-cycle circuits.

The patch uses the standard rotated layout: d^2 data qubits on a grid,
weight-4 plaquettes in the bulk, weight-2 stabilizers on the boundary
(X type on top/bottom, Z type on left/right), one measure qubit per
stabilizer.  Idle circuits schedule d rounds of parallel syndrome
extraction plus one perfect round, with trapped-ion-style timings; noise
is bound afterwards from a NoiseModel, with coherent dephasing driven by
the per-qubit idle gaps the schedule produces.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .channels import (
    ChannelDecomposition,
    CliffordTerm,
    KrausTerm,
    bitflip,
    clifford_channel,
    dephasing_channel,
    depolarizing,
    twirled_dephasing,
)
from .engine import (
    MeasureEvent,
    NoisyCircuit,
    PauliEvent,
    ProjectEvent,
    ResetEvent,
    UnitaryEvent,
)
from .pauli import CliffordGate, PauliOperator

# durations in integer nanoseconds (floats drift when accumulating gaps)
INIT_NS = 10_000
MEAS_NS = 120_000
H_NS = 10_000
CX_NS = 2_000_000
MOVE_NS = 5_250
SLOT_NS = CX_NS + MOVE_NS

# stabilizer interaction patterns: relative (row, col) offsets of the four
# data-qubit roles NW, NE, SW, SE around a face
_ROLES = {"NW": (-1, -1), "NE": (-1, 0), "SW": (0, -1), "SE": (0, 0)}
X_PATTERN = ("NW", "NE", "SW", "SE")  # Z-shaped sweep
Z_PATTERN = ("NW", "SW", "NE", "SE")  # N-shaped sweep


@dataclass
class SurfaceCodePatch:
    distance: int
    data_coords: list[tuple[int, int]]
    measure_coords: list[tuple[float, float]]
    x_stabilizers: list[list[int]]  # data-qubit indices in schedule-slot order
    z_stabilizers: list[list[int]]
    x_slot_qubits: list[list[int | None]]  # per slot: data qubit or None (idle)
    z_slot_qubits: list[list[int | None]]
    logical_x: PauliOperator
    logical_z: PauliOperator
    pcm: np.ndarray  # (n_stab, d^2), X block rows first

    @property
    def n_data(self) -> int:
        return self.distance**2

    @property
    def n_x(self) -> int:
        return len(self.x_stabilizers)

    @property
    def n_stabilizers(self) -> int:
        return len(self.x_stabilizers) + len(self.z_stabilizers)

    @property
    def n_qubits(self) -> int:
        return self.n_data + self.n_stabilizers

    @property
    def logical_y(self) -> PauliOperator:
        return (self.logical_x * self.logical_z).scaled(1j)

    def measure_qubit(self, stab: int) -> int:
        return self.n_data + stab

    def stabilizer_pauli(self, stab: int) -> PauliOperator:
        """The stabilizer as a Pauli on the full (data + measure) register."""
        p = PauliOperator.identity(self.n_qubits)
        if stab < self.n_x:
            for q in self.x_stabilizers[stab]:
                p.x[q] = 1
        else:
            for q in self.z_stabilizers[stab - self.n_x]:
                p.z[q] = 1
        return p

    def logicals(self) -> list[PauliOperator]:
        return [self.logical_x, self.logical_y, self.logical_z]


def build_patch(d: int) -> SurfaceCodePatch:
    """Standard-arrangement rotated surface code of odd distance d >= 3."""
    if d < 3 or d % 2 == 0:
        raise ValueError("distance must be odd and at least 3")
    n_data = d * d

    def data_index(r: int, c: int) -> int | None:
        if 0 <= r < d and 0 <= c < d:
            return r * d + c
        return None

    def face_exists(i: int, j: int) -> bool:
        x_type = (i + j) % 2 == 1
        if 1 <= i <= d - 1 and 1 <= j <= d - 1:
            return True
        if i in (0, d) and 1 <= j <= d - 1:
            return x_type  # top/bottom boundary carries X stabilizers
        if j in (0, d) and 1 <= i <= d - 1:
            return not x_type  # left/right boundary carries Z stabilizers
        return False

    x_faces, z_faces = [], []
    for i in range(d + 1):
        for j in range(d + 1):
            if face_exists(i, j):
                (x_faces if (i + j) % 2 == 1 else z_faces).append((i, j))

    def slots_for(face: tuple[int, int], pattern) -> list[int | None]:
        i, j = face
        out = []
        for role in pattern:
            di, dj = _ROLES[role]
            out.append(data_index(i + di, j + dj))
        return out

    x_slot_qubits = [slots_for(f, X_PATTERN) for f in x_faces]
    z_slot_qubits = [slots_for(f, Z_PATTERN) for f in z_faces]
    x_stabs = [[q for q in slots if q is not None] for slots in x_slot_qubits]
    z_stabs = [[q for q in slots if q is not None] for slots in z_slot_qubits]

    n_stab = len(x_stabs) + len(z_stabs)
    pcm = np.zeros((n_stab, n_data), dtype=np.uint8)
    for s, qubits in enumerate(x_stabs):
        pcm[s, qubits] = 1
    for s, qubits in enumerate(z_stabs):
        pcm[len(x_stabs) + s, qubits] = 1

    n_qubits = n_data + n_stab
    logical_z = PauliOperator.identity(n_qubits)
    logical_z.z[[data_index(0, c) for c in range(d)]] = 1  # top row
    logical_x = PauliOperator.identity(n_qubits)
    logical_x.x[[data_index(r, 0) for r in range(d)]] = 1  # left column

    return SurfaceCodePatch(
        distance=d,
        data_coords=[(r, c) for r in range(d) for c in range(d)],
        measure_coords=[(i - 0.5, j - 0.5) for i, j in x_faces + z_faces],
        x_stabilizers=x_stabs,
        z_stabilizers=z_stabs,
        x_slot_qubits=x_slot_qubits,
        z_slot_qubits=z_slot_qubits,
        logical_x=logical_x,
        logical_z=logical_z,
        pcm=pcm,
    )


@dataclass(frozen=True)
class TimedInstruction:
    opcode: str  # INIT | MEAS | H | CX
    qubits: tuple[int, ...]
    start_ns: int
    duration_ns: int
    perfect: bool = False
    slot: int = -1       # measurement record slot (MEAS only)
    stab: int = -1       # stabilizer index (MEAS only)
    round_index: int = -1


@dataclass
class TimedCircuit:
    n: int
    instructions: list[TimedInstruction]
    patch: SurfaceCodePatch | None = None
    noisy_rounds: int = 0

    def sorted_instructions(self) -> list[TimedInstruction]:
        return sorted(self.instructions, key=lambda t: (t.start_ns, t.qubits))

    @property
    def n_slots(self) -> int:
        slots = [t.slot for t in self.instructions if t.opcode == "MEAS"]
        return max(slots) + 1 if slots else 0


ROUND_NS = 20_000 + 4 * SLOT_NS + H_NS + MEAS_NS  # 8_171_000


def generate_idle(patch: SurfaceCodePatch, noisy_rounds: int | None = None) -> TimedCircuit:
    """d rounds of parallel syndrome extraction plus one perfect round."""
    if noisy_rounds is None:
        noisy_rounds = patch.distance
    if noisy_rounds < 1:
        raise ValueError("need at least one noisy round")

    instructions: list[TimedInstruction] = []
    n_x = patch.n_x
    slot_counter = 0

    for rnd in range(noisy_rounds + 1):
        perfect = rnd == noisy_rounds
        t0 = rnd * ROUND_NS
        for s in range(patch.n_stabilizers):
            anc = patch.measure_qubit(s)
            instructions.append(
                TimedInstruction("INIT", (anc,), t0, INIT_NS, perfect, round_index=rnd)
            )
        for s in range(n_x):
            anc = patch.measure_qubit(s)
            instructions.append(
                TimedInstruction("H", (anc,), t0 + INIT_NS, H_NS, perfect, round_index=rnd)
            )
        for k in range(4):
            t_cx = t0 + 2 * INIT_NS + k * SLOT_NS + MOVE_NS
            for s in range(patch.n_stabilizers):
                anc = patch.measure_qubit(s)
                if s < n_x:
                    data = patch.x_slot_qubits[s][k]
                    pair = None if data is None else (anc, data)  # ancilla controls
                else:
                    data = patch.z_slot_qubits[s - n_x][k]
                    pair = None if data is None else (data, anc)  # data controls
                if pair is not None:
                    instructions.append(
                        TimedInstruction("CX", pair, t_cx, CX_NS, perfect, round_index=rnd)
                    )
        t_h2 = t0 + 2 * INIT_NS + 4 * SLOT_NS
        for s in range(n_x):
            anc = patch.measure_qubit(s)
            instructions.append(
                TimedInstruction("H", (anc,), t_h2, H_NS, perfect, round_index=rnd)
            )
        t_meas = t_h2 + H_NS
        for s in range(patch.n_stabilizers):
            anc = patch.measure_qubit(s)
            instructions.append(
                TimedInstruction(
                    "MEAS", (anc,), t_meas, MEAS_NS, perfect,
                    slot=slot_counter, stab=s, round_index=rnd,
                )
            )
            slot_counter += 1

    return TimedCircuit(patch.n_qubits, instructions, patch, noisy_rounds)


@dataclass
class NoiseModel:
    p_init: float = 4.0e-5
    p_1q: float = 2.9e-5
    p_2q: float = 1.28e-3
    p_meas: float = 1.0e-3
    dephasing_rate: float = 0.043  # rad/s accrued while idling or moving
    mode: str = "coherent"  # coherent | twirled

    def __post_init__(self):
        for p in (self.p_init, self.p_1q, self.p_2q, self.p_meas):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")
        if self.dephasing_rate < 0.0:
            raise ValueError("dephasing rate must be nonnegative")
        if self.mode not in ("coherent", "twirled"):
            raise ValueError("mode must be 'coherent' or 'twirled'")

    def dephasing(self, theta: float) -> ChannelDecomposition:
        if self.mode == "coherent":
            return dephasing_channel(theta)
        return twirled_dephasing(theta)


_GATE_CHANNEL_CACHE: dict = {}


def _noisy_gate_channel(opcode: str, p: float) -> ChannelDecomposition:
    """A Clifford gate with its trailing depolarizing noise folded in."""
    key = (opcode, p)
    if key in _GATE_CHANNEL_CACHE:
        return _GATE_CHANNEL_CACHE[key]
    arity = 2 if opcode == "CX" else 1
    base = (CliffordGate(opcode, tuple(range(arity))),)
    if p == 0.0:
        channel = clifford_channel(*base, arity=arity)
    else:
        depol = depolarizing(p, arity)
        kraus = []
        for kt in depol.kraus_terms:
            gates = base + kt.terms[0].gates
            kraus.append(KrausTerm(kt.probability, (CliffordTerm(1.0, gates),)))
        channel = ChannelDecomposition(arity, tuple(kraus))
    _GATE_CHANNEL_CACHE[key] = channel
    return channel


def _iter_gaps(circuit: TimedCircuit):
    """Yield (instruction, [(qubit, gap_ns), ...]) in deterministic order.

    Gaps are measured from the end of the qubit's previous instruction
    (circuit start counts as time 0).
    """
    last_end = np.zeros(circuit.n, dtype=np.int64)
    for instr in circuit.sorted_instructions():
        gaps = []
        for q in instr.qubits:
            gap = instr.start_ns - int(last_end[q])
            if gap < 0:
                raise ValueError(
                    f"overlapping instructions on qubit {q} at {instr.start_ns} ns"
                )
            gaps.append((q, gap))
            last_end[q] = instr.start_ns + instr.duration_ns
        yield instr, gaps


def bind_noise(circuit: TimedCircuit, model: NoiseModel,
               slot_offset: int = 0) -> NoisyCircuit:
    """Insert Table-style noise into a timed circuit.

    Idle-gap dephasing lands immediately before each instruction; gate noise
    follows its gate; measurement bit-flips precede the measurement.
    Perfect-round instructions receive no noise at all.
    """
    noisy = NoisyCircuit(circuit.n)
    dephasing_cache: dict[int, ChannelDecomposition] = {}

    def gap_channel(gap_ns: int) -> ChannelDecomposition | None:
        if model.dephasing_rate == 0.0 or gap_ns == 0:
            return None
        ch = dephasing_cache.get(gap_ns)
        if ch is None:
            theta = model.dephasing_rate * gap_ns * 1e-9
            ch = model.dephasing(theta)
            if ch.is_trivial and not ch.kraus_terms[0].terms[0].gates:
                ch = None  # exact identity (twirled theta = 0)
            dephasing_cache[gap_ns] = ch
        return ch

    for instr, gaps in _iter_gaps(circuit):
        if not instr.perfect:
            for q, gap in gaps:
                ch = gap_channel(gap)
                if ch is not None:
                    noisy.add(UnitaryEvent(ch, (q,)))
        if instr.opcode == "INIT":
            q = instr.qubits[0]
            noisy.add(ResetEvent(
                PauliOperator.single(circuit.n, q, "Z"),
                PauliOperator.single(circuit.n, q, "X"),
            ))
            if not instr.perfect and model.p_init > 0.0:
                noisy.add(UnitaryEvent(bitflip(model.p_init), (q,)))
        elif instr.opcode in ("H", "CX"):
            p = 0.0 if instr.perfect else (model.p_1q if instr.opcode == "H" else model.p_2q)
            noisy.add(UnitaryEvent(_noisy_gate_channel(instr.opcode, p), instr.qubits))
        elif instr.opcode == "MEAS":
            q = instr.qubits[0]
            pre = None
            if not instr.perfect and model.p_meas > 0.0:
                pre = UnitaryEvent(bitflip(model.p_meas), (q,))
            noisy.add(MeasureEvent(
                PauliOperator.single(circuit.n, q, "Z"),
                slot_offset + instr.slot,
                pre,
            ))
        else:
            raise ValueError(f"unknown opcode {instr.opcode}")
    return noisy


def idle_histogram(circuit: TimedCircuit) -> dict[float, int]:
    """Counts of positive per-qubit idle gaps (microseconds), noisy rounds only."""
    counts: dict[float, int] = {}
    for instr, gaps in _iter_gaps(circuit):
        if instr.perfect:
            continue
        for _q, gap in gaps:
            if gap > 0:
                us = gap / 1000.0
                counts[us] = counts.get(us, 0) + 1
    return counts


@dataclass
class PreparationDirective:
    """Noiseless logical-state preparation as engine events.

    The stabilizer-projection round records the quiescent reference
    outcomes in slots 0..n_slots-1.
    """

    label: str
    events: list
    n_slots: int


def prepare_logical(patch: SurfaceCodePatch, state: str) -> PreparationDirective:
    """Noiseless preparation of 0_L, 1_L, +_L or -_L (the Y_L=+1 state)."""
    if state not in ("0_L", "1_L", "+_L", "-_L"):
        raise ValueError(f"unknown logical state label {state!r}")
    n = patch.n_qubits
    events: list = []
    if state in ("+_L", "-_L"):
        for q in range(patch.n_data):
            events.append(UnitaryEvent(_noisy_gate_channel("H", 0.0), (q,)))
    for s in range(patch.n_stabilizers):
        events.append(MeasureEvent(patch.stabilizer_pauli(s), s))
    if state == "1_L":
        events.append(PauliEvent(patch.logical_x))
    elif state == "-_L":
        events.append(ProjectEvent(patch.logical_y, 1))
    return PreparationDirective(state, events, patch.n_stabilizers)


def assemble_idle_circuit(patch: SurfaceCodePatch, state: str, model: NoiseModel,
                          noisy_rounds: int | None = None
                          ) -> tuple[NoisyCircuit, PreparationDirective, TimedCircuit]:
    """Preparation plus noise-bound idle rounds as one executable circuit."""
    prep = prepare_logical(patch, state)
    timed = generate_idle(patch, noisy_rounds)
    noisy = bind_noise(timed, model, slot_offset=prep.n_slots)
    circuit = NoisyCircuit(patch.n_qubits, prep.events + noisy.events)
    return circuit, prep, timed


# ---- timed-circuit text format ------------------------------------------------


def save_timed_circuit(circuit: TimedCircuit, path) -> None:
    """One instruction per line: `<start_us> <duration_us> <OPCODE> <qubit...>`."""
    lines = [f"# qubits {circuit.n}"]
    perfect_start = [t.start_ns for t in circuit.instructions if t.perfect]
    if perfect_start:
        lines.append(f"# perfect_start_us {_fmt_us(min(perfect_start))}")
    for instr in circuit.sorted_instructions():
        qubits = " ".join(str(q) for q in instr.qubits)
        lines.append(
            f"{_fmt_us(instr.start_ns)} {_fmt_us(instr.duration_ns)} {instr.opcode} {qubits}"
        )
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def load_timed_circuit(path, patch: SurfaceCodePatch | None = None) -> TimedCircuit:
    """Parse the text format; `# perfect_start_us` marks the perfect round."""
    if hasattr(path, "read"):
        text = path.read()
    else:
        with open(path) as fh:
            text = fh.read()
    n = 0
    perfect_from = None
    instructions: list[TimedInstruction] = []
    slot_counter = 0
    for raw in io.StringIO(text):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            fields = line[1:].split()
            if len(fields) == 2 and fields[0] == "qubits":
                n = int(fields[1])
            elif len(fields) == 2 and fields[0] == "perfect_start_us":
                perfect_from = int(round(float(fields[1]) * 1000))
            continue
        fields = line.split()
        if len(fields) < 4:
            raise ValueError(f"malformed instruction line: {line!r}")
        start = int(round(float(fields[0]) * 1000))
        dur = int(round(float(fields[1]) * 1000))
        opcode = fields[2].upper()
        qubits = tuple(int(f) for f in fields[3:])
        if opcode not in ("INIT", "MEAS", "H", "CX"):
            raise ValueError(f"unknown opcode {opcode!r}")
        if opcode == "CX" and len(qubits) != 2:
            raise ValueError("CX takes two qubits")
        if opcode != "CX" and len(qubits) != 1:
            raise ValueError(f"{opcode} takes one qubit")
        perfect = perfect_from is not None and start >= perfect_from
        slot = -1
        if opcode == "MEAS":
            slot = slot_counter
            slot_counter += 1
        instructions.append(
            TimedInstruction(opcode, qubits, start, dur, perfect, slot=slot)
        )
        n = max(n, max(qubits) + 1)
    return TimedCircuit(n, instructions, patch)


def _fmt_us(ns: int) -> str:
    us = ns / 1000.0
    return f"{us:.3f}".rstrip("0").rstrip(".")
