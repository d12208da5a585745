"""Decoder soundness scans: exhaustive fault injection and matching optimality.

Used by the `decode-selftest` CLI subcommand and the acceptance suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decoder import DetectorMetadata, build_graph, decode, detectors_from_record, logical_flips
from .oracles import PauliFrameSampler
from .surface import NoiseModel, SurfaceCodePatch, assemble_idle_circuit, build_patch


@dataclass
class FaultScanReport:
    distance: int
    rounds: int
    sites: int
    faults_checked: int
    logical_errors: int
    unresolved_syndromes: int

    @property
    def passed(self) -> bool:
        return self.logical_errors == 0 and self.unresolved_syndromes == 0


def _scan_plan(d: int, rounds: int | None = None):
    patch = build_patch(d)
    # tiny uniform rates: every mechanism present, branch structure intact
    model = NoiseModel(p_init=1e-6, p_1q=1e-6, p_2q=1e-6, p_meas=1e-6,
                       dephasing_rate=1e-4, mode="twirled")
    circuit, prep, timed = assemble_idle_circuit(patch, "0_L", model, rounds)
    sampler = PauliFrameSampler(circuit, patch.logicals(), np.random.default_rng(0))
    meta = DetectorMetadata(patch.n_x, patch.n_stabilizers - patch.n_x,
                            timed.noisy_rounds)
    graph = build_graph(patch, timed.noisy_rounds)
    return patch, sampler, meta, graph, timed.noisy_rounds


def single_fault_scan(d: int, rounds: int | None = None,
                      sample_sites: int | None = None,
                      seed: int = 0) -> FaultScanReport:
    """Inject every single-branch fault; count decoded logical errors.

    ``sample_sites`` restricts the scan to a random subset of fault sites
    (used at d=5 where the exhaustive scan is large).
    """
    patch, sampler, meta, graph, rounds_used = _scan_plan(d, rounds)
    sites = sampler.noise_sites()
    picked = sites
    if sample_sites is not None and sample_sites < len(sites):
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(sites), size=sample_sites, replace=False)
        picked = [sites[i] for i in sorted(idx)]

    checked = 0
    errors = 0
    unresolved = 0
    for pos, n_branches in picked:
        for branch in range(1, n_branches):
            record, actual = sampler.propagate_faults({pos: branch})
            syndrome = detectors_from_record(record, meta)
            correction = decode(graph, syndrome)
            decoded = logical_flips(correction, patch)
            residual = decoded ^ actual
            checked += 1
            if residual.any():
                errors += 1
            # sanity: the correction must cancel the final-round syndrome
            if _final_round_residual(syndrome, correction, patch):
                unresolved += 1
    return FaultScanReport(d, rounds_used, len(picked), checked, errors, unresolved)


def _final_round_residual(syndrome, correction, patch: SurfaceCodePatch) -> bool:
    """True if correction + observed data error disagree on the perfect round.

    The perfect-round detector layer accumulates the net data error; a sound
    correction reproduces exactly that syndrome.
    """
    n_x = patch.n_x
    cum_x = syndrome.x.sum(axis=0) % 2  # net Z-error syndrome per X stabilizer
    cum_z = syndrome.z.sum(axis=0) % 2
    for s in range(n_x):
        parity = int(correction.z_support @ patch.pcm[s, :]) % 2
        if parity != cum_x[s]:
            return True
    for s in range(patch.n_stabilizers - n_x):
        parity = int(correction.x_support @ patch.pcm[n_x + s, :]) % 2
        if parity != cum_z[s]:
            return True
    return False


def bruteforce_matching_weight(dist: np.ndarray, bdist: np.ndarray,
                               defects: list[int]) -> int:
    """Minimum matching weight by plain recursion (independent oracle)."""
    def solve(items: tuple[int, ...]) -> int:
        if not items:
            return 0
        head, rest = items[0], items[1:]
        best = int(bdist[head]) + solve(rest)
        for idx, other in enumerate(rest):
            cost = int(dist[head, other]) + solve(rest[:idx] + rest[idx + 1:])
            if cost < best:
                best = cost
        return best

    return solve(tuple(defects))


def matching_optimality_check(d: int, trials: int, max_defects: int = 12,
                              seed: int = 1) -> tuple[int, int]:
    """Random defect sets: decoder matching weight vs brute-force optimum."""
    patch = build_patch(d)
    graph = build_graph(patch, d)
    rng = np.random.default_rng(seed)
    agree = 0
    for trial in range(trials):
        sub = graph.x_graph if trial % 2 == 0 else graph.z_graph
        k = int(rng.integers(1, max_defects + 1))
        defects = sorted(rng.choice(sub.n_nodes, size=min(k, sub.n_nodes),
                                    replace=False).tolist())
        got = sub.matching_weight(defects)
        want = bruteforce_matching_weight(sub.dist, sub.bdist, defects)
        if got == want:
            agree += 1
    return agree, trials


def run_selftest(d: int = 3, optimality_trials: int = 200) -> bool:
    """Print one line per check; returns overall pass/fail."""
    report = single_fault_scan(d)
    status = "PASS" if report.passed else "FAIL"
    print(f"[{status}] single-fault scan d={report.distance}: "
          f"{report.faults_checked} faults over {report.sites} sites, "
          f"{report.logical_errors} logical errors, "
          f"{report.unresolved_syndromes} unresolved syndromes")
    ok = report.passed
    agree, trials = matching_optimality_check(d, optimality_trials)
    status = "PASS" if agree == trials else "FAIL"
    print(f"[{status}] matching optimality d={d}: {agree}/{trials} at brute-force optimum")
    ok = ok and agree == trials
    return ok
