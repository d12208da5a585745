"""Matching decoder on detector graphs built from the parity check matrix.

Two independent subgraphs (X-stabilizer detectors catching Z errors, and
Z-stabilizer detectors catching X errors) with unit weight on every error
mechanism: space-like edges from PCM columns, time-like edges from
measurement errors, boundary edges from weight-1 columns.  Matching is
exact: a bitmask DP for small defect sets, blossom (networkx) beyond that.
Ties are broken deterministically (boundary first, then lowest index).
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .surface import SurfaceCodePatch

_DP_CAP = 14  # defects handled by the exact bitmask DP before blossom takes over


@dataclass
class Syndrome:
    """Detector bits per subgraph, shape (rounds+1, stabilizers of that type)."""

    x: np.ndarray
    z: np.ndarray


@dataclass
class DetectorMetadata:
    """Slot layout: prep reference slots 0..S-1, then S slots per round."""

    n_x: int
    n_z: int
    rounds: int  # noisy rounds; the perfect round adds one more layer

    @property
    def n_stab(self) -> int:
        return self.n_x + self.n_z

    @property
    def n_slots(self) -> int:
        return self.n_stab * (self.rounds + 2)


def detectors_from_record(record: np.ndarray, meta: DetectorMetadata) -> Syndrome:
    """XOR consecutive same-stabilizer outcomes (prep reference = round -1)."""
    if len(record) != meta.n_slots:
        raise ValueError(f"record length {len(record)} != {meta.n_slots}")
    rounds = record.reshape(meta.rounds + 2, meta.n_stab)
    det = rounds[1:] ^ rounds[:-1]
    return Syndrome(x=det[:, : meta.n_x], z=det[:, meta.n_x:])


@dataclass
class Correction:
    """Data-qubit support of the inferred physical correction."""

    x_support: np.ndarray
    z_support: np.ndarray


class _SubGraph:
    """One detector subgraph with precomputed distances and path steps."""

    def __init__(self, n_stab: int, layers: int, stab_qubits: list[list[int]],
                 n_data: int):
        self.n_stab = n_stab
        self.layers = layers
        self.n_nodes = n_stab * layers
        self.n_data = n_data

        # data qubit -> local stabilizer rows of this type
        by_qubit: dict[int, list[int]] = {}
        for s, qubits in enumerate(stab_qubits):
            for q in qubits:
                by_qubit.setdefault(q, []).append(s)

        adj: list[dict[int, int | None]] = [dict() for _ in range(self.n_nodes)]
        boundary_label: dict[int, int] = {}
        for q, stabs in sorted(by_qubit.items()):
            if len(stabs) == 2:
                s1, s2 = stabs
                for r in range(layers):
                    u, v = r * n_stab + s1, r * n_stab + s2
                    if v not in adj[u]:
                        adj[u][v] = q
                        adj[v][u] = q
            elif len(stabs) == 1:
                s1 = stabs[0]
                for r in range(layers):
                    u = r * n_stab + s1
                    if u not in boundary_label:
                        boundary_label[u] = q
            else:
                raise ValueError("PCM column weight must be 1 or 2 per type")
        for s in range(n_stab):
            for r in range(layers - 1):
                u, v = r * n_stab + s, (r + 1) * n_stab + s
                adj[u][v] = None  # measurement-error edge: no data correction
                adj[v][u] = None

        self.neighbors = [sorted(d.keys()) for d in adj]
        self.edge_label = adj
        self.boundary_label = boundary_label
        self._bfs_all()

    def _bfs_all(self):
        n = self.n_nodes
        dist = np.full((n, n), 32000, dtype=np.int32)
        for src in range(n):
            dist[src, src] = 0
            queue = [src]
            while queue:
                nxt = []
                for u in queue:
                    du = dist[src, u]
                    for v in self.neighbors[u]:
                        if dist[src, v] > du + 1:
                            dist[src, v] = du + 1
                            nxt.append(v)
                queue = nxt
        self.dist = dist
        bdist = np.full(n, 32000, dtype=np.int32)
        for u in self.boundary_label:
            bdist[u] = 1
        changed = True
        while changed:
            changed = False
            for u in range(n):
                for v in self.neighbors[u]:
                    if bdist[u] > bdist[v] + 1:
                        bdist[u] = bdist[v] + 1
                        changed = True
        self.bdist = bdist

    # -- path walking with lowest-index tie-breaks --

    def path_labels(self, u: int, v: int, out: np.ndarray) -> None:
        """XOR the data-qubit labels of a shortest u-v path into ``out``."""
        while u != v:
            for w in self.neighbors[u]:
                if self.dist[w, v] == self.dist[u, v] - 1:
                    label = self.edge_label[u][w]
                    if label is not None:
                        out[label] ^= 1
                    u = w
                    break

    def boundary_path_labels(self, u: int, out: np.ndarray) -> None:
        while True:
            if self.bdist[u] == 1:
                out[self.boundary_label[u]] ^= 1
                return
            for w in self.neighbors[u]:
                if self.bdist[w] == self.bdist[u] - 1:
                    u = w
                    break

    # -- exact matching --

    def match(self, defects: list[int]) -> list[tuple[int, int | None]]:
        """Minimum-weight perfect matching of defects (None = boundary)."""
        k = len(defects)
        if k == 0:
            return []
        if k <= _DP_CAP:
            return self._match_dp(defects)
        return self._match_blossom(defects)

    def _match_dp(self, defects: list[int]):
        k = len(defects)
        d = self.dist
        b = self.bdist
        memo: dict[int, int] = {0: 0}

        def solve(mask: int) -> int:
            cached = memo.get(mask)
            if cached is not None:
                return cached
            i = (mask & -mask).bit_length() - 1
            rest = mask ^ (1 << i)
            best = int(b[defects[i]]) + solve(rest)
            m = rest
            while m:
                j = (m & -m).bit_length() - 1
                m ^= 1 << j
                cost = int(d[defects[i], defects[j]]) + solve(rest ^ (1 << j))
                if cost < best:
                    best = cost
            memo[mask] = best
            return best

        pairs: list[tuple[int, int | None]] = []
        mask = (1 << k) - 1
        while mask:
            i = (mask & -mask).bit_length() - 1
            rest = mask ^ (1 << i)
            total = solve(mask)
            if int(b[defects[i]]) + solve(rest) == total:
                pairs.append((defects[i], None))
                mask = rest
                continue
            m = rest
            while m:
                j = (m & -m).bit_length() - 1
                m ^= 1 << j
                if int(d[defects[i], defects[j]]) + solve(rest ^ (1 << j)) == total:
                    pairs.append((defects[i], defects[j]))
                    mask = rest ^ (1 << j)
                    break
        return pairs

    def _match_blossom(self, defects: list[int]):
        k = len(defects)
        g = nx.Graph()
        for a in range(k):
            g.add_edge(("d", a), ("b", a), weight=int(self.bdist[defects[a]]))
            for b_idx in range(a + 1, k):
                g.add_edge(("d", a), ("d", b_idx),
                           weight=int(self.dist[defects[a], defects[b_idx]]))
                g.add_edge(("b", a), ("b", b_idx), weight=0)
        matching = nx.min_weight_matching(g)
        pairs: list[tuple[int, int | None]] = []
        for x, y in sorted(matching, key=str):
            if x[0] == "b" and y[0] == "b":
                continue
            if x[0] == "d" and y[0] == "d":
                pairs.append((defects[x[1]], defects[y[1]]))
            else:
                d_node = x if x[0] == "d" else y
                pairs.append((defects[d_node[1]], None))
        return pairs

    def matching_weight(self, defects: list[int]) -> int:
        pairs = self.match(defects)
        total = 0
        for u, v in pairs:
            total += int(self.bdist[u]) if v is None else int(self.dist[u, v])
        return total

    def decode_into(self, fired: np.ndarray, out: np.ndarray) -> None:
        defects = [int(i) for i in np.flatnonzero(fired.reshape(-1))]
        for u, v in self.match(defects):
            if v is None:
                self.boundary_path_labels(u, out)
            else:
                self.path_labels(u, v, out)


@dataclass
class DecodingGraph:
    patch: SurfaceCodePatch
    rounds: int
    x_graph: _SubGraph  # X-stabilizer detectors: yields Z corrections
    z_graph: _SubGraph  # Z-stabilizer detectors: yields X corrections


def build_graph(patch: SurfaceCodePatch, rounds: int) -> DecodingGraph:
    """Detector graph for `rounds` noisy rounds plus the perfect round."""
    if rounds < 1:
        raise ValueError("need at least one noisy round")
    layers = rounds + 1
    return DecodingGraph(
        patch=patch,
        rounds=rounds,
        x_graph=_SubGraph(patch.n_x, layers, patch.x_stabilizers, patch.n_data),
        z_graph=_SubGraph(len(patch.z_stabilizers), layers, patch.z_stabilizers,
                          patch.n_data),
    )


def decode(graph: DecodingGraph, syndrome: Syndrome) -> Correction:
    """MWPM correction for one shot's syndrome."""
    n_data = graph.patch.n_data
    correction = Correction(
        x_support=np.zeros(n_data, dtype=np.uint8),
        z_support=np.zeros(n_data, dtype=np.uint8),
    )
    if syndrome.x.any():
        graph.x_graph.decode_into(syndrome.x, correction.z_support)
    if syndrome.z.any():
        graph.z_graph.decode_into(syndrome.z, correction.x_support)
    return correction


def logical_flips(correction: Correction, patch: SurfaceCodePatch) -> np.ndarray:
    """(X_L, Y_L, Z_L) flip bits: anticommutation parity with the correction."""
    n_data = patch.n_data
    flip_x = int(correction.z_support @ patch.logical_x.x[:n_data]) % 2
    flip_z = int(correction.x_support @ patch.logical_z.z[:n_data]) % 2
    return np.array([flip_x, flip_x ^ flip_z, flip_z], dtype=np.uint8)
