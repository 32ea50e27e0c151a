"""Minimum-cost multicut over the atom graph.

The cost of a decomposition is the summed weight of edges joining nodes in
different components. Positive weights are attractive (cutting them costs),
negative weights repulsive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .atoms import Atom, atom_overlap_graph_edges
from .data import TrajectorySet
from .errors import DegenerateConfiguration, InsufficientAtoms, TooLarge
from .geometry import fit_affine, forward_backward_error

WEIGHT_CLIP = 10.0


@dataclass(frozen=True)
class WeightedGraph:
    node_count: int
    edges: tuple  # ((i, j, w), ...) with i < j

    def __post_init__(self):
        seen = set()
        clean = []
        for i, j, w in self.edges:
            i, j, w = int(i), int(j), float(w)
            if not 0 <= i < j < self.node_count:
                raise ValueError(f"edge ({i}, {j}) violates 0 <= i < j < {self.node_count}")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            if not math.isfinite(w):
                raise ValueError(f"edge ({i}, {j}) has non-finite weight")
            seen.add((i, j))
            clean.append((i, j, w))
        object.__setattr__(self, "edges", tuple(clean))


@dataclass
class Decomposition:
    node_labels: np.ndarray
    component_count: int
    objective: float = 0.0
    history: list = field(default_factory=list)


def cut_cost(g: WeightedGraph, labels) -> float:
    labels = np.asarray(labels)
    return float(sum(w for i, j, w in g.edges if labels[i] != labels[j]))


def canonical_labels(labels) -> np.ndarray:
    """Relabel to ``0, 1, ...`` in order of first appearance."""
    mapping: dict = {}
    return np.array([mapping.setdefault(int(x), len(mapping)) for x in labels], dtype=int)


def connected_split(g: WeightedGraph, labels) -> np.ndarray:
    """Split every component into its connected pieces w.r.t. uncut edges."""
    labels = np.asarray(labels)
    parent = list(range(g.node_count))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j, _ in g.edges:
        if labels[i] == labels[j]:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    return canonical_labels([find(i) for i in range(g.node_count)])


def is_feasible(g: WeightedGraph, labels) -> bool:
    """Every component is connected through its own (uncut) edges."""
    labels = canonical_labels(labels)
    return np.array_equal(labels, connected_split(g, labels))


# ------------------------------------------------------------------------ weights


def edge_weight_from_affinity(fb_error: float, scale: float = 3.0, eps: float = 1e-12) -> float:
    """Map a forward-backward error (pixels) to a signed log-odds edge weight."""
    if fb_error < 0 or scale <= 0:
        raise ValueError("need fb_error >= 0 and scale > 0")
    p = math.exp(-fb_error / scale)
    num = 2.0 * p
    den = 2.0 - 2.0 * p + eps
    if num <= 0.0:
        return -WEIGHT_CLIP
    return float(np.clip(math.log(num / den), -WEIGHT_CLIP, WEIGHT_CLIP))


# ------------------------------------------------------------------------- greedy


def solve_multicut_greedy(g: WeightedGraph, target_components: int = 1, force: bool = False) -> Decomposition:
    """Greedy additive edge contraction.

    Repeatedly contracts the pair of adjacent components with the largest
    total connecting weight while that weight is positive and more than
    ``target_components`` components remain. With ``force``, contraction then
    continues past the sign stop until exactly ``target_components`` remain,
    merging the adjacent pair whose connecting edges have the least negative
    mean weight (a sum would penalise large components for their many weak
    boundary edges). Components with no edge between them are never merged.
    """
    if g.node_count < 1 or target_components < 1:
        raise ValueError("need node_count >= 1 and target_components >= 1")
    return _contract(g, target_components, force)


def _contract(g: WeightedGraph, stop_at: int, force: bool) -> Decomposition:
    n = g.node_count
    # adj[a][b] = [summed weight, edge count]
    adj: dict = {i: {} for i in range(n)}
    for i, j, w in g.edges:
        for a, b in ((i, j), (j, i)):
            cell = adj[a].setdefault(b, [0.0, 0])
            cell[0] += w
            cell[1] += 1
    members = {i: [i] for i in range(n)}
    objective = sum(w for _, _, w in g.edges)
    history = [objective]
    forced = False
    while len(members) > stop_at:
        best = None
        for a in sorted(adj):
            for b, (w, c) in sorted(adj[a].items()):
                key = w / c if forced else w
                if a < b and (best is None or key > best[0]):
                    best = (key, a, b)
        if best is None:
            break
        if not forced and best[0] <= 0.0:
            if not force:
                break
            forced = True
            continue
        _, a, b = best
        w = adj[a][b][0]
        # b is absorbed into a (a < b)
        for c, cell in adj.pop(b).items():
            del adj[c][b]
            if c == a:
                continue
            mine = adj[a].setdefault(c, [0.0, 0])
            mine[0] += cell[0]
            mine[1] += cell[1]
            adj[c][a] = mine
        members[a].extend(members.pop(b))
        objective -= w
        history.append(objective)
    labels = np.empty(n, dtype=int)
    for comp, nodes in members.items():
        labels[nodes] = comp
    labels = canonical_labels(labels)
    return Decomposition(labels, int(labels.max()) + 1, float(cut_cost(g, labels)), history)


# -------------------------------------------------------------------------- exact


@lru_cache(maxsize=16)
def _set_partitions(n: int) -> np.ndarray:
    """All restricted growth strings of length n, in lexicographic order."""
    out = []
    a = [0] * n

    def rec(i, m):
        if i == n:
            out.append(a.copy())
            return
        for v in range(m + 2):
            a[i] = v
            rec(i + 1, max(m, v))

    if n == 0:
        return np.zeros((1, 0), dtype=np.int8)
    a[0] = 0
    rec(1, 0)
    arr = np.array(out, dtype=np.int8)
    arr.setflags(write=False)
    return arr


MAX_EXACT_NODES = 12


def solve_multicut_exact(g: WeightedGraph, tol: float = 1e-12) -> Decomposition:
    """Exact multicut by enumerating every set partition (node_count <= 12).

    Ties are broken by fewer components, then lexicographically smallest labels.
    """
    n = g.node_count
    if n > MAX_EXACT_NODES:
        raise TooLarge(f"exact multicut supports <= {MAX_EXACT_NODES} nodes, got {n}")
    if n == 0:
        raise ValueError("empty graph")
    parts = _set_partitions(n)
    if not g.edges:
        labels = np.arange(n)
        return Decomposition(labels, n, 0.0)
    I = np.array([e[0] for e in g.edges])
    J = np.array([e[1] for e in g.edges])
    W = np.array([e[2] for e in g.edges])
    costs = np.empty(len(parts))
    chunk = 1 << 16
    for s in range(0, len(parts), chunk):
        p = parts[s : s + chunk]
        costs[s : s + chunk] = (p[:, I] != p[:, J]) @ W
    best = costs.min()
    tied = np.flatnonzero(costs <= best + tol)
    candidates = {tuple(connected_split(g, parts[t]).tolist()) for t in tied}
    labels = min(candidates, key=lambda lab: (max(lab) + 1, lab))
    labels = np.array(labels, dtype=int)
    return Decomposition(labels, int(labels.max()) + 1, cut_cost(g, labels))


# --------------------------------------------------------------- atoms -> models


@dataclass(frozen=True)
class MulticutConfig:
    scale: float = 3.0
    k_neighbors: int = 4
    reference_frame: int = 0


class _TransformCache:
    def __init__(self, atoms, traj):
        self.atoms = atoms
        self.traj = traj
        self._cache: dict = {}

    def get(self, i, pair):
        key = (i, pair)
        if key not in self._cache:
            l, r = pair
            f = self.atoms[i].feature_ids
            try:
                self._cache[key] = fit_affine(self.traj.points[f, l], self.traj.points[f, r], l, r)
            except DegenerateConfiguration:
                self._cache[key] = None
        return self._cache[key]


def atom_pair_fb_error(i: int, j: int, atoms, traj: TrajectorySet, cache=None) -> float:
    """Largest symmetric forward-backward error between atoms i and j.

    Evaluated on both atoms' frame pairs, with each atom's transform taken
    forward and the other's inverse taken back.
    """
    cache = cache or _TransformCache(atoms, traj)
    worst = 0.0
    for pair in {atoms[i].frame_pair, atoms[j].frame_pair}:
        ti, tj = cache.get(i, pair), cache.get(j, pair)
        if ti is None or tj is None:
            return math.inf
        l, r = pair
        for a, ta, tb in ((i, ti, tj), (j, tj, ti)):
            f = atoms[a].feature_ids
            e = forward_backward_error(ta, traj.points[f, l], traj.points[f, r], tb.inverse(), symmetric=True)
            worst = max(worst, e)
    return worst


def atom_graph(atoms, traj: TrajectorySet, cfg: MulticutConfig = MulticutConfig()) -> WeightedGraph:
    """Weighted atom graph; extra nearest-centroid edges join disconnected pieces."""
    n = len(atoms)
    edges = set(atom_overlap_graph_edges(atoms, cfg.k_neighbors, cfg.reference_frame))
    edges |= _bridging_edges(atoms, edges, cfg.reference_frame)
    cache = _TransformCache(atoms, traj)
    weighted = []
    for i, j in sorted(edges):
        fb = atom_pair_fb_error(i, j, atoms, traj, cache)
        w = -WEIGHT_CLIP if math.isinf(fb) else edge_weight_from_affinity(fb, cfg.scale)
        weighted.append((i, j, w))
    return WeightedGraph(n, tuple(weighted))


def _bridging_edges(atoms, edges, reference_frame):
    n = len(atoms)
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in edges:
        parent[find(i)] = find(j)
    cents = np.array([a.centroid_per_frame[reference_frame] for a in atoms])
    extra = set()
    while len({find(i) for i in range(n)}) > 1:
        roots = np.array([find(i) for i in range(n)])
        first = roots == roots[0]
        a_idx, b_idx = np.flatnonzero(first), np.flatnonzero(~first)
        d = np.linalg.norm(cents[a_idx, None, :] - cents[None, b_idx, :], axis=2)
        ia, ib = np.unravel_index(np.argmin(d), d.shape)
        i, j = int(a_idx[ia]), int(b_idx[ib])
        extra.add((min(i, j), max(i, j)))
        parent[find(i)] = find(j)
    return extra


def fine_models_from_atoms(atoms, traj: TrajectorySet, num_models: int, cfg: MulticutConfig = MulticutConfig()):
    """Partition atoms into exactly ``num_models`` fine motion models.

    Returns ``(labels, decomposition)`` with one model id per atom.
    """
    if len(atoms) < num_models:
        raise InsufficientAtoms(f"{len(atoms)} atoms cannot form {num_models} models")
    g = atom_graph(atoms, traj, cfg)
    dec = solve_multicut_greedy(g, num_models, force=True)
    return dec.node_labels, dec
