"""Maximum-weight bipartite matching (Kuhn-Munkres) with dummy padding.

The solver pads the weight matrix to square with zero-weight dummies, runs an
O(n^3) shortest-augmenting-path Hungarian with exact dual potentials, then
canonicalizes ties: among equally-optimal matchings it greedily prefers the
lexicographically lowest pair list, swapping only along zero-reduced-cost
(tight) edges so the total is preserved. Dummy and below-floor pairs are never
emitted.
"""

import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

# Weights below this floor are treated as missing edges.
WEIGHT_FLOOR = 1e-6


@dataclass(frozen=True)
class BipartiteGraph:
    left: Tuple[str, ...]
    right: Tuple[str, ...]
    weights: Dict[Tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        lset, rset = set(self.left), set(self.right)
        if len(lset) != len(self.left) or len(rset) != len(self.right):
            raise ValueError("duplicate node ids in bipartite graph")
        for (l, r), w in self.weights.items():
            if l not in lset or r not in rset:
                raise ValueError(f"edge ({l!r}, {r!r}) references unknown node")
            if not math.isfinite(w):
                raise ValueError(f"edge ({l!r}, {r!r}) has non-finite weight {w}")


@dataclass(frozen=True)
class Matching:
    pairs: Tuple[Tuple[str, str], ...]
    total_weight: float


def _solve_min_assignment(cost: np.ndarray):
    """Square min-cost assignment; returns (col_of_row, u, v) with exact duals.

    Shortest augmenting path form; every matched edge has zero reduced cost.
    All potential updates are sums/differences of input entries, so for
    dyadic-rational inputs the duals are exact.
    """
    n = cost.shape[0]
    INF = float("inf")
    u = np.zeros(n)
    v = np.zeros(n)
    row_of_col = np.full(n, -1, dtype=np.int64)

    minv = np.empty(n)
    way = np.empty(n, dtype=np.int64)
    used = np.empty(n, dtype=bool)
    cand = np.empty(n)

    for i in range(n):
        minv.fill(INF)
        way.fill(-1)
        used.fill(False)
        i0 = i
        j_prev = -1
        while True:
            cur = cost[i0] - u[i0] - v
            better = (~used) & (cur < minv)
            minv[better] = cur[better]
            way[better] = j_prev
            np.copyto(cand, minv)
            cand[used] = INF
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            if used.any():
                u[row_of_col[used]] += delta
                v[used] -= delta
            u[i] += delta
            minv[~used] -= delta
            used[j1] = True
            if row_of_col[j1] < 0:
                break
            i0 = int(row_of_col[j1])
            j_prev = j1
        # Augment back along the alternating tree.
        j = j1
        while True:
            pj = int(way[j])
            if pj < 0:
                row_of_col[j] = i
                break
            row_of_col[j] = row_of_col[pj]
            j = pj

    col_of_row = np.full(n, -1, dtype=np.int64)
    for j in range(n):
        col_of_row[row_of_col[j]] = j
    return col_of_row, u, v


def _repair_path(tight: np.ndarray, row_of_col: np.ndarray, start_row: int,
                 target_col: int, banned_row: int, banned_col: int,
                 locked_cols: np.ndarray):
    """BFS for an alternating path start_row -> ... -> target_col over tight
    edges, avoiding the banned/locked nodes. Returns the column chosen for
    each visited row on the path, or None."""
    n = tight.shape[0]
    visited_cols = np.zeros(n, dtype=bool)
    visited_cols[banned_col] = True
    visited_cols[locked_cols] = True
    parent_row_of_col = {}
    frontier = [start_row]
    found = False
    while frontier and not found:
        nxt = []
        for r in frontier:
            cols = np.nonzero(tight[r] & ~visited_cols)[0]
            for j in cols:
                visited_cols[j] = True
                parent_row_of_col[int(j)] = r
                if j == target_col:
                    found = True
                    break
                r2 = int(row_of_col[j])
                if r2 != banned_row:
                    nxt.append(r2)
            if found:
                break
        frontier = nxt
    if not found:
        return None
    # Reconstruct: each row on the path takes the column it reached.
    moves = []
    j = target_col
    while True:
        r = parent_row_of_col[int(j)]
        moves.append((r, int(j)))
        if r == start_row:
            break
        # r entered the tree through its matched column
        j = int(np.nonzero(row_of_col == r)[0][0])
    return moves


def max_weight_matching(g: BipartiteGraph) -> Matching:
    """Optimal maximum-weight matching; deterministic, never emits absent edges."""
    L = sorted(g.left)
    R = sorted(g.right)
    nl, nr = len(L), len(R)
    n = max(nl, nr)
    if n == 0:
        return Matching(pairs=(), total_weight=0.0)
    li = {l: i for i, l in enumerate(L)}
    ri = {r: j for j, r in enumerate(R)}

    W = np.zeros((n, n))
    for (l, r), w in g.weights.items():
        if w >= WEIGHT_FLOOR:
            W[li[l], ri[r]] = w

    # Shift to a nonnegative min-cost problem; a constant per cell changes
    # every perfect matching's total equally, and max() of dyadic weights
    # keeps the arithmetic exact.
    cost = W.max() - W
    col_of_row, u, v = _solve_min_assignment(cost)
    row_of_col = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        row_of_col[col_of_row[i]] = i

    # Tight edges: zero reduced cost under the optimal duals. Any perfect
    # matching inside this subgraph attains the same optimal total.
    tight = (cost - u[:, None] - v[None, :]) == 0.0

    locked_rows = np.zeros(n, dtype=bool)
    locked_cols = np.zeros(n, dtype=bool)
    for i in range(nl):
        j_cur = int(col_of_row[i])
        emitted = j_cur < nr and W[i, j_cur] > 0.0
        candidates = np.nonzero(tight[i] & ~locked_cols & (W[i] > 0.0))[0]
        for j in candidates:
            j = int(j)
            if emitted and j >= j_cur:
                break
            moves = _repair_path(tight, row_of_col, int(row_of_col[j]), j_cur,
                                 banned_row=i, banned_col=j, locked_cols=locked_cols)
            if moves is None:
                continue
            for r, jj in moves:
                row_of_col[jj] = r
                col_of_row[r] = jj
            row_of_col[j] = i
            col_of_row[i] = j
            j_cur = j
            break
        locked_rows[i] = True
        locked_cols[j_cur] = True

    pairs = []
    total = 0.0
    for i in range(nl):
        j = int(col_of_row[i])
        if j < nr and W[i, j] > 0.0:
            pairs.append((L[i], R[j]))
            total += float(W[i, j])
    return Matching(pairs=tuple(pairs), total_weight=total)


def random_maximal_matching(g: BipartiteGraph, rng: random.Random) -> Matching:
    """Seeded random maximal matching over present edges (baseline policy)."""
    order = sorted(g.left)
    rng.shuffle(order)
    taken = set()
    chosen: List[Tuple[str, str]] = []
    total = 0.0
    adj: Dict[str, List[Tuple[str, float]]] = {l: [] for l in g.left}
    for (l, r), w in sorted(g.weights.items()):
        if w >= WEIGHT_FLOOR:
            adj[l].append((r, w))
    for l in order:
        avail = [(r, w) for r, w in adj[l] if r not in taken]
        if not avail:
            continue
        r, w = avail[rng.randrange(len(avail))]
        taken.add(r)
        chosen.append((l, r))
        total += w
    chosen.sort()
    return Matching(pairs=tuple(chosen), total_weight=total)
