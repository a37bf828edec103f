"""Independent oracle implementations used to cross-check the engine.

Each oracle recomputes a result through a different route than the
production code: exhaustive enumeration instead of beam search, linear
programming instead of hull construction, matrix-power reachability
instead of graph traversal, full scans instead of pruned ones.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np
from scipy.optimize import linprog

from fame.functionality.constraints import GROUND_BAND_FRACTION
from fame.functionality.matching import SubsetScorer
from fame.functionality.models import sample_shape
from fame.geometry import triangle_pair_closest_points, union_bbox


def connectivity_oracle(nodes: list[str], edges: set[tuple[str, str]],
                        subset: frozenset[str]) -> bool:
    """Reachability via boolean adjacency-matrix powers."""
    sub = sorted(subset)
    if not sub:
        return False
    index = {pid: i for i, pid in enumerate(sub)}
    n = len(sub)
    adj = np.eye(n, dtype=bool)
    for a, b in edges:
        if a in index and b in index:
            adj[index[a], index[b]] = adj[index[b], index[a]] = True
    reach = adj.copy()
    for _ in range(n):
        reach = reach | (reach @ adj)
    return bool(reach[0].all())


def point_in_hull_lp(point: np.ndarray, points: np.ndarray, tol: float = 1e-9) -> bool:
    """Convex-hull membership via a feasibility LP: find lambda >= 0,
    sum(lambda) = 1, sum(lambda * p) = point."""
    n = len(points)
    a_eq = np.vstack([points.T, np.ones(n)])
    b_eq = np.concatenate([point, [1.0]])
    res = linprog(c=np.zeros(n), A_eq=a_eq, b_eq=b_eq, bounds=[(0, None)] * n,
                  method="highs")
    if res.status == 0:
        return True
    # Retry with a tolerance ring: accept points within tol of the hull.
    if tol > 0.0:
        for shift in np.array([[tol, 0], [-tol, 0], [0, tol], [0, -tol]]):
            res = linprog(c=np.zeros(n), A_eq=np.vstack([points.T, np.ones(n)]),
                          b_eq=np.concatenate([point + shift, [1.0]]),
                          bounds=[(0, None)] * n, method="highs")
            if res.status == 0:
                return True
    return False


def stability_oracle(shape, part_ids=None) -> bool:
    """Stability decision replicated with LP hull membership and
    SVD-rank degeneracy detection."""
    ids = frozenset(part_ids) if part_ids is not None else frozenset(p.id for p in shape.parts)
    if not ids:
        return False
    sample = sample_shape(shape)
    mask = sample.mask_for(ids)
    if not mask.any():
        return False
    points = sample.points[mask]
    boxes = [p.bbox for p in shape.parts if p.id in ids]
    com = np.mean(np.stack([b.center for b in boxes]), axis=0)[:2]
    diag = union_bbox(boxes).diagonal
    z_min = float(points[:, 2].min())
    band = GROUND_BAND_FRACTION * diag
    ground = points[points[:, 2] < z_min + band][:, :2]

    if len(ground) >= 3:
        centered = ground - ground.mean(axis=0)
        sv = np.linalg.svd(centered, compute_uv=False)
        spanning = sv[1] > 1e-9 * max(diag, 1.0)
    else:
        spanning = False
    if spanning:
        return point_in_hull_lp(com, ground, tol=1e-9 * max(diag, 1.0))
    dists = np.linalg.norm(ground - com, axis=1)
    if len(ground) >= 2:
        a = ground[np.argmin(ground @ np.array([1.0, 1e-7]))]
        b = ground[np.argmax(ground @ np.array([1.0, 1e-7]))]
        d = b - a
        denom = float(d @ d)
        if denom > 1e-30:
            t = float(np.clip((com - a) @ d / denom, 0.0, 1.0))
            seg = float(np.linalg.norm(a + t * d - com))
            return seg <= band
    return bool(len(dists) > 0 and dists.min() <= band)


def exhaustive_partial_match(shape, model) -> tuple[frozenset[str], float]:
    """Optimum over every non-empty valid part subset (2^n - 1 candidates)."""
    scorer = SubsetScorer(shape, model)
    ids = sorted(p.id for p in shape.parts)
    best: frozenset[str] | None = None
    best_score = -np.inf
    for size in range(1, len(ids) + 1):
        for combo in combinations(ids, size):
            subset = frozenset(combo)
            if not scorer.valid(subset):
                continue
            score = scorer.normalized(subset)
            if score > best_score or (score == best_score and best is not None
                                      and tuple(sorted(subset)) < tuple(sorted(best))):
                best = subset
                best_score = score
    if best is None:
        return frozenset(), 0.0
    return best, float(best_score)


def fps_oracle(ids: list[str], dist: np.ndarray, keep: int) -> list[str]:
    """Farthest point sampling, recomputing min-distances from scratch
    each step (no incremental caching)."""
    n = len(ids)
    if n == 0:
        return []
    if n == 1:
        return list(ids[:keep])
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    best = max(pairs, key=lambda p: (dist[p[0], p[1]],
                                     tuple(sorted((ids[p[0]], ids[p[1]])))[::-1]))
    # Break distance ties toward the lexicographically smallest id pair.
    best_d = max(dist[i, j] for i, j in pairs)
    tied = [p for p in pairs if dist[p[0], p[1]] == best_d]
    best = min(tied, key=lambda p: tuple(sorted((ids[p[0]], ids[p[1]]))))
    i, j = best
    seed = [i, j] if ids[i] <= ids[j] else [j, i]
    selected = list(seed)
    while len(selected) < min(keep, n):
        candidates = [k for k in range(n) if k not in selected]
        scored = []
        for k in candidates:
            dmin = min(dist[k, s] for s in selected)
            scored.append((-dmin, ids[k], k))
        scored.sort()
        selected.append(scored[0][2])
    return [ids[k] for k in selected[:keep]]


def grid_search_sse(src: np.ndarray, dst: np.ndarray,
                    center_translation: np.ndarray, center_scale: np.ndarray,
                    span: float) -> float:
    """Best summed squared error over a 21^3 translation x 9^3 scale grid
    around the given transform.

    The SSE separates per axis, so the joint minimum over the product
    grid equals the sum of per-axis minima over 21 x 9 grids; this
    evaluates exactly that, covering all 21^3 * 9^3 combinations.
    """
    total = 0.0
    for axis in range(3):
        x = src[:, axis]
        y = dst[:, axis]
        ts = center_translation[axis] + np.linspace(-span, span, 21)
        ss = center_scale[axis] * np.geomspace(0.7, 1.4, 9)
        sse = ((ss[None, :, None] * x[None, None, :]
                + ts[:, None, None] - y[None, None, :]) ** 2).sum(axis=2)
        total += float(sse.min())
    return total


def exhaustive_pair_distance(tris_a: np.ndarray, tris_b: np.ndarray) -> float:
    """Minimum distance over every triangle pair, no pruning."""
    ia, ib = np.meshgrid(np.arange(len(tris_a)), np.arange(len(tris_b)), indexing="ij")
    d, _, _ = triangle_pair_closest_points(tris_a[ia.ravel()], tris_b[ib.ravel()])
    return float(d.min())
