"""Low-level geometric primitives shared across the engine.

Everything operates on plain numpy arrays: triangles are (n, 3, 3) float64
arrays (triangle, vertex, xyz), points are (n, 3). All routines are pure
and deterministic; randomized ones take an explicit Generator.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import EmptySelection

# Parts larger than this fall back to point-sampled distance queries.
EXACT_TRIANGLE_LIMIT = 5000
DISTANCE_SAMPLE_COUNT = 2048


def stable_seed(*tokens: str | int) -> np.random.SeedSequence:
    """SeedSequence derived from tokens via sha256; stable across processes."""
    digest = hashlib.sha256("\x1f".join(str(t) for t in tokens).encode()).digest()
    words = np.frombuffer(digest[:16], dtype=np.uint32)
    return np.random.SeedSequence(words.tolist())


# ------------------------------------------------------------------
# Axis-aligned bounding boxes
# ------------------------------------------------------------------

@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box given by its two extreme corners."""

    lo: np.ndarray
    hi: np.ndarray

    @staticmethod
    def from_points(points: np.ndarray) -> "Aabb":
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if points.size == 0:
            raise EmptySelection("cannot build a bounding box from zero points")
        return Aabb(points.min(axis=0), points.max(axis=0))

    def union(self, other: "Aabb") -> "Aabb":
        return Aabb(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    @property
    def center(self) -> np.ndarray:
        return (self.lo + self.hi) / 2.0

    @property
    def extents(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def contains_point(self, point: np.ndarray, tol: float = 0.0) -> bool:
        p = np.asarray(point, dtype=np.float64)
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))

    def intersection_over_union(self, other: "Aabb") -> float:
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        inter_ext = np.clip(hi - lo, 0.0, None)
        inter = float(np.prod(inter_ext))
        vol_a = float(np.prod(np.clip(self.extents, 0.0, None)))
        vol_b = float(np.prod(np.clip(other.extents, 0.0, None)))
        denom = vol_a + vol_b - inter
        if denom <= 0.0:
            return 0.0
        return inter / denom


def union_bbox(boxes: list[Aabb]) -> Aabb:
    if not boxes:
        raise EmptySelection("cannot union zero bounding boxes")
    out = boxes[0]
    for box in boxes[1:]:
        out = out.union(box)
    return out


# ------------------------------------------------------------------
# Triangle basics
# ------------------------------------------------------------------

def triangle_areas(triangles: np.ndarray) -> np.ndarray:
    a, b, c = triangles[:, 0], triangles[:, 1], triangles[:, 2]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def triangle_normals(triangles: np.ndarray) -> np.ndarray:
    """Unit normals by right-hand rule; degenerate triangles get +z."""
    a, b, c = triangles[:, 0], triangles[:, 1], triangles[:, 2]
    n = np.cross(b - a, c - a)
    length = np.linalg.norm(n, axis=1, keepdims=True)
    bad = length[:, 0] < 1e-30
    length[bad] = 1.0
    n = n / length
    n[bad] = (0.0, 0.0, 1.0)
    return n


def closest_points_on_triangles(triangles: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Closest point to ``points[i]`` on ``triangles[i]``, elementwise.

    Vectorized form of the classic Voronoi-region walk (Ericson,
    Real-Time Collision Detection, 5.1.5).
    """
    tri = np.asarray(triangles, dtype=np.float64)
    p = np.asarray(points, dtype=np.float64)
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]

    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)

    result = np.empty_like(p)
    done = np.zeros(len(p), dtype=bool)

    mask = (d1 <= 0.0) & (d2 <= 0.0)
    result[mask] = a[mask]
    done |= mask

    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    mask = ~done & (d3 >= 0.0) & (d4 <= d3)
    result[mask] = b[mask]
    done |= mask

    vc = d1 * d4 - d3 * d2
    mask = ~done & (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0)
    denom = d1 - d3
    safe = np.where(np.abs(denom) > 1e-30, denom, 1.0)
    v = d1 / safe
    result[mask] = a[mask] + v[mask, None] * ab[mask]
    done |= mask

    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    mask = ~done & (d6 >= 0.0) & (d5 <= d6)
    result[mask] = c[mask]
    done |= mask

    vb = d5 * d2 - d1 * d6
    mask = ~done & (vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0)
    denom = d2 - d6
    safe = np.where(np.abs(denom) > 1e-30, denom, 1.0)
    w = d2 / safe
    result[mask] = a[mask] + w[mask, None] * ac[mask]
    done |= mask

    va = d3 * d6 - d5 * d4
    mask = ~done & (va <= 0.0) & (d4 - d3 >= 0.0) & (d5 - d6 >= 0.0)
    denom = (d4 - d3) + (d5 - d6)
    safe = np.where(np.abs(denom) > 1e-30, denom, 1.0)
    w = (d4 - d3) / safe
    result[mask] = b[mask] + w[mask, None] * (c[mask] - b[mask])
    done |= mask

    # Interior: barycentric combination.
    mask = ~done
    denom = va + vb + vc
    safe = np.where(np.abs(denom) > 1e-30, denom, 1.0)
    v = vb / safe
    w = vc / safe
    result[mask] = a[mask] + v[mask, None] * ab[mask] + w[mask, None] * ac[mask]
    return result


def closest_points_on_segments(p1: np.ndarray, q1: np.ndarray,
                               p2: np.ndarray, q2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise closest points between segments (p1,q1) and (p2,q2)."""
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = np.einsum("ij,ij->i", d1, d1)
    e = np.einsum("ij,ij->i", d2, d2)
    f = np.einsum("ij,ij->i", d2, r)
    c = np.einsum("ij,ij->i", d1, r)
    b = np.einsum("ij,ij->i", d1, d2)
    denom = a * e - b * b

    eps = 1e-30
    s = np.where(denom > eps, np.clip((b * f - c * e) / np.where(denom > eps, denom, 1.0), 0.0, 1.0), 0.0)
    # Degenerate segment handling folds into the clamped updates below.
    t_raw = np.where(e > eps, (b * s + f) / np.where(e > eps, e, 1.0), 0.0)
    t = np.clip(t_raw, 0.0, 1.0)
    recompute = (t_raw < 0.0) | (t_raw > 1.0)
    s_re = np.where(a > eps, np.clip((b * t - c) / np.where(a > eps, a, 1.0), 0.0, 1.0), 0.0)
    s = np.where(recompute, s_re, s)
    c1 = p1 + s[:, None] * d1
    c2 = p2 + t[:, None] * d2
    return c1, c2


def triangle_pair_candidates(tris_a: np.ndarray, tris_b: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All 15 closest-pair candidates per triangle pair.

    The decomposition is 6 vertex-vs-triangle queries plus 9 edge-vs-edge
    queries; their minimum is the exact distance for non-intersecting
    triangles, with a zero-distance witness for touching ones. Returns
    (distances (m,15), points_a (m,15,3), points_b (m,15,3)).
    """
    m = len(tris_a)
    d = np.empty((m, 15))
    pa = np.empty((m, 15, 3))
    pb = np.empty((m, 15, 3))
    col = 0

    def put(ca: np.ndarray, cb: np.ndarray) -> None:
        nonlocal col
        d[:, col] = np.linalg.norm(ca - cb, axis=1)
        pa[:, col] = ca
        pb[:, col] = cb
        col += 1

    for k in range(3):
        va = tris_a[:, k]
        put(va, closest_points_on_triangles(tris_b, va))
    for k in range(3):
        vb = tris_b[:, k]
        put(closest_points_on_triangles(tris_a, vb), vb)
    edges = ((0, 1), (1, 2), (2, 0))
    for ia, ja in edges:
        for ib, jb in edges:
            ca, cb = closest_points_on_segments(
                tris_a[:, ia], tris_a[:, ja], tris_b[:, ib], tris_b[:, jb])
            put(ca, cb)
    return d, pa, pb


def triangle_pair_closest_points(tris_a: np.ndarray, tris_b: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closest point pair between ``tris_a[i]`` and ``tris_b[i]``, elementwise."""
    d, pa, pb = triangle_pair_candidates(tris_a, tris_b)
    pick = d.argmin(axis=1)
    rows = np.arange(len(d))
    return d[rows, pick], pa[rows, pick], pb[rows, pick]


def _triangle_aabbs(triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return triangles.min(axis=1), triangles.max(axis=1)


def _aabb_pair_distances(lo_a, hi_a, lo_b, hi_b) -> np.ndarray:
    gap = np.maximum(lo_b[None, :, :] - hi_a[:, None, :],
                     lo_a[:, None, :] - hi_b[None, :, :])
    gap = np.clip(gap, 0.0, None)
    return np.linalg.norm(gap, axis=2)


def min_distance_between_triangle_sets(tris_a: np.ndarray, tris_b: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Exact minimum distance and a witness point pair between two triangle sets.

    Seeds an upper bound from the closest vertex pair, then evaluates the
    exact triangle-triangle distance only for pairs whose box distance can
    beat the bound. When the minimum is attained on a whole region (touching
    faces), the witness is the lexicographically smallest near-minimal
    candidate pair, which keeps it stable under rigid translation.
    """
    verts_a = tris_a.reshape(-1, 3)
    verts_b = tris_b.reshape(-1, 3)
    best = np.inf
    chunk = 16384
    for start in range(0, len(verts_a), 4096):
        block = verts_a[start:start + 4096]
        d2 = ((block[:, None, :] - verts_b[None, :, :]) ** 2).sum(axis=2)
        best = min(best, float(np.sqrt(d2.min())))
        if best == 0.0:
            break

    lo_a, hi_a = _triangle_aabbs(tris_a)
    lo_b, hi_b = _triangle_aabbs(tris_b)
    box_d = _aabb_pair_distances(lo_a, hi_a, lo_b, hi_b)
    ia, ib = np.nonzero(box_d <= best + 1e-12)
    if len(ia) == 0:
        ia, ib = np.unravel_index(np.argmin(box_d), box_d.shape)
        ia, ib = np.array([ia]), np.array([ib])

    tie_tol = 1e-12
    best_dist = np.inf
    tied_d: list[np.ndarray] = []
    tied_pa: list[np.ndarray] = []
    tied_pb: list[np.ndarray] = []
    for start in range(0, len(ia), chunk):
        sel_a = tris_a[ia[start:start + chunk]]
        sel_b = tris_b[ib[start:start + chunk]]
        d, pa, pb = triangle_pair_candidates(sel_a, sel_b)
        flat_d = d.ravel()
        best_dist = min(best_dist, float(flat_d.min()))
        keep = flat_d <= best_dist + tie_tol
        tied_d.append(flat_d[keep])
        tied_pa.append(pa.reshape(-1, 3)[keep])
        tied_pb.append(pb.reshape(-1, 3)[keep])

    cand_d = np.concatenate(tied_d)
    cand_a = np.concatenate(tied_pa)
    cand_b = np.concatenate(tied_pb)
    final = cand_d <= best_dist + tie_tol
    cand_a, cand_b = cand_a[final], cand_b[final]
    key = np.concatenate([cand_a, cand_b], axis=1)
    order = np.lexsort(key.T[::-1])
    pick = order[0]
    return best_dist, cand_a[pick], cand_b[pick]


def sampled_min_distance(tris_a: np.ndarray, tris_b: np.ndarray,
                         rng: np.random.Generator,
                         count: int = DISTANCE_SAMPLE_COUNT) -> tuple[float, np.ndarray, np.ndarray]:
    """Approximate closest pair via surface point samples (large meshes)."""
    pa, _, _ = surface_sample(tris_a, count, rng)
    pb, _, _ = surface_sample(tris_b, count, rng)
    best = np.inf
    wa = pa[0]
    wb = pb[0]
    for start in range(0, len(pa), 512):
        block = pa[start:start + 512]
        d2 = ((block[:, None, :] - pb[None, :, :]) ** 2).sum(axis=2)
        k = int(np.argmin(d2))
        i, j = divmod(k, len(pb))
        if d2[i, j] < best:
            best = d2[i, j]
            wa = block[i]
            wb = pb[j]
    return float(np.sqrt(best)), wa, wb


# ------------------------------------------------------------------
# Surface sampling
# ------------------------------------------------------------------

def surface_sample(triangles: np.ndarray, count: int,
                   rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Area-uniform surface samples: (points, unit normals, triangle index)."""
    areas = triangle_areas(triangles)
    total = areas.sum()
    if total <= 0.0:
        # Degenerate soup: fall back to vertex centroid replication.
        centroid = triangles.mean(axis=1)
        idx = rng.integers(0, len(triangles), size=count)
        return centroid[idx], triangle_normals(triangles)[idx], idx
    probs = areas / total
    idx = rng.choice(len(triangles), size=count, p=probs)
    r1 = np.sqrt(rng.random(count))
    r2 = rng.random(count)
    a, b, c = triangles[idx, 0], triangles[idx, 1], triangles[idx, 2]
    points = (1.0 - r1)[:, None] * a + (r1 * (1.0 - r2))[:, None] * b + (r1 * r2)[:, None] * c
    normals = triangle_normals(triangles)[idx]
    return points, normals, idx


# ------------------------------------------------------------------
# 2D convex hull and containment
# ------------------------------------------------------------------

def convex_hull_2d(points: np.ndarray) -> np.ndarray:
    """Convex hull via monotone chain; returns CCW corners without repeats.

    Collinear input collapses to its two extreme points (or one point).
    """
    pts = np.unique(np.asarray(points, dtype=np.float64).reshape(-1, 2), axis=0)
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0.0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0.0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def point_in_convex_polygon(point: np.ndarray, hull: np.ndarray, tol: float = 0.0) -> bool:
    """Inclusive containment test against a CCW convex polygon."""
    if len(hull) < 3:
        return False
    p = np.asarray(point, dtype=np.float64)
    nxt = np.roll(hull, -1, axis=0)
    edge = nxt - hull
    rel = p[None, :] - hull
    cross = edge[:, 0] * rel[:, 1] - edge[:, 1] * rel[:, 0]
    return bool(np.all(cross >= -tol))


def point_to_segment_distance_2d(point: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    p = np.asarray(point, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = b - a
    denom = float(d @ d)
    t = 0.0 if denom <= 1e-30 else float(np.clip((p - a) @ d / denom, 0.0, 1.0))
    return float(np.linalg.norm(a + t * d - p))


def point_to_point_set_distance_2d(point: np.ndarray, points: np.ndarray) -> float:
    """Distance from a point to the degenerate hull of a point set.

    For >= 2 points this is the distance to the segment between the two
    extreme points (the collinear hull); for one point, the point itself.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        return np.inf
    if len(pts) == 1:
        return float(np.linalg.norm(pts[0] - point))
    # Extremes along the dominant spread direction.
    centered = pts - pts.mean(axis=0)
    spread = centered.std(axis=0)
    axis = int(np.argmax(spread))
    a = pts[np.argmin(pts[:, axis])]
    b = pts[np.argmax(pts[:, axis])]
    return point_to_segment_distance_2d(point, a, b)


# ------------------------------------------------------------------
# Triangle vs axis-aligned box overlap (separating axis theorem)
# ------------------------------------------------------------------

def triangles_intersect_aabb(triangles: np.ndarray, box: Aabb) -> np.ndarray:
    """Boolean mask of triangles overlapping the box (13-axis SAT)."""
    tri = np.asarray(triangles, dtype=np.float64)
    center = box.center
    half = box.extents / 2.0
    v = tri - center[None, None, :]

    alive = np.ones(len(tri), dtype=bool)

    # Box face normals: triangle AABB vs box.
    tri_lo = v.min(axis=1)
    tri_hi = v.max(axis=1)
    alive &= np.all(tri_lo <= half, axis=1) & np.all(tri_hi >= -half, axis=1)

    # Triangle plane vs box.
    f0 = v[:, 1] - v[:, 0]
    f1 = v[:, 2] - v[:, 1]
    f2 = v[:, 0] - v[:, 2]
    normal = np.cross(f0, f1)
    d = np.einsum("ij,ij->i", normal, v[:, 0])
    r = np.abs(normal) @ half
    alive &= np.abs(d) <= r + 1e-30

    # Nine edge cross-product axes.
    unit = np.eye(3)
    for f in (f0, f1, f2):
        for ax in range(3):
            axis = np.cross(np.broadcast_to(unit[ax], f.shape), f)
            proj = np.einsum("nij,nj->ni", v, axis)
            r = np.abs(axis) @ half
            pmin = proj.min(axis=1)
            pmax = proj.max(axis=1)
            alive &= (pmin <= r + 1e-30) & (pmax >= -r - 1e-30)
    return alive
