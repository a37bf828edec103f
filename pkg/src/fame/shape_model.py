"""Geometry core: shapes, parts, contact points, and relation graphs.

A dataset directory holds one OBJ mesh per shape (OBJ groups are parts,
the group name is the part id) plus a JSON sidecar with the category,
part labels, contacts, and symmetry groups. Shapes are immutable after
load; transforms produce new parts. Ground plane is z = shape minimum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    DanglingPartReference,
    EmptySelection,
    MalformedContactKind,
    MissingSidecar,
    UnknownPartId,
)
from .geometry import (
    Aabb,
    EXACT_TRIANGLE_LIMIT,
    min_distance_between_triangle_sets,
    sampled_min_distance,
    stable_seed,
    union_bbox,
)

# Default contact-detection threshold, as a fraction of the bbox diagonal.
ADJACENCY_EPS_FRACTION = 0.01

CONTACT_KIND_POINTS = {"quad": 4, "pair": 2, "single": 1}


# ------------------------------------------------------------------
# Domain types
# ------------------------------------------------------------------

@dataclass(frozen=True)
class Part:
    """One segment of a shape: a bag of triangles plus an optional label."""

    id: str
    triangles: np.ndarray  # (n, 3, 3) float64
    label: str | None = None

    def __post_init__(self):
        tri = np.asarray(self.triangles, dtype=np.float64)
        if tri.ndim != 3 or tri.shape[1:] != (3, 3) or len(tri) == 0:
            raise ValueError(f"part {self.id!r}: triangles must be a non-empty (n,3,3) array")
        object.__setattr__(self, "triangles", tri)

    @property
    def bbox(self) -> Aabb:
        return Aabb.from_points(self.triangles.reshape(-1, 3))

    def transformed(self, scale: np.ndarray, translation: np.ndarray) -> "Part":
        """New part with every vertex mapped to scale * v + translation."""
        tri = self.triangles * np.asarray(scale, dtype=np.float64) + np.asarray(translation, dtype=np.float64)
        return replace(self, triangles=tri)

    def renamed(self, new_id: str) -> "Part":
        return replace(self, id=new_id)


@dataclass(frozen=True)
class ContactPoint:
    """Connection between two parts: four, two, or one point (quad/pair/single)."""

    part_a: str
    part_b: str
    kind: str
    points: np.ndarray  # (k, 3)

    def __post_init__(self):
        if self.part_a == self.part_b:
            raise ValueError(f"contact connects part {self.part_a!r} to itself")
        if self.kind not in CONTACT_KIND_POINTS:
            raise MalformedContactKind(f"unknown contact kind {self.kind!r}")
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if len(pts) != CONTACT_KIND_POINTS[self.kind]:
            raise MalformedContactKind(
                f"contact ({self.part_a},{self.part_b}): kind {self.kind!r} "
                f"needs {CONTACT_KIND_POINTS[self.kind]} points, got {len(pts)}")
        object.__setattr__(self, "points", pts)

    @property
    def pair(self) -> tuple[str, str]:
        return tuple(sorted((self.part_a, self.part_b)))


@dataclass(frozen=True)
class Provenance:
    """How an offspring came to be: parents, operation, and part lineage."""

    parents: tuple[str, ...]
    operation: str
    removed_group: tuple[str, ...] = ()
    incoming_group: tuple[str, ...] = ()
    incoming_origin: str | None = None
    host_parts: tuple[str, ...] = ()
    incoming_parts: tuple[str, ...] = ()
    # Which alignment the placement kept: "refined", "initial", or
    # "translation" (insertions).
    placement: str | None = None

    def to_dict(self) -> dict:
        return {
            "parents": list(self.parents),
            "operation": self.operation,
            "removed_group": list(self.removed_group),
            "incoming_group": list(self.incoming_group),
            "incoming_origin": self.incoming_origin,
            "host_parts": list(self.host_parts),
            "incoming_parts": list(self.incoming_parts),
            "placement": self.placement,
        }

    @staticmethod
    def from_dict(d: dict) -> "Provenance":
        return Provenance(
            parents=tuple(d.get("parents", ())),
            operation=d.get("operation", ""),
            removed_group=tuple(d.get("removed_group", ())),
            incoming_group=tuple(d.get("incoming_group", ())),
            incoming_origin=d.get("incoming_origin"),
            host_parts=tuple(d.get("host_parts", ())),
            incoming_parts=tuple(d.get("incoming_parts", ())),
            placement=d.get("placement"),
        )


@dataclass(eq=False)
class Shape:
    """A segmented triangle mesh with contacts, labels, and symmetry groups."""

    id: str
    parts: list[Part]
    contacts: list[ContactPoint] = field(default_factory=list)
    symmetry_groups: list[frozenset[str]] = field(default_factory=list)
    categories: frozenset[str] = frozenset()
    provenance: Provenance | None = None

    def __post_init__(self):
        self.symmetry_groups = [frozenset(g) for g in self.symmetry_groups]
        self.categories = frozenset(self.categories)
        self.validate()

    def validate(self) -> None:
        ids = [p.id for p in self.parts]
        if len(set(ids)) != len(ids):
            raise ValueError(f"shape {self.id!r}: duplicate part ids")
        known = set(ids)
        for c in self.contacts:
            for pid in (c.part_a, c.part_b):
                if pid not in known:
                    raise DanglingPartReference(
                        f"shape {self.id!r}: contact references unknown part {pid!r}")
        for group in self.symmetry_groups:
            if len(group) < 2:
                raise ValueError(f"shape {self.id!r}: symmetry group needs >= 2 parts")
            for pid in group:
                if pid not in known:
                    raise DanglingPartReference(
                        f"shape {self.id!r}: symmetry group references unknown part {pid!r}")

    # -- queries -----------------------------------------------------

    @property
    def part_ids(self) -> list[str]:
        return [p.id for p in self.parts]

    def part(self, part_id: str) -> Part:
        for p in self.parts:
            if p.id == part_id:
                return p
        raise UnknownPartId(f"shape {self.id!r} has no part {part_id!r}")

    def labels(self) -> set[str]:
        return {p.label for p in self.parts if p.label is not None}

    def label_of(self, part_id: str) -> str | None:
        return self.part(part_id).label

    @property
    def bbox(self) -> Aabb:
        return union_bbox([p.bbox for p in self.parts])

    def symmetric_part_ids(self) -> set[str]:
        out: set[str] = set()
        for g in self.symmetry_groups:
            out |= g
        return out


@dataclass(frozen=True)
class RelationGraph:
    """Parts as nodes; an edge wherever two parts share a contact point."""

    nodes: frozenset[str]
    edges: frozenset[tuple[str, str]]

    def adjacency(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {n: set() for n in self.nodes}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def neighbors(self, part_id: str) -> set[str]:
        if part_id not in self.nodes:
            raise UnknownPartId(f"graph has no node {part_id!r}")
        return self.adjacency()[part_id]


# ------------------------------------------------------------------
# Operations
# ------------------------------------------------------------------

def build_relation_graph(shape: Shape) -> RelationGraph:
    """Undirected part-adjacency graph induced by shared contact points."""
    nodes = frozenset(shape.part_ids)
    edges = {c.pair for c in shape.contacts}
    return RelationGraph(nodes=nodes, edges=frozenset(edges))


def is_connected(graph: RelationGraph, subset: set[str] | frozenset[str]) -> bool:
    """True iff the induced subgraph on ``subset`` is connected.

    Empty subsets are disconnected by convention; singletons connected.
    """
    subset = frozenset(subset)
    unknown = subset - graph.nodes
    if unknown:
        raise UnknownPartId(f"unknown part ids: {sorted(unknown)}")
    if not subset:
        return False
    adj = graph.adjacency()
    start = next(iter(subset))
    seen = {start}
    stack = [start]
    while stack:
        node = stack.pop()
        for nbr in adj[node]:
            if nbr in subset and nbr not in seen:
                seen.add(nbr)
                stack.append(nbr)
    return seen == subset


def bbox_of(part_ids: set[str] | frozenset[str], shape: Shape) -> Aabb:
    """Tight AABB over all vertices of the listed parts."""
    ids = set(part_ids)
    if not ids:
        raise EmptySelection(f"shape {shape.id!r}: empty part selection")
    return union_bbox([shape.part(pid).bbox for pid in sorted(ids)])


def _part_pair_closest(part_a: Part, part_b: Part, rng: np.random.Generator) -> tuple[float, np.ndarray, np.ndarray]:
    if len(part_a.triangles) <= EXACT_TRIANGLE_LIMIT and len(part_b.triangles) <= EXACT_TRIANGLE_LIMIT:
        return min_distance_between_triangle_sets(part_a.triangles, part_b.triangles)
    return sampled_min_distance(part_a.triangles, part_b.triangles, rng)


def detect_contact_points(shape: Shape, adjacency_eps: float | None = None) -> list[ContactPoint]:
    """Single contacts at the closest-point midpoint of each near-touching part pair.

    Pairs that already have a user-provided contact are skipped, so sidecar
    contacts override detection. ``adjacency_eps`` defaults to 1% of the
    shape's bbox diagonal.
    """
    if adjacency_eps is None:
        adjacency_eps = ADJACENCY_EPS_FRACTION * shape.bbox.diagonal
    if adjacency_eps <= 0.0:
        raise ValueError("adjacency_eps must be positive")
    provided = {c.pair for c in shape.contacts}
    rng = np.random.default_rng(stable_seed(shape.id, "contact-detect"))
    detected: list[ContactPoint] = []
    parts = sorted(shape.parts, key=lambda p: p.id)
    for i in range(len(parts)):
        for j in range(i + 1, len(parts)):
            a, b = parts[i], parts[j]
            if (a.id, b.id) in provided or (b.id, a.id) in provided:
                continue
            dist, pa, pb = _part_pair_closest(a, b, rng)
            if dist < adjacency_eps:
                midpoint = (pa + pb) / 2.0
                detected.append(ContactPoint(part_a=a.id, part_b=b.id,
                                             kind="single", points=midpoint[None, :]))
    return detected


def with_detected_contacts(shape: Shape, adjacency_eps: float | None = None) -> Shape:
    """Copy of the shape with detected contacts merged after the provided ones."""
    extra = detect_contact_points(shape, adjacency_eps)
    return Shape(id=shape.id, parts=shape.parts,
                 contacts=list(shape.contacts) + extra,
                 symmetry_groups=shape.symmetry_groups,
                 categories=shape.categories, provenance=shape.provenance)


# ------------------------------------------------------------------
# OBJ + sidecar I/O
# ------------------------------------------------------------------

def read_obj_parts(path: Path) -> dict[str, np.ndarray]:
    """Parse an OBJ file into {part id: (n,3,3) triangles}; n-gons are fanned."""
    vertices: list[tuple[float, float, float]] = []
    parts: dict[str, list] = {}
    current = "default"
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if fields[0] == "v":
            vertices.append((float(fields[1]), float(fields[2]), float(fields[3])))
        elif fields[0] in ("g", "o"):
            current = fields[1] if len(fields) > 1 else "default"
            parts.setdefault(current, [])
        elif fields[0] == "f":
            idx = [int(tok.split("/")[0]) for tok in fields[1:]]
            idx = [i - 1 if i > 0 else len(vertices) + i for i in idx]
            tris = parts.setdefault(current, [])
            for k in range(1, len(idx) - 1):
                tris.append((idx[0], idx[k], idx[k + 1]))
    verts = np.asarray(vertices, dtype=np.float64)
    out: dict[str, np.ndarray] = {}
    for name, faces in parts.items():
        if faces:
            out[name] = verts[np.asarray(faces, dtype=np.int64)]
    return out


def write_obj(shape: Shape, path: Path) -> None:
    """Write the shape as an OBJ with one group per part (no vertex sharing)."""
    lines: list[str] = [f"# shape {shape.id}"]
    offset = 1
    for part in shape.parts:
        lines.append(f"g {part.id}")
        tris = part.triangles
        for tri in tris:
            for v in tri:
                lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
        for t in range(len(tris)):
            base = offset + 3 * t
            lines.append(f"f {base} {base + 1} {base + 2}")
        offset += 3 * len(tris)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def sidecar_dict(shape: Shape) -> dict:
    return {
        "category": sorted(shape.categories)[0] if shape.categories else "",
        "categories": sorted(shape.categories),
        "labels": {p.id: p.label for p in shape.parts if p.label is not None},
        "contacts": [
            {"a": c.part_a, "b": c.part_b, "kind": c.kind,
             "points": [[float(x) for x in pt] for pt in c.points]}
            for c in shape.contacts
        ],
        "symmetry": [sorted(g) for g in shape.symmetry_groups],
        "provenance": shape.provenance.to_dict() if shape.provenance else None,
    }


def write_sidecar(shape: Shape, path: Path) -> None:
    Path(path).write_text(json.dumps(sidecar_dict(shape), indent=2, sort_keys=True),
                          encoding="utf-8")


def save_shape(shape: Shape, directory: Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_obj(shape, directory / f"{shape.id}.obj")
    write_sidecar(shape, directory / f"{shape.id}.json")


def load_shape(obj_path: Path) -> Shape:
    """Load one shape from its OBJ file plus the JSON sidecar next to it."""
    obj_path = Path(obj_path)
    sidecar_path = obj_path.with_suffix(".json")
    if not sidecar_path.exists():
        raise MissingSidecar(f"{obj_path.name}: sidecar {sidecar_path.name} not found")
    shape_id = obj_path.stem
    part_tris = read_obj_parts(obj_path)
    if not part_tris:
        raise DanglingPartReference(f"{obj_path.name}: mesh contains no parts")

    meta = json.loads(sidecar_path.read_text(encoding="utf-8"))
    labels = meta.get("labels", {}) or {}
    for pid in labels:
        if pid not in part_tris:
            raise DanglingPartReference(
                f"{sidecar_path.name}: field 'labels' references unknown part {pid!r}")

    parts = [Part(id=pid, triangles=tris, label=labels.get(pid))
             for pid, tris in sorted(part_tris.items())]

    contacts: list[ContactPoint] = []
    for k, entry in enumerate(meta.get("contacts", []) or []):
        a, b = entry.get("a"), entry.get("b")
        for pid in (a, b):
            if pid not in part_tris:
                raise DanglingPartReference(
                    f"{sidecar_path.name}: field 'contacts[{k}]' references unknown part {pid!r}")
        kind = entry.get("kind", "single")
        pts = entry.get("points", [])
        if kind not in CONTACT_KIND_POINTS or len(pts) != CONTACT_KIND_POINTS.get(kind, -1):
            raise MalformedContactKind(
                f"{sidecar_path.name}: field 'contacts[{k}]' kind {kind!r} "
                f"with {len(pts)} points")
        contacts.append(ContactPoint(part_a=a, part_b=b, kind=kind, points=np.asarray(pts)))

    symmetry: list[frozenset[str]] = []
    for k, group in enumerate(meta.get("symmetry", []) or []):
        for pid in group:
            if pid not in part_tris:
                raise DanglingPartReference(
                    f"{sidecar_path.name}: field 'symmetry[{k}]' references unknown part {pid!r}")
        symmetry.append(frozenset(group))

    categories = set(meta.get("categories") or [])
    single = meta.get("category")
    if single:
        categories.add(single)
    provenance = Provenance.from_dict(meta["provenance"]) if meta.get("provenance") else None

    return Shape(id=shape_id, parts=parts, contacts=contacts,
                 symmetry_groups=symmetry, categories=frozenset(categories),
                 provenance=provenance)


def load_population(dataset_dir: Path) -> list[Shape]:
    """Load every shape in a dataset directory, sorted by shape id."""
    dataset_dir = Path(dataset_dir)
    obj_files = sorted(dataset_dir.glob("*.obj"), key=lambda p: p.stem)
    return [load_shape(p) for p in obj_files]
