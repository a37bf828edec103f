"""Procedural fixture corpus: small labeled furniture and cart shapes.

Every fixture is built from axis-aligned boxes with outward-facing
windings, sits on the ground plane z = 0, and is sized in a common
world scale (roughly 0.4 to 1.2 units tall). The corpus doubles as
the training set for the reference category models and as the test
population for the evolution pipeline.
"""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

import numpy as np

from .shape_model import Part, Shape, detect_contact_points, save_shape

# The four-shape population used by the constrained-evolution demos.
EVOLUTION_POPULATION = ("cart_basic", "chair_basic", "shelf_3board", "table_basic")


def box_triangles(lo, hi) -> np.ndarray:
    """12 triangles of an axis-aligned box, wound outward."""
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    quads = [
        # +z, -z
        [(x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1)],
        [(x0, y0, z0), (x0, y1, z0), (x1, y1, z0), (x1, y0, z0)],
        # +x, -x
        [(x1, y0, z0), (x1, y1, z0), (x1, y1, z1), (x1, y0, z1)],
        [(x0, y0, z0), (x0, y0, z1), (x0, y1, z1), (x0, y1, z0)],
        # +y, -y
        [(x0, y1, z0), (x0, y1, z1), (x1, y1, z1), (x1, y1, z0)],
        [(x0, y0, z0), (x1, y0, z0), (x1, y0, z1), (x0, y0, z1)],
    ]
    tris = []
    for q in quads:
        tris.append((q[0], q[1], q[2]))
        tris.append((q[0], q[2], q[3]))
    return np.asarray(tris, dtype=np.float64)


def box_part(pid: str, lo, hi, label: str | None = None) -> Part:
    return Part(id=pid, triangles=box_triangles(lo, hi), label=label)


def _corner_posts(x0, y0, x1, y1, w, z0, z1, label, prefix="leg"):
    """Four posts at the corners of the (x0,y0)-(x1,y1) footprint."""
    corners = [(x0, y0), (x1 - w, y0), (x0, y1 - w), (x1 - w, y1 - w)]
    return [box_part(f"{prefix}{i + 1}", (cx, cy, z0), (cx + w, cy + w, z1), label)
            for i, (cx, cy) in enumerate(corners)]


def _assemble(shape_id: str, parts: list[Part], category: str,
              symmetry: list[list[str]]) -> Shape:
    shape = Shape(id=shape_id, parts=parts, contacts=[],
                  symmetry_groups=[frozenset(g) for g in symmetry],
                  categories=frozenset([category]))
    contacts = detect_contact_points(shape)
    return Shape(id=shape_id, parts=parts, contacts=contacts,
                 symmetry_groups=[frozenset(g) for g in symmetry],
                 categories=frozenset([category]))


# ------------------------------------------------------------------
# Chairs
# ------------------------------------------------------------------

def _chair(shape_id: str, width: float, back_height: float,
           leg_w: float = 0.05, seat_z: float = 0.40,
           with_back: bool = True) -> Shape:
    seat_top = seat_z + 0.05
    parts = [box_part("seat", (0.0, 0.0, seat_z), (width, width, seat_top), "sitting")]
    if with_back:
        parts.append(box_part("back", (0.0, width - 0.05, seat_top),
                              (width, width, seat_top + back_height), "leaning"))
    parts += _corner_posts(0.0, 0.0, width, width, leg_w, 0.0, seat_z, "support")
    return _assemble(shape_id, parts, "chair",
                     [["leg1", "leg2", "leg3", "leg4"]])


def make_chair_basic() -> Shape:
    return _chair("chair_basic", width=0.45, back_height=0.45)


def make_chair_wide() -> Shape:
    return _chair("chair_wide", width=0.60, back_height=0.40)


def make_chair_stool() -> Shape:
    return _chair("chair_stool", width=0.40, back_height=0.0, with_back=False)


def make_chair_lowback() -> Shape:
    return _chair("chair_lowback", width=0.45, back_height=0.25)


def make_chair_thick() -> Shape:
    return _chair("chair_thick", width=0.50, back_height=0.45, leg_w=0.08)


def make_bench() -> Shape:
    parts = [
        box_part("seat", (0.0, 0.0, 0.38), (0.95, 0.35, 0.44), "sitting"),
        box_part("slab1", (0.05, 0.02, 0.0), (0.12, 0.33, 0.38), "support"),
        box_part("slab2", (0.83, 0.02, 0.0), (0.90, 0.33, 0.38), "support"),
    ]
    return _assemble("bench", parts, "chair", [["slab1", "slab2"]])


# ------------------------------------------------------------------
# Tables
# ------------------------------------------------------------------

def _table(shape_id: str, length: float, depth: float, height: float,
           leg_w: float = 0.05) -> Shape:
    parts = [box_part("top", (0.0, 0.0, height), (length, depth, height + 0.05),
                      "placement")]
    parts += _corner_posts(0.0, 0.0, length, depth, leg_w, 0.0, height, "support")
    return _assemble(shape_id, parts, "table",
                     [["leg1", "leg2", "leg3", "leg4"]])


def make_table_basic() -> Shape:
    return _table("table_basic", length=0.80, depth=0.80, height=0.70)


def make_table_low() -> Shape:
    return _table("table_low", length=0.90, depth=0.50, height=0.48)


def make_table_long() -> Shape:
    return _table("table_long", length=1.20, depth=0.60, height=0.72)


def make_table_side() -> Shape:
    return _table("table_side", length=0.45, depth=0.45, height=0.55)


def make_desk() -> Shape:
    parts = [
        box_part("top", (0.0, 0.0, 0.70), (1.10, 0.55, 0.75), "placement"),
        box_part("panel1", (0.03, 0.02, 0.0), (0.10, 0.53, 0.70), "support"),
        box_part("panel2", (1.00, 0.02, 0.0), (1.07, 0.53, 0.70), "support"),
    ]
    return _assemble("desk", parts, "table", [["panel1", "panel2"]])


# ------------------------------------------------------------------
# Shelves
# ------------------------------------------------------------------

def _shelf(shape_id: str, width: float, depth: float, height: float,
           board_zs: list[float], with_back: bool = False) -> Shape:
    side_w = 0.05
    parts = [
        box_part("side1", (0.0, 0.0, 0.0), (side_w, depth, height), "support"),
        box_part("side2", (width - side_w, 0.0, 0.0), (width, depth, height), "support"),
    ]
    for i, z in enumerate(board_zs):
        parts.append(box_part(f"board{i + 1}", (side_w, 0.0, z),
                              (width - side_w, depth, z + 0.04), "placement"))
    if with_back:
        parts.append(box_part("backpanel", (0.0, depth, 0.0),
                              (width, depth + 0.03, height)))
    return _assemble(shape_id, parts, "shelf", [["side1", "side2"]])


def make_shelf_2board() -> Shape:
    return _shelf("shelf_2board", width=0.70, depth=0.30, height=0.80,
                  board_zs=[0.15, 0.55])


def make_shelf_3board() -> Shape:
    return _shelf("shelf_3board", width=0.70, depth=0.30, height=1.05,
                  board_zs=[0.10, 0.45, 0.80])


def make_shelf_wide() -> Shape:
    return _shelf("shelf_wide", width=1.00, depth=0.35, height=0.90,
                  board_zs=[0.12, 0.55])


def make_bookcase() -> Shape:
    return _shelf("bookcase", width=0.80, depth=0.28, height=1.10,
                  board_zs=[0.12, 0.50, 0.88], with_back=True)


def make_shelf_low() -> Shape:
    return _shelf("shelf_low", width=0.80, depth=0.32, height=0.50,
                  board_zs=[0.10, 0.34])


# ------------------------------------------------------------------
# Carts
# ------------------------------------------------------------------

def _handle_part(x0: float, x1: float, y0: float, y1: float,
                 base_z: float, grip_z: float) -> Part:
    """Vertical post plus horizontal grip bar, as one part."""
    cx = (x0 + x1) / 2.0
    post = box_triangles((cx - 0.025, y0, base_z), (cx + 0.025, y1, grip_z))
    grip = box_triangles((x0, y0, grip_z), (x1, y1, grip_z + 0.05))
    return Part(id="handle", triangles=np.concatenate([post, grip]), label="grasping")


def _wheels(x0, y0, x1, y1, size, height, label="rolling"):
    corners = [(x0, y0), (x1 - size, y0), (x0, y1 - size), (x1 - size, y1 - size)]
    return [box_part(f"wheel{i + 1}", (cx, cy, 0.0), (cx + size, cy + size, height), label)
            for i, (cx, cy) in enumerate(corners)]


def _cart(shape_id: str, length: float, depth: float,
          wheel: float = 0.10, deck_z: float = 0.10,
          with_handle: bool = True, walls: bool = False,
          second_deck: float | None = None) -> Shape:
    parts = _wheels(0.0, 0.0, length, depth, wheel, wheel)
    parts.append(box_part("deck", (0.0, 0.0, deck_z), (length, depth, deck_z + 0.05),
                          "placement"))
    symmetry = [["wheel1", "wheel2", "wheel3", "wheel4"]]
    if second_deck is not None:
        parts.append(box_part("deck2", (0.0, 0.0, second_deck),
                              (length, depth, second_deck + 0.05), "placement"))
    if walls:
        parts.append(box_part("wall1", (0.0, 0.0, deck_z + 0.05),
                              (0.05, depth, deck_z + 0.40), "storage"))
        parts.append(box_part("wall2", (length - 0.05, 0.0, deck_z + 0.05),
                              (length, depth, deck_z + 0.40), "storage"))
        symmetry.append(["wall1", "wall2"])
    if with_handle:
        parts.append(_handle_part(0.15, min(0.55, length - 0.15),
                                  depth - 0.05, depth, deck_z + 0.05, 0.85))
    return _assemble(shape_id, parts, "cart", symmetry)


def make_cart_basic() -> Shape:
    return _cart("cart_basic", length=0.70, depth=0.45)


def make_cart_tray() -> Shape:
    return _cart("cart_tray", length=0.75, depth=0.45, second_deck=0.55)


def make_wagon() -> Shape:
    return _cart("wagon", length=0.80, depth=0.50, with_handle=False, walls=True)


def make_trolley() -> Shape:
    return _cart("trolley", length=0.60, depth=0.40, wheel=0.08, deck_z=0.08)


def make_cart_small() -> Shape:
    return _cart("cart_small", length=0.50, depth=0.35, wheel=0.08, deck_z=0.08)


def make_cart_flat() -> Shape:
    return _cart("cart_flat", length=0.90, depth=0.55, with_handle=False)


# ------------------------------------------------------------------
# Corpus assembly
# ------------------------------------------------------------------

_BUILDERS = (
    make_bench,
    make_bookcase,
    make_cart_basic,
    make_cart_flat,
    make_cart_small,
    make_cart_tray,
    make_chair_basic,
    make_chair_lowback,
    make_chair_stool,
    make_chair_thick,
    make_chair_wide,
    make_desk,
    make_shelf_2board,
    make_shelf_3board,
    make_shelf_low,
    make_shelf_wide,
    make_table_basic,
    make_table_long,
    make_table_low,
    make_table_side,
    make_trolley,
    make_wagon,
)


@lru_cache(maxsize=1)
def _corpus_cached() -> tuple[Shape, ...]:
    shapes = tuple(sorted((build() for build in _BUILDERS), key=lambda s: s.id))
    return shapes


def build_corpus() -> list[Shape]:
    """All fixture shapes, sorted by id."""
    return list(_corpus_cached())


def corpus_by_id() -> dict[str, Shape]:
    return {s.id: s for s in build_corpus()}


def fixture(shape_id: str) -> Shape:
    return corpus_by_id()[shape_id]


def fixture_ids_by_category() -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for shape in build_corpus():
        for cat in sorted(shape.categories):
            out.setdefault(cat, []).append(shape.id)
    return out


def write_corpus_dataset(directory: Path, ids: tuple[str, ...] | None = None) -> list[str]:
    """Write fixtures as an OBJ+sidecar dataset; returns the shape ids."""
    directory = Path(directory)
    chosen = build_corpus() if ids is None else [fixture(i) for i in ids]
    for shape in chosen:
        save_shape(shape, directory)
    return [s.id for s in chosen]
