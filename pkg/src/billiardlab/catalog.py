"""Built-in polygons used across experiments and tests."""

from __future__ import annotations

from fractions import Fraction

from .geometry import PolygonTable, validate_polygon

# Figure-style staircase, counterclockwise order.  The commonly quoted vertex
# list for this shape runs clockwise; this is its reversal.
_STAIRCASE_CCW = [
    ("1", "1/2"),
    ("1", "0"),
    ("11/5", "0"),
    ("11/5", "1"),
    ("2", "1"),
    ("2", "2"),
    ("1", "2"),
    ("1", "5/2"),
    ("0", "5/2"),
    ("0", "2"),
    ("-1/5", "2"),
    ("-1/5", "1"),
    ("0", "1"),
    ("0", "1/2"),
]

#: indices (in CCW order above) of the dotted-chain corners
#: (1,0) -> (2,1) -> (1,2) -> (0,1)
STAIRCASE_CHAIN_VERTEX_IDS = (1, 4, 6, 12)

#: vertex displacements realizing the bump-lowering morph
#: (2,1) -> (2,0.8) and (2.2,1) -> (2.2,0.8)
STAIRCASE_MORPH = {3: (Fraction(0), Fraction(-1, 5)),
                   4: (Fraction(0), Fraction(-1, 5))}


def unit_square() -> PolygonTable:
    return validate_polygon([(0, 0), (1, 0), (1, 1), (0, 1)], name="unit-square")


def right_triangle() -> PolygonTable:
    return validate_polygon([(0, 0), (1, 0), (0, 1)], name="right-triangle")


def staircase() -> PolygonTable:
    return validate_polygon(_STAIRCASE_CCW, name="staircase")


def staircase_displacements() -> list:
    """Per-vertex displacement vectors for the bump-lowering family."""
    disp = [(Fraction(0), Fraction(0))] * len(_STAIRCASE_CCW)
    for idx, vec in STAIRCASE_MORPH.items():
        disp[idx] = vec
    return disp


NAMED = {
    "unit-square": unit_square,
    "right-triangle": right_triangle,
    "staircase": staircase,
}
