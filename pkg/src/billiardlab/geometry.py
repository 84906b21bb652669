"""Exact planar kernel: points, segments, isometries, certified predicates,
polygon validation.

All predicates run over rational arithmetic.  Coordinates entered as ints,
Fractions, or decimal/ratio strings are exact.  Coordinates entered as Python
floats are treated as *measured* values carrying an error radius tied to the
configured precision cap (``BILLIARD_PRECISION_BITS``, default 256); predicates
on measured points return ``"uncertain"`` when the sign cannot be certified at
that radius.  Integer-valued claims downstream (word counts, saddle-connection
counts) only ever rest on resolved signs.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

from .errors import (
    ClockwiseInput,
    DegenerateSegment,
    DegenerateVertex,
    SelfIntersecting,
)

CoordInput = Union[int, Fraction, str, float]

DEFAULT_PRECISION_BITS = 256

#: labels used when the caller does not supply any
_ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


def precision_bits() -> int:
    """Current precision cap for measured-coordinate predicates."""
    raw = os.environ.get("BILLIARD_PRECISION_BITS", "")
    try:
        bits = int(raw)
    except ValueError:
        return DEFAULT_PRECISION_BITS
    return bits if bits > 0 else DEFAULT_PRECISION_BITS


def as_fraction(value: CoordInput) -> Fraction:
    """Parse an exact coordinate.

    Strings accept both "p/q" and decimal notation.  Floats are converted to
    their exact binary value; use :meth:`Point2.measured` when a float should
    carry an uncertainty radius instead.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a coordinate")


@dataclass(frozen=True)
class Point2:
    """A plane point with an exact rational center and an error radius.

    ``err == 0`` marks an exact point.  Measured points (``err > 0``) make
    every predicate interval-valued.
    """

    x: Fraction
    y: Fraction
    err: Fraction = Fraction(0)

    def __post_init__(self):
        if self.err < 0:
            raise ValueError("error radius must be non-negative")

    @classmethod
    def exact(cls, x: CoordInput, y: CoordInput) -> "Point2":
        return cls(as_fraction(x), as_fraction(y))

    @classmethod
    def measured(cls, x: float, y: float, err: Optional[float] = None,
                 bits: Optional[int] = None) -> "Point2":
        """A float point known only to the precision cap.

        The default radius is ``max(1, |x|, |y|) * 2**-bits``: signs smaller
        than the cap's resolution at the point's own scale stay uncertain.
        """
        if err is None:
            p = bits if bits is not None else precision_bits()
            scale = max(1.0, abs(x), abs(y))
            radius = Fraction(scale) * Fraction(1, 2 ** p)
        else:
            radius = Fraction(err)
        return cls(Fraction(x), Fraction(y), radius)

    @property
    def is_exact(self) -> bool:
        return self.err == 0

    def as_tuple(self) -> tuple[Fraction, Fraction]:
        return (self.x, self.y)

    def as_float(self) -> tuple[float, float]:
        return (float(self.x), float(self.y))


def _coerce_point(p) -> Point2:
    if isinstance(p, Point2):
        return p
    x, y = p
    return Point2.exact(x, y)


# ---------------------------------------------------------------------------
# raw exact helpers on (Fraction, Fraction) pairs — the hot path
# ---------------------------------------------------------------------------

def cross2(ax, ay, bx, by):
    return ax * by - ay * bx


def orient_sign(p, q, r) -> int:
    """Exact orientation sign of the triple of rational pairs: +1 left / CCW."""
    d = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    return (d > 0) - (d < 0)


def orient(p, q, r) -> str:
    """Certified orientation of r relative to the directed line p->q.

    Returns one of ``"left"``, ``"right"``, ``"collinear"``, ``"uncertain"``.
    Exact inputs always resolve; measured inputs resolve only when the
    determinant clears the accumulated radius bound.
    """
    p, q, r = _coerce_point(p), _coerce_point(q), _coerce_point(r)
    det = (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x)
    if p.is_exact and q.is_exact and r.is_exact:
        if det > 0:
            return "left"
        if det < 0:
            return "right"
        return "collinear"
    # First-order sensitivity of det to each coordinate, plus a quadratic
    # cushion for the radius-radius cross terms.
    ep, eq, er = p.err, q.err, r.err
    bound = (
        (abs(r.y - q.y) + abs(r.x - q.x)) * ep
        + (abs(r.y - p.y) + abs(r.x - p.x)) * eq
        + (abs(q.y - p.y) + abs(q.x - p.x)) * er
    )
    emax = max(ep, eq, er)
    bound += 8 * emax * emax
    if det > bound:
        return "left"
    if -det > bound:
        return "right"
    return "uncertain"


def sq_dist(p, q) -> Fraction:
    dx, dy = q[0] - p[0], q[1] - p[1]
    return dx * dx + dy * dy


def point_seg_sq_dist(p, a, b) -> Fraction:
    """Exact squared distance from point p to closed segment [a, b]."""
    abx, aby = b[0] - a[0], b[1] - a[1]
    apx, apy = p[0] - a[0], p[1] - a[1]
    denom = abx * abx + aby * aby
    if denom == 0:
        return Fraction(apx * apx + apy * apy)
    t = Fraction(apx * abx + apy * aby, denom)
    if t <= 0:
        return Fraction(apx * apx + apy * apy)
    if t >= 1:
        return Fraction(sq_dist(p, b))
    cx, cy = a[0] + t * abx, a[1] + t * aby
    return Fraction(sq_dist((Fraction(p[0]), Fraction(p[1])), (cx, cy)))


def point_on_open_segment(p, a, b) -> bool:
    """Exact: is p strictly inside the open segment (a, b)?"""
    if orient_sign(a, b, p) != 0:
        return False
    abx, aby = b[0] - a[0], b[1] - a[1]
    apx, apy = p[0] - a[0], p[1] - a[1]
    t_num = apx * abx + apy * aby
    t_den = abx * abx + aby * aby
    return 0 < t_num < t_den


def segments_properly_cross(a, b, c, d) -> bool:
    """Exact: do open segments (a,b) and (c,d) cross at a single interior point?"""
    o1 = orient_sign(a, b, c)
    o2 = orient_sign(a, b, d)
    o3 = orient_sign(c, d, a)
    o4 = orient_sign(c, d, b)
    return o1 * o2 < 0 and o3 * o4 < 0


def segments_touch(a, b, c, d) -> bool:
    """Exact: do closed segments [a,b] and [c,d] share any point?"""
    o1 = orient_sign(a, b, c)
    o2 = orient_sign(a, b, d)
    o3 = orient_sign(c, d, a)
    o4 = orient_sign(c, d, b)
    if o1 * o2 < 0 and o3 * o4 < 0:
        return True
    for p, (u, v) in ((c, (a, b)), (d, (a, b)), (a, (c, d)), (b, (c, d))):
        if orient_sign(u, v, p) == 0:
            ux, uy = v[0] - u[0], v[1] - u[1]
            px, py = p[0] - u[0], p[1] - u[1]
            t_num = px * ux + py * uy
            t_den = ux * ux + uy * uy
            if 0 <= t_num <= t_den:
                return True
    return False


# ---------------------------------------------------------------------------
# convex hulls over exact points (used by the transversal beams)
# ---------------------------------------------------------------------------

def convex_hull(points: Sequence[tuple]) -> tuple:
    """Monotone-chain hull, CCW, degenerate inputs allowed (point / segment)."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return tuple(pts)
    lower = []
    for p in pts:
        while len(lower) >= 2 and orient_sign(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and orient_sign(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return tuple(lower[:-1] + upper[:-1])


def _point_in_convex(p, hull) -> bool:
    """Closed containment of p in a hull (point/segment/polygon)."""
    if not hull:
        return False
    if len(hull) == 1:
        return p == hull[0]
    if len(hull) == 2:
        a, b = hull
        if orient_sign(a, b, p) != 0:
            return False
        ux, uy = b[0] - a[0], b[1] - a[1]
        px, py = p[0] - a[0], p[1] - a[1]
        t_num = px * ux + py * uy
        t_den = ux * ux + uy * uy
        return 0 <= t_num <= t_den
    n = len(hull)
    for i in range(n):
        if orient_sign(hull[i], hull[(i + 1) % n], p) < 0:
            return False
    return True


def _hull_edges(hull):
    if len(hull) < 2:
        return
    if len(hull) == 2:
        yield hull[0], hull[1]
        return
    n = len(hull)
    for i in range(n):
        yield hull[i], hull[(i + 1) % n]


def convex_hulls_disjoint(h1: tuple, h2: tuple) -> bool:
    """Exact set-disjointness of two hulls (each a point, segment, or polygon).

    Touching counts as intersecting: a strict separating line exists iff this
    returns True.
    """
    if not h1 or not h2:
        return True
    for p in h1:
        if _point_in_convex(p, h2):
            return False
    for p in h2:
        if _point_in_convex(p, h1):
            return False
    for a, b in _hull_edges(h1):
        for c, d in _hull_edges(h2):
            if segments_touch(a, b, c, d):
                return False
    return True


def hull_closest_pair(h1: tuple, h2: tuple) -> tuple:
    """Closest pair of points between two disjoint hulls (exact rationals).

    Brute force over vertex-vertex and vertex-edge features; hull sizes stay
    small in the beams this serves.
    """
    best = None
    best_pair = None

    def consider(p, q):
        nonlocal best, best_pair
        d = sq_dist(p, q)
        if best is None or d < best:
            best = d
            best_pair = (p, q)

    def foot(p, a, b):
        abx, aby = b[0] - a[0], b[1] - a[1]
        denom = abx * abx + aby * aby
        if denom == 0:
            return a
        t = Fraction((p[0] - a[0]) * abx + (p[1] - a[1]) * aby, denom)
        t = min(max(t, Fraction(0)), Fraction(1))
        return (a[0] + t * abx, a[1] + t * aby)

    for p in h1:
        for q in h2:
            consider(p, q)
        for c, d in _hull_edges(h2):
            consider(p, foot(p, c, d))
    for q in h2:
        for a, b in _hull_edges(h1):
            consider(foot(q, a, b), q)
    return best_pair


# ---------------------------------------------------------------------------
# segments and isometries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SegmentG:
    """Directed segment with exact endpoints."""

    a: Point2
    b: Point2

    def __post_init__(self):
        if self.a.as_tuple() == self.b.as_tuple():
            raise DegenerateSegment("segment endpoints coincide")

    @property
    def direction(self) -> tuple[Fraction, Fraction]:
        return (self.b.x - self.a.x, self.b.y - self.a.y)

    def length(self) -> float:
        return math.sqrt(float(sq_dist(self.a.as_tuple(), self.b.as_tuple())))

    def sq_length(self) -> Fraction:
        return sq_dist(self.a.as_tuple(), self.b.as_tuple())


@dataclass(frozen=True)
class IsometryFrame:
    """Orthogonal map ``p -> R p + t`` with exact rational entries.

    ``parity`` is the determinant sign: +1 for rotations, -1 for reflections.
    """

    rxx: Fraction
    rxy: Fraction
    ryx: Fraction
    ryy: Fraction
    tx: Fraction
    ty: Fraction
    parity: int

    @classmethod
    def identity(cls) -> "IsometryFrame":
        one, zero = Fraction(1), Fraction(0)
        return cls(one, zero, zero, one, zero, zero, 1)

    def apply(self, p) -> tuple[Fraction, Fraction]:
        x, y = p
        return (self.rxx * x + self.rxy * y + self.tx,
                self.ryx * x + self.ryy * y + self.ty)

    def apply_vector(self, v) -> tuple[Fraction, Fraction]:
        x, y = v
        return (self.rxx * x + self.rxy * y, self.ryx * x + self.ryy * y)

    def compose(self, other: "IsometryFrame") -> "IsometryFrame":
        """self ∘ other (apply ``other`` first)."""
        return IsometryFrame(
            self.rxx * other.rxx + self.rxy * other.ryx,
            self.rxx * other.rxy + self.rxy * other.ryy,
            self.ryx * other.rxx + self.ryy * other.ryx,
            self.ryx * other.rxy + self.ryy * other.ryy,
            self.rxx * other.tx + self.rxy * other.ty + self.tx,
            self.ryx * other.tx + self.ryy * other.ty + self.ty,
            self.parity * other.parity,
        )

    def inverse(self) -> "IsometryFrame":
        # orthogonal: R^-1 = R^T
        rxx, rxy, ryx, ryy = self.rxx, self.ryx, self.rxy, self.ryy
        tx = -(rxx * self.tx + rxy * self.ty)
        ty = -(ryx * self.tx + ryy * self.ty)
        return IsometryFrame(rxx, rxy, ryx, ryy, tx, ty, self.parity)


def reflect_across(line: SegmentG) -> IsometryFrame:
    """Reflection across the supporting line of a segment (parity -1)."""
    ax, ay = line.a.as_tuple()
    dx, dy = line.direction
    n2 = dx * dx + dy * dy
    if n2 == 0:
        raise DegenerateSegment("cannot reflect across a degenerate segment")
    rxx = (dx * dx - dy * dy) / n2
    rxy = 2 * dx * dy / n2
    ryy = (dy * dy - dx * dx) / n2
    # t = a - R a
    tx = ax - (rxx * ax + rxy * ay)
    ty = ay - (rxy * ax + ryy * ay)
    return IsometryFrame(rxx, rxy, rxy, ryy, tx, ty, -1)


# ---------------------------------------------------------------------------
# polygons
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PolygonTable:
    """Validated simple polygon with labeled sides (CCW orientation).

    Exact rational data drives the certified enumeration; the float mirrors
    (side lengths, offsets) drive the numeric dynamics.
    """

    name: str
    vertices: tuple  # tuple of Point2, CCW
    labels: tuple  # side i runs vertices[i] -> vertices[i+1]
    sides: tuple  # tuple of SegmentG
    side_lengths: tuple  # floats
    side_offsets: tuple  # floats, arc-length start of each side
    perimeter: float
    diameter: float
    diameter_sq: Fraction
    convex: bool
    nonconvex_clearance: float  # +inf when convex
    nonconvex_clearance_sq: Optional[Fraction]
    reflex_vertices: tuple  # indices of reflex vertices
    area: Fraction

    @property
    def num_sides(self) -> int:
        return len(self.sides)

    def side_index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            from .errors import UnknownSide
            raise UnknownSide(f"no side labeled {label!r}") from None

    def vertex_tuples(self) -> tuple:
        return tuple(v.as_tuple() for v in self.vertices)

    def side_tuple(self, i: int) -> tuple:
        s = self.sides[i]
        return (s.a.as_tuple(), s.b.as_tuple())

    def is_exact(self) -> bool:
        return all(v.is_exact for v in self.vertices)

    def vertex_id_of(self, pt) -> Optional[int]:
        for i, v in enumerate(self.vertices):
            if v.as_tuple() == tuple(pt):
                return i
        return None

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "labels": list(self.labels),
            "vertices": [[str(v.x), str(v.y)] for v in self.vertices],
        }


def _signed_area2(pts: Sequence[tuple]) -> Fraction:
    total = Fraction(0)
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        total += x0 * y1 - x1 * y0
    return total


def validate_polygon(vertices: Iterable, labels: Optional[Sequence[str]] = None,
                     name: str = "polygon", allow_clockwise: bool = False) -> PolygonTable:
    """Validate vertex input and assemble the polygon table.

    Raises :class:`DegenerateVertex`, :class:`SelfIntersecting`, or
    :class:`ClockwiseInput` (the latter only when ``allow_clockwise`` is off).
    """
    pts = [_coerce_point(v) for v in vertices]
    if len(pts) < 3:
        raise DegenerateVertex("a polygon needs at least 3 vertices")
    raw = [p.as_tuple() for p in pts]
    n = len(raw)

    if len(set(raw)) != n:
        raise DegenerateVertex("repeated vertex")

    # simplicity first (orientation-independent): non-adjacent closed sides
    # must not touch at all
    for i in range(n):
        a, b = raw[i], raw[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            c, d = raw[j], raw[(j + 1) % n]
            if segments_touch(a, b, c, d):
                raise SelfIntersecting(f"sides {i} and {j} intersect")

    area2 = _signed_area2(raw)
    if area2 == 0:
        raise DegenerateVertex("zero-area vertex cycle")
    if area2 < 0:
        if not allow_clockwise:
            raise ClockwiseInput(
                "vertices are clockwise; pass allow_clockwise=True to auto-reverse")
        pts.reverse()
        raw.reverse()
        area2 = -area2

    turn_signs = []
    for i in range(n):
        o = orient(pts[i - 1], pts[i], pts[(i + 1) % n])
        if o == "collinear":
            raise DegenerateVertex(f"vertices {i-1},{i},{i+1} are collinear")
        if o == "uncertain":
            raise DegenerateVertex(
                f"turn at vertex {i} unresolved at the precision cap")
        turn_signs.append(1 if o == "left" else -1)

    if labels is None:
        if n > len(_ALPHABET):
            labels = tuple(f"S{i}" for i in range(n))
        else:
            labels = tuple(_ALPHABET[i] for i in range(n))
    else:
        labels = tuple(str(x) for x in labels)
        if len(labels) != n:
            raise DegenerateVertex("label count differs from side count")
        if len(set(labels)) != n:
            raise DegenerateVertex("side labels must be distinct")

    sides = tuple(SegmentG(pts[i], pts[(i + 1) % n]) for i in range(n))
    side_lengths = tuple(s.length() for s in sides)
    offsets = []
    acc = 0.0
    for L in side_lengths:
        offsets.append(acc)
        acc += L
    perimeter = acc

    diameter_sq = max(sq_dist(raw[i], raw[j])
                      for i in range(n) for j in range(i + 1, n))
    convex = all(t > 0 for t in turn_signs)
    reflex = tuple(i for i, t in enumerate(turn_signs) if t < 0)

    clearance_sq: Optional[Fraction] = None
    if not convex:
        best = None
        for i in reflex:
            for j in range(n):
                if j == i or (j + 1) % n == i:
                    continue  # incident sides
                d = point_seg_sq_dist(raw[i], raw[j], raw[(j + 1) % n])
                if best is None or d < best:
                    best = d
        clearance_sq = best

    return PolygonTable(
        name=name,
        vertices=tuple(pts),
        labels=labels,
        sides=sides,
        side_lengths=side_lengths,
        side_offsets=tuple(offsets),
        perimeter=perimeter,
        diameter=math.sqrt(float(diameter_sq)),
        diameter_sq=diameter_sq,
        convex=convex,
        nonconvex_clearance=(math.inf if convex
                             else math.sqrt(float(clearance_sq))),
        nonconvex_clearance_sq=clearance_sq,
        reflex_vertices=reflex,
        area=area2 / 2,
    )


# ---------------------------------------------------------------------------
# JSON interface:  {"name": ..., "labels": [...], "vertices": [[x, y], ...]}
# where a coordinate is a JSON number or a string "p/q" / decimal string.
# JSON numbers parse as exact decimals, not as binary floats.
# ---------------------------------------------------------------------------

def polygon_from_json(text: str, allow_clockwise: bool = False) -> PolygonTable:
    data = json.loads(text, parse_float=Fraction, parse_int=Fraction)
    verts = [(as_fraction(x), as_fraction(y)) for x, y in data["vertices"]]
    return validate_polygon(
        verts,
        labels=data.get("labels"),
        name=data.get("name", "polygon"),
        allow_clockwise=allow_clockwise,
    )


def load_polygon(path: str, allow_clockwise: bool = False) -> PolygonTable:
    with open(path, "r", encoding="utf-8") as fh:
        return polygon_from_json(fh.read(), allow_clockwise=allow_clockwise)


def polygon_to_json(poly: PolygonTable) -> str:
    return json.dumps(poly.to_json_dict(), indent=2)
