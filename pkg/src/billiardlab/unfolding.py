"""Word unfoldings, directed-line beams, saddle connections and chains.

A word ``w[0..n-1]`` over the side alphabet unfolds into a corridor of polygon
copies: frame 0 is the identity and frame j+1 composes frame j with the
reflection across side ``w[j+1]``.  Window j is the copy-j image of side
``w[j]``, directed so the copy interior lies on its left.  A directed line
realizes the word iff every window's left endpoint lies strictly left of the
line and every right endpoint strictly right; the feasible set is therefore
nonempty iff the convex hulls of the left-endpoint set and right-endpoint set
are disjoint.  For convex polygons that test is exact in both directions; for
non-convex polygons it is a certified necessary condition and verdicts are
upgraded to ``nonempty`` only with an explicitly verified witness line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .errors import DegenerateSegment, UnknownSide
from .geometry import (
    IsometryFrame,
    PolygonTable,
    SegmentG,
    convex_hull,
    convex_hulls_disjoint,
    hull_closest_pair,
    orient_sign,
    point_on_open_segment,
    point_seg_sq_dist,
    reflect_across,
    sq_dist,
)

# ---------------------------------------------------------------------------
# raw frames: (rxx, rxy, ryx, ryy, tx, ty, parity) tuples on the hot path
# ---------------------------------------------------------------------------

_ZERO = Fraction(0)
RAW_IDENTITY = (1, 0, 0, 1, 0, 0, 1)


def raw_apply(f, p):
    x, y = p
    return (f[0] * x + f[1] * y + f[4], f[2] * x + f[3] * y + f[5])


def raw_apply_vec(f, v):
    x, y = v
    return (f[0] * x + f[1] * y, f[2] * x + f[3] * y)


def raw_compose(f, g):
    """f ∘ g (g applied first)."""
    return (
        f[0] * g[0] + f[1] * g[2],
        f[0] * g[1] + f[1] * g[3],
        f[2] * g[0] + f[3] * g[2],
        f[2] * g[1] + f[3] * g[3],
        f[0] * g[4] + f[1] * g[5] + f[4],
        f[2] * g[4] + f[3] * g[5] + f[5],
        f[6] * g[6],
    )


def raw_inverse(f):
    rxx, rxy, ryx, ryy = f[0], f[2], f[1], f[3]
    tx = -(rxx * f[4] + rxy * f[5])
    ty = -(ryx * f[4] + ryy * f[5])
    return (rxx, rxy, ryx, ryy, tx, ty, f[6])


def raw_to_frame(f) -> IsometryFrame:
    return IsometryFrame(f[0], f[1], f[2], f[3], f[4], f[5], f[6])


class Corridor:
    """Per-polygon cache of exact side data and reflection frames.

    When the polygon admits an integer model (integer vertices after clearing
    denominators, with every side reflection still integral — true for
    axis-aligned and many lattice polygons), the whole corridor runs on plain
    ints, which is several times faster than Fraction arithmetic.  ``scale``
    records the coordinate blow-up; public outputs must be divided back.
    """

    def __init__(self, poly: PolygonTable):
        self.poly = poly
        orig = poly.vertex_tuples()
        n = len(orig)
        scale = 1
        for x, y in orig:
            scale = scale * x.denominator // math.gcd(scale, x.denominator)
            scale = scale * y.denominator // math.gcd(scale, y.denominator)
        scaled = tuple((int(x * scale), int(y * scale)) for x, y in orig)
        refl = []
        integral = True
        for i in range(n):
            a, b = scaled[i], scaled[(i + 1) % n]
            f = self._reflection_from(a, b)
            integral = integral and all(
                v.denominator == 1 for v in f[:6])
            refl.append(f)
        if integral:
            self.scale = scale
            self.verts = scaled
            self.side_refl = tuple(
                tuple(int(v) for v in f[:6]) + (-1,) for f in refl)
        else:
            self.scale = 1
            self.verts = orig
            self.side_refl = tuple(
                self._reflection_from(orig[i], orig[(i + 1) % n])
                for i in range(n))
        self.side_ends = tuple((self.verts[i], self.verts[(i + 1) % n])
                               for i in range(n))
        self.num_sides = n
        # incident side indices per vertex: vertex i joins side i-1 and side i
        self.incident = tuple(((i - 1) % n, i) for i in range(n))

    @staticmethod
    def _reflection_from(a, b):
        dx, dy = b[0] - a[0], b[1] - a[1]
        n2 = dx * dx + dy * dy
        rxx = Fraction(dx * dx - dy * dy, n2)
        rxy = Fraction(2 * dx * dy, n2)
        ryy = Fraction(dy * dy - dx * dx, n2)
        tx = a[0] - (rxx * a[0] + rxy * a[1])
        ty = a[1] - (rxy * a[0] + ryy * a[1])
        return (rxx, rxy, rxy, ryy, tx, ty, -1)

    def window(self, frame, side_idx):
        """Directed window (A, B): copy interior strictly left of A→B."""
        a, b = self.side_ends[side_idx]
        wa, wb = raw_apply(frame, a), raw_apply(frame, b)
        return (wa, wb) if frame[6] == 1 else (wb, wa)

    def extend_frame(self, frame, side_idx):
        return raw_compose(frame, self.side_refl[side_idx])

    def unscale_point(self, p):
        if self.scale == 1:
            return (Fraction(p[0]), Fraction(p[1]))
        return (Fraction(p[0], self.scale), Fraction(p[1], self.scale))

    def unscale_sq(self, s):
        if self.scale == 1:
            return Fraction(s)
        return Fraction(s, self.scale * self.scale)

    def unscale_frame(self, f):
        if self.scale == 1:
            return tuple(Fraction(v) for v in f[:6]) + (f[6],)
        return (Fraction(f[0]), Fraction(f[1]), Fraction(f[2]),
                Fraction(f[3]), Fraction(f[4], self.scale),
                Fraction(f[5], self.scale), f[6])


_corridor_cache: dict = {}


def corridor_for(poly: PolygonTable) -> Corridor:
    key = id(poly)
    hit = _corridor_cache.get(key)
    if hit is None or hit.poly is not poly:
        hit = Corridor(poly)
        _corridor_cache[key] = hit
    return hit


def _word_indices(poly: PolygonTable, word) -> list:
    if isinstance(word, str):
        symbols = list(word)
    else:
        symbols = list(word)
    try:
        return [poly.labels.index(s) for s in symbols]
    except ValueError as exc:
        raise UnknownSide(str(exc)) from None


def word_frames_windows(poly: PolygonTable, word):
    """Frames F_j and directed windows E_j for a word (exact)."""
    cor = corridor_for(poly)
    idx = _word_indices(poly, word)
    frames = []
    windows = []
    f = RAW_IDENTITY
    for j, s in enumerate(idx):
        if j > 0:
            f = cor.extend_frame(f, s)
        frames.append(f)
        windows.append(cor.window(f, s))
    return idx, frames, windows


# ---------------------------------------------------------------------------
# public unfold API
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UnfoldedEdge:
    """One window of a word corridor: the copy-j image of side word[j]."""

    seg: SegmentG
    source_side: str
    frame: IsometryFrame
    window: tuple  # directed (A, B) with the copy interior left of A->B


def unfold_word(poly: PolygonTable, start_side: str, word) -> list:
    """Unfolded edges of a word; requires word[0] == start_side."""
    symbols = list(word) if not isinstance(word, str) else list(word)
    if not symbols:
        raise UnknownSide("empty word")
    if str(symbols[0]) != str(start_side):
        raise UnknownSide(
            f"word starts with {symbols[0]!r}, not {start_side!r}")
    from .geometry import Point2
    cor = corridor_for(poly)
    _, frames, windows = word_frames_windows(poly, symbols)
    out = []
    for sym, f, win in zip(symbols, frames, windows):
        a = Point2(*cor.unscale_point(win[0]))
        b = Point2(*cor.unscale_point(win[1]))
        out.append(UnfoldedEdge(
            seg=SegmentG(a, b), source_side=str(sym),
            frame=raw_to_frame(cor.unscale_frame(f)),
            window=(a.as_tuple(), b.as_tuple())))
    return out


# ---------------------------------------------------------------------------
# beams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Beam:
    """Persistent feasibility state for a word corridor.

    ``verdict`` is "nonempty", "empty", or "uncertain".  Nonempty beams carry
    a witness directed line (two exact points); empty beams carry the hull
    contact that kills every candidate line.
    """

    windows: tuple
    left_hull: tuple
    right_hull: tuple
    verdict: str
    witness: Optional[tuple]  # (p, q) exact points, direction p->q
    separator: Optional[str]


def _hull_witness(left_hull, right_hull):
    """Strict separating line from the closest pair of two disjoint hulls."""
    p, q = hull_closest_pair(left_hull, right_hull)
    mx, my = Fraction(p[0] + q[0], 2), Fraction(p[1] + q[1], 2)
    # direction perpendicular to the gap
    gx, gy = q[0] - p[0], q[1] - p[1]
    d = (-gy, gx)
    a = (mx, my)
    b = (mx + d[0], my + d[1])
    # orient so the left hull really is on the left
    if orient_sign(a, b, p) < 0:
        b = (mx - d[0], my - d[1])
    return (a, b)


def candidate_lines(windows, hull_witness):
    """Witness candidates for a non-convex corridor: the hull-gap separator
    plus lines through interior points of the first and last windows."""
    cands = []
    if hull_witness is not None:
        cands.append(hull_witness)
    wa0, wb0 = windows[0]
    wan, wbn = windows[-1]
    fracs = (Fraction(1, 2), Fraction(1, 4), Fraction(3, 4))
    for fu in fracs:
        p = (wa0[0] + fu * (wb0[0] - wa0[0]), wa0[1] + fu * (wb0[1] - wa0[1]))
        for fv in fracs:
            q = (wan[0] + fv * (wbn[0] - wan[0]),
                 wan[1] + fv * (wbn[1] - wan[1]))
            if p != q:
                cands.append((p, q))
    return cands


def beam_verdict(poly: PolygonTable, word, windows, left_hull, right_hull,
                 prev_witness=None, want_witness=True):
    """(verdict, witness, separator) for a corridor given its endpoint hulls.

    Hull overlap certifies emptiness for every polygon.  Disjoint hulls settle
    convex polygons outright; non-convex corridors additionally verify a
    witness line against blocking sides (trying ``prev_witness`` first),
    reporting ``uncertain`` when the search budget finds none.
    """
    if not convex_hulls_disjoint(left_hull, right_hull):
        return "empty", None, "left/right endpoint hulls meet"
    if poly.convex:
        witness = _hull_witness(left_hull, right_hull) if want_witness else None
        return "nonempty", witness, None
    if prev_witness is not None and verify_corridor_line(poly, word,
                                                         prev_witness):
        return "nonempty", prev_witness, None
    witness = _hull_witness(left_hull, right_hull)
    for line in candidate_lines(windows, witness):
        if verify_corridor_line(poly, word, line):
            return "nonempty", line, None
    return "uncertain", None, "no corridor-verified witness at search budget"


def beam_feasible(poly: PolygonTable, word) -> Beam:
    """Feasibility of a word, with certificate (coordinates unscaled)."""
    cor = corridor_for(poly)
    _, _, windows = word_frames_windows(poly, word)
    windows = tuple(windows)
    lh = convex_hull(tuple(w[0] for w in windows))
    rh = convex_hull(tuple(w[1] for w in windows))
    verdict, witness, separator = beam_verdict(poly, word, windows, lh, rh)
    u = cor.unscale_point
    return Beam(
        tuple((u(a), u(b)) for a, b in windows),
        tuple(u(p) for p in lh),
        tuple(u(p) for p in rh),
        verdict,
        None if witness is None else (u(witness[0]), u(witness[1])),
        separator,
    )


# ---------------------------------------------------------------------------
# corridor verification (exact)  — non-convex visibility and witness checking
# ---------------------------------------------------------------------------

def _line_params(u, d, windows):
    """Crossing parameters of the directed line u + t d with window lines.

    Returns None if any window is not crossed strictly inside with entry
    orientation, else the list of parameters.
    """
    params = []
    ux, uy = u
    dx, dy = d
    for wa, wb in windows:
        oa = (wa[0] - ux) * dy - (wa[1] - uy) * dx  # >0 means right of line
        ob = (wb[0] - ux) * dy - (wb[1] - uy) * dx
        # left of directed line = cross(d, p-u) > 0 = -(o) > 0
        if -oa <= 0 or -ob >= 0:
            return None
        ex, ey = wb[0] - wa[0], wb[1] - wa[1]
        denom = dx * ey - dy * ex
        if denom == 0:
            return None
        params.append(Fraction((wa[0] - ux) * ey - (wa[1] - uy) * ex, denom))
    return params


def _blocked(cor: Corridor, frame, exclude, u, d, lo, hi) -> bool:
    """Does the open piece t in (lo, hi) of line u + t d leave copy ``frame``?

    ``exclude`` holds the side indices acting as the entry/exit windows of the
    copy; every other closed side must stay clear of the open piece.
    """
    ux, uy = u
    dx, dy = d
    d2 = dx * dx + dy * dy
    for k in range(cor.num_sides):
        if k in exclude:
            continue
        a, b = cor.side_ends[k]
        p = raw_apply(frame, a)
        q = raw_apply(frame, b)
        op = (p[0] - ux) * dy - (p[1] - uy) * dx
        oq = (q[0] - ux) * dy - (q[1] - uy) * dx
        if op == 0 and oq == 0:
            tp = Fraction((p[0] - ux) * dx + (p[1] - uy) * dy, d2)
            tq = Fraction((q[0] - ux) * dx + (q[1] - uy) * dy, d2)
            if max(lo, min(tp, tq)) < min(hi, max(tp, tq)):
                return True
            continue
        if op * oq < 0:
            ex, ey = q[0] - p[0], q[1] - p[1]
            denom = dx * ey - dy * ex
            t = Fraction((p[0] - ux) * ey - (p[1] - uy) * ex, denom)
            if lo < t < hi:
                return True
        # an endpoint exactly on the line is a vertex contact; vertex checks
        # handle those separately
    return False


def _unfolded_vertices(cor: Corridor, frames):
    seen = set()
    out = []
    for f in frames:
        for v in cor.verts:
            w = raw_apply(f, v)
            if w not in seen:
                seen.add(w)
                out.append(w)
    return out


def verify_corridor_line(poly: PolygonTable, word, line) -> bool:
    """Exact check that a directed line realizes the word in the full corridor
    (ordered open-window crossings, vertex avoidance, per-copy visibility)."""
    cor = corridor_for(poly)
    idx, frames, windows = word_frames_windows(poly, word)
    a, b = line
    d = (b[0] - a[0], b[1] - a[1])
    params = _line_params(a, d, windows)
    if params is None:
        return False
    n = len(windows)
    for i in range(n - 1):
        if not params[i] < params[i + 1]:
            return False
    # vertex avoidance strictly between first and last crossing
    dx, dy = d
    d2 = dx * dx + dy * dy
    for v in _unfolded_vertices(cor, frames):
        if (v[0] - a[0]) * dy - (v[1] - a[1]) * dx == 0:
            t = Fraction((v[0] - a[0]) * dx + (v[1] - a[1]) * dy, d2)
            if params[0] < t < params[-1]:
                return False
    if not poly.convex:
        for j in range(n - 1):
            exclude = {idx[j], idx[j + 1]}
            if _blocked(cor, frames[j], exclude, a, d,
                        params[j], params[j + 1]):
                return False
    return True


# ---------------------------------------------------------------------------
# saddle connections
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SaddleConnection:
    """Oriented vertex-to-vertex orbit segment.

    ``links`` equals the word length; ``reflections = links - 1``.  The
    unfolded endpoints ``u`` (start, copy 0) and ``v`` (end, copy links-1)
    are exact; ``key`` identifies the geometric object independently of which
    incident starting side discovered it.
    """

    start_vertex: int
    end_vertex: int
    word: tuple
    links: int
    geom_length: float
    geom_length_sq: Fraction
    direction: float
    u: tuple
    v: tuple
    first_dir: tuple  # exact outgoing direction at the start corner
    last_dir: tuple   # exact incoming direction at the end corner (polygon frame)

    @property
    def reflections(self) -> int:
        return self.links - 1

    @property
    def bounce_sides(self) -> tuple:
        return self.word[1:]

    @property
    def key(self) -> tuple:
        return (self.start_vertex, self.word[1:], self.end_vertex)

    @property
    def reversed_key(self) -> tuple:
        return (self.end_vertex, tuple(reversed(self.word[1:])),
                self.start_vertex)


def _collinear_overlap(u, v, p, q) -> bool:
    """Does closed [p,q], collinear with u->v, overlap the open span (0,1)?"""
    if orient_sign(u, v, p) != 0 or orient_sign(u, v, q) != 0:
        return False
    dx, dy = v[0] - u[0], v[1] - u[1]
    d2 = dx * dx + dy * dy
    tp = Fraction((p[0] - u[0]) * dx + (p[1] - u[1]) * dy, d2)
    tq = Fraction((q[0] - u[0]) * dx + (q[1] - u[1]) * dy, d2)
    lo, hi = (tp, tq) if tp <= tq else (tq, tp)
    return max(lo, 0) < min(hi, 1)


def connection_candidates_for_word(poly: PolygonTable, word,
                                   idx=None, frames=None, windows=None):
    """All saddle connections realized inside the corridor of ``word``.

    The first symbol names the departing side, so the start corner must be an
    endpoint of window 0; the end corner ranges over the last copy's vertices.
    All checks are exact.
    """
    cor = corridor_for(poly)
    if frames is None:
        idx, frames, windows = word_frames_windows(poly, word)
    n = len(windows)
    w0a, w0b = windows[0]
    w0dir = (w0b[0] - w0a[0], w0b[1] - w0a[1])
    first_side = idx[0]
    nv = cor.num_sides
    start_ids = (first_side, (first_side + 1) % nv)
    last_frame = frames[-1]
    last_verts = [raw_apply(last_frame, p) for p in cor.verts]
    all_unf_vertices = _unfolded_vertices(cor, frames)
    out = []
    word_syms = tuple(poly.labels[i] for i in idx)

    for su in start_ids:
        u = cor.verts[su]
        for ev in range(nv):
            v = last_verts[ev]
            dx, dy = v[0] - u[0], v[1] - u[1]
            if dx == 0 and dy == 0:
                continue
            dxdy = (dx, dy)
            if w0dir[0] * dy - w0dir[1] * dx <= 0:
                continue  # not departing into the polygon off window 0
            ok = True
            params = [Fraction(0)]
            for j in range(1, n):
                wa, wb = windows[j]
                oa = orient_sign(u, v, wa)
                ob = orient_sign(u, v, wb)
                if oa <= 0 or ob >= 0:
                    ok = False
                    break
                ex, ey = wb[0] - wa[0], wb[1] - wa[1]
                denom = dx * ey - dy * ex
                t = Fraction((wa[0] - u[0]) * ey - (wa[1] - u[1]) * ex, denom)
                if not params[-1] < t or not t < 1:
                    ok = False
                    break
                params.append(t)
            if not ok:
                continue
            # no unfolded vertex strictly inside the segment
            for q in all_unf_vertices:
                if q == u or q == v:
                    continue
                if point_on_open_segment(q, u, v):
                    ok = False
                    break
            if not ok:
                continue
            # grazing along the sides incident to the start or end corner
            for k in cor.incident[su]:
                p, q = cor.side_ends[k]
                if _collinear_overlap(u, v, p, q):
                    ok = False
                    break
            if ok:
                for k in cor.incident[ev]:
                    p, q = cor.side_ends[k]
                    pw, qw = raw_apply(last_frame, p), raw_apply(last_frame, q)
                    if _collinear_overlap(u, v, pw, qw):
                        ok = False
                        break
            if not ok:
                continue
            if not poly.convex:
                params.append(Fraction(1))
                for j in range(n):
                    exclude = {idx[j]}
                    if j + 1 < n:
                        exclude.add(idx[j + 1])
                    if _blocked(cor, frames[j], exclude, u, dxdy,
                                params[j], params[j + 1]):
                        ok = False
                        break
                if not ok:
                    continue
            glen_sq = cor.unscale_sq(sq_dist(u, v))
            inv = raw_inverse(last_frame)
            last_dir = raw_apply_vec(inv, dxdy)
            out.append(SaddleConnection(
                start_vertex=su,
                end_vertex=ev,
                word=word_syms,
                links=n,
                geom_length=math.sqrt(float(glen_sq)),
                geom_length_sq=glen_sq,
                direction=math.atan2(float(dy), float(dx)),
                u=cor.unscale_point(u),
                v=cor.unscale_point(v),
                first_dir=_dir_reduce(dxdy),
                last_dir=_dir_reduce(last_dir),
            ))
    return out


def find_saddle_connections(poly: PolygonTable, word) -> list:
    """Saddle connections whose corridor is the given word's unfolding."""
    return connection_candidates_for_word(poly, word)


def candidate_contacts(poly: PolygonTable, word, start_vid: int,
                       end_vid: int) -> list:
    """Vertex ids obstructing the (start, word, end) connection candidate.

    Near a creation parameter the failing constraints degenerate at specific
    corners; this reruns the candidate checks collecting, per failure, the
    vertex pinned by the violated constraint.  An empty list with a failing
    candidate means the obstruction is not vertex-localized.
    """
    cor = corridor_for(poly)
    idx, frames, windows = word_frames_windows(poly, word)
    n = len(windows)
    u = cor.verts[start_vid]
    v = raw_apply(frames[-1], cor.verts[end_vid])
    dx, dy = v[0] - u[0], v[1] - u[1]
    contacts = []
    if dx == 0 and dy == 0:
        return contacts

    def vid_of_window_endpoint(j, which):
        # window j is side idx[j] under frames[j]; endpoints map to the side's
        # vertex ids, swapped when the frame reverses orientation
        k = idx[j]
        ids = (k, (k + 1) % cor.num_sides)
        if frames[j][6] == -1:
            ids = (ids[1], ids[0])
        return ids[0] if which == 0 else ids[1]

    for j in range(1, n):
        wa, wb = windows[j]
        oa = orient_sign(u, v, wa)
        ob = orient_sign(u, v, wb)
        if oa <= 0:
            contacts.append(vid_of_window_endpoint(j, 0))
        if ob >= 0:
            contacts.append(vid_of_window_endpoint(j, 1))
    # vertices sitting on (or crossing) the open segment
    d2 = dx * dx + dy * dy
    for f in frames:
        for vid in range(cor.num_sides):
            q = raw_apply(f, cor.verts[vid])
            if q == u or q == v:
                continue
            if orient_sign(u, v, q) == 0:
                t = Fraction((q[0] - u[0]) * dx + (q[1] - u[1]) * dy, d2)
                if 0 < t < 1:
                    contacts.append(vid)
    seen = set()
    out = []
    for c in contacts:
        if c not in seen:
            seen.add(c)
            out.append(c)
    return out


# ---------------------------------------------------------------------------
# saddle chains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SaddleChain:
    """Maximal run of saddle connections collinear in a common unfolding.

    ``glue_sides[i]`` names how member i+1 straightens after member i at the
    shared corner: the incident side index reflected across, or None where a
    reflex corner lets the line pass straight through.
    """

    connections: tuple
    glue_sides: tuple = ()

    @property
    def total_links(self) -> int:
        return sum(c.links for c in self.connections)

    @property
    def vertex_ids(self) -> tuple:
        ids = [self.connections[0].start_vertex]
        for c in self.connections:
            ids.append(c.end_vertex)
        return tuple(ids)


def _dir_reduce(v):
    """Canonical representative of a rational direction (primitive, exact)."""
    x, y = v
    if x == 0 and y == 0:
        return (0, 0)
    num_x = x.numerator * y.denominator
    num_y = y.numerator * x.denominator
    g = math.gcd(abs(num_x), abs(num_y))
    if g:
        num_x //= g
        num_y //= g
    return (num_x, num_y)


def glue_options(poly: PolygonTable, vertex_id: int, incoming):
    """(continuation direction, glue side index or None) pairs for a straight
    unfolded line passing through the given corner: reflections across the
    corner's two incident sides, plus straight passage at a reflex corner."""
    cor = corridor_for(poly)
    out = []
    for k in cor.incident[vertex_id]:
        refl = cor.side_refl[k]
        out.append((raw_apply_vec(refl, incoming), k))
    if vertex_id in poly.reflex_vertices:
        out.append((incoming, None))
    return out


def _glue_side(poly: PolygonTable, c1: SaddleConnection,
               c2: SaddleConnection):
    """Side reflected across when c2 continues c1 collinearly, None for a
    straight reflex passage, or False when the pair does not glue."""
    if c1.end_vertex != c2.start_vertex:
        return False
    want = _dir_reduce(c2.first_dir)
    for d, side in glue_options(poly, c1.end_vertex, c1.last_dir):
        if _dir_reduce(d) == want:
            return side
    return False


def detect_saddle_chains(connections: Sequence[SaddleConnection],
                         poly: PolygonTable, max_len: int = 16) -> list:
    """Maximal collinear concatenations among the given connections."""
    conns = list(connections)
    nexts = {i: [] for i in range(len(conns))}
    prevs = {i: [] for i in range(len(conns))}
    for i, c1 in enumerate(conns):
        for j, c2 in enumerate(conns):
            if i == j:
                continue
            side = _glue_side(poly, c1, c2)
            if side is not False:
                nexts[i].append((j, side))
                prevs[j].append(i)

    chains = []
    seen = set()

    def extend(path, glues):
        i = path[-1]
        grown = False
        for j, side in nexts[i]:
            if j not in path and len(path) < max_len:
                grown = True
                extend(path + [j], glues + [side])
        if not grown:
            key = tuple(path)
            if key not in seen:
                seen.add(key)
                chains.append(SaddleChain(tuple(conns[k] for k in path),
                                          tuple(glues)))

    for i in range(len(conns)):
        if not prevs[i]:
            extend([i], [])
    # connections inside a cycle (no source): emit singletons for coverage
    covered = {id(c) for ch in chains for c in ch.connections}
    for c in conns:
        if id(c) not in covered:
            chains.append(SaddleChain((c,), ()))
    return chains


def side_ids_of(poly: PolygonTable) -> set:
    """Oriented vertex-id pairs realized by the polygon's own sides."""
    m = poly.num_sides
    return {(i, (i + 1) % m) for i in range(m)}


def connection_vertex_clearance(poly: PolygonTable,
                                conn: SaddleConnection) -> float:
    """Distance from a connection's unfolded segment to the nearest unfolded
    vertex other than its endpoints."""
    cor = corridor_for(poly)
    _idx, frames, _w = word_frames_windows(poly, conn.word)
    best = None
    for f in frames:
        uf = cor.unscale_frame(f)
        for vtx in poly.vertex_tuples():
            q = raw_apply(uf, vtx)
            if q == conn.u or q == conn.v:
                continue
            d = point_seg_sq_dist(q, conn.u, conn.v)
            if best is None or d < best:
                best = d
    return math.inf if best is None else math.sqrt(float(best))


# ---------------------------------------------------------------------------
# geometric length bounds
# ---------------------------------------------------------------------------

def geometric_length_bounds(poly: PolygonTable, n: int, n0: int = 1):
    """Bracketing interval (L_Q*n, diam(Q)*n) for n-link connection lengths.

    L_Q is the conservative stand-in: the minimal distance between
    non-adjacent side pairs (0 when every side pair is adjacent, as in a
    triangle).  Returns (lower, upper, warned) where ``warned`` flags n < n0.
    """
    m = poly.num_sides
    best: Optional[Fraction] = None
    for i in range(m):
        a, b = poly.side_tuple(i)
        for j in range(i + 1, m):
            if j == (i + 1) % m or (j + 1) % m == i:
                continue
            c, d = poly.side_tuple(j)
            cand = min(point_seg_sq_dist(a, c, d), point_seg_sq_dist(b, c, d),
                       point_seg_sq_dist(c, a, b), point_seg_sq_dist(d, a, b))
            if best is None or cand < best:
                best = cand
    lq = math.sqrt(float(best)) if best is not None else 0.0
    return (lq * n, poly.diameter * n, n < n0)
