"""Perturbation experiments: connection persistence, chain-driven creation of
new connections, angular margins, and growth-exponent fits.

Perturbations are rationalized (bounded-denominator displacement vectors) so
the perturbed polygons stay on the exact enumeration path and every count in a
report is certified rather than bracketed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .enumeration import enumerate_saddle_connections, loglog_slope
from .errors import (
    BilliardError,
    EmptySCSet,
    InsufficientRange,
    UnmatchedNewConnection,
    ValidationFailed,
)
from .geometry import PolygonTable, as_fraction, sq_dist, validate_polygon
from .unfolding import (
    RAW_IDENTITY,
    Corridor,
    SaddleChain,
    SaddleConnection,
    connection_vertex_clearance,
    corridor_for,
    detect_saddle_chains,
    raw_apply,
    raw_compose,
    word_frames_windows,
)


# ---------------------------------------------------------------------------
# families and perturbations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolygonFamily:
    """Vertex-displacement family Q_t = base + t * displacement, t in [0, 1]."""

    base: PolygonTable
    displacements: tuple  # per-vertex (Fraction, Fraction)
    grid_steps: int = 64

    def __post_init__(self):
        if len(self.displacements) != len(self.base.vertices):
            raise ValidationFailed("one displacement vector per vertex")

    @property
    def epsilon(self) -> float:
        return max(math.sqrt(float(dx * dx + dy * dy))
                   for dx, dy in self.displacements)

    def polygon_at(self, t) -> PolygonTable:
        t = Fraction(t)
        verts = [(v.x + t * dx, v.y + t * dy)
                 for v, (dx, dy) in zip(self.base.vertices,
                                        self.displacements)]
        try:
            return validate_polygon(verts, labels=self.base.labels,
                                    name=f"{self.base.name}@t={t}")
        except BilliardError as exc:
            raise ValidationFailed(f"family member t={t} invalid: {exc}")

    def grid(self):
        return [Fraction(k, self.grid_steps)
                for k in range(self.grid_steps + 1)]


def family_from_json(text: str) -> PolygonFamily:
    """{"base": <polygon>, "displacements": [[dx, dy], ...], "grid_steps": m}"""
    from .geometry import polygon_from_json

    data = json.loads(text)
    base = polygon_from_json(json.dumps(data["base"]))
    disp = tuple((as_fraction(dx), as_fraction(dy))
                 for dx, dy in data["displacements"])
    return PolygonFamily(base, disp, int(data.get("grid_steps", 64)))


def perturb(poly: PolygonTable, delta: float, seed: int = 0) -> PolygonTable:
    """Displace every vertex by an independent rational vector of norm <= delta.

    Requires delta below half the minimal vertex spacing; raises
    :class:`ValidationFailed` when the displaced polygon self-intersects.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    verts = poly.vertex_tuples()
    min_sq = min(sq_dist(verts[i], verts[j])
                 for i in range(len(verts)) for j in range(i + 1, len(verts)))
    delta_f = Fraction(delta)
    if delta_f > 0 and 4 * delta_f * delta_f >= min_sq:
        raise ValueError("delta must be below half the minimal vertex spacing")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xDE17A)))
    new_verts = []
    for (x, y) in verts:
        if delta_f == 0:
            new_verts.append((x, y))
            continue
        phi = rng.uniform(0.0, 2.0 * math.pi)
        rho = delta * math.sqrt(rng.uniform(0.0, 1.0)) * 0.98
        dx = Fraction(rho * math.cos(phi)).limit_denominator(10 ** 7)
        dy = Fraction(rho * math.sin(phi)).limit_denominator(10 ** 7)
        while dx * dx + dy * dy > delta_f * delta_f:
            dx /= 2
            dy /= 2
        new_verts.append((x + dx, y + dy))
    try:
        return validate_polygon(new_verts, labels=poly.labels,
                                name=f"{poly.name}~{delta:g}")
    except BilliardError as exc:
        raise ValidationFailed(f"perturbed polygon invalid: {exc}")


# ---------------------------------------------------------------------------
# persistence under perturbation
# ---------------------------------------------------------------------------

@dataclass
class PersistenceReport:
    depth: int
    counts_base: list      # cumulative oriented N_c per links
    counts_pert: list
    inequality_ok: bool
    matched: int
    missing: list          # base connection keys absent after perturbation
    safe_delta: float


def persistence_check(poly: PolygonTable, poly_hat: PolygonTable,
                      n: int, threads: int = 1) -> PersistenceReport:
    """Counts must not drop under a small perturbation, and every base
    connection should persist with the same word and endpoints."""
    base, _cb = enumerate_saddle_connections(poly, n, threads=threads)
    pert, _cp = enumerate_saddle_connections(poly_hat, n, threads=threads)
    base_keys = {c.key for c in base}
    pert_keys = {c.key for c in pert}

    def cum(conns):
        out = [0] * n
        for c in conns:
            out[c.links - 1] += 1
        for j in range(1, n):
            out[j] += out[j - 1]
        return out

    cb, cp = cum(base), cum(pert)
    missing = sorted(base_keys - pert_keys)
    safe = math.inf
    for c in base:
        clr = connection_vertex_clearance(poly, c)
        if math.isfinite(clr):
            safe = min(safe, clr / (4.0 * c.links))
    return PersistenceReport(
        depth=n,
        counts_base=cb,
        counts_pert=cp,
        inequality_ok=all(a >= b for a, b in zip(cp, cb)),
        matched=len(base_keys & pert_keys),
        missing=missing,
        safe_delta=safe,
    )


# ---------------------------------------------------------------------------
# chain-driven creation of connections
# ---------------------------------------------------------------------------

@dataclass
class ChainEvent:
    connection: SaddleConnection   # as first observed, at grid parameter
    parent: SaddleChain
    parent_kind: str               # "base" | "emergent"
    t_grid: Fraction               # first grid parameter where present
    t_star: Fraction               # bisected appearance parameter
    matched_vertices: tuple        # (start, end) vertex ids inside the parent


def chain_creation_scan(family: PolygonFamily, n: int,
                        bisect_steps: int = 10,
                        threads: int = 1) -> list:
    """Scan the family grid for connections absent at t=0 and attribute each
    to the saddle chain it degenerates to.

    Connections appearing as t leaves 0 match a chain of the base polygon
    directly ("base" parent).  A one-parameter family also creates connections
    at interior parameters t*; there the creating chain is collinear only at
    t* itself, so the parent is reconstructed from the exact failure contacts
    of the candidate just below t* and reported as "emergent", with its
    members verified to be existing connections (or sides) there.  Raises
    :class:`UnmatchedNewConnection` when neither attribution works.
    """
    from .unfolding import candidate_contacts, side_ids_of

    base_poly = family.polygon_at(0)
    base_conns, _ = enumerate_saddle_connections(base_poly, n,
                                                 threads=threads)
    base_keys = {c.key for c in base_conns}
    chains = detect_saddle_chains(base_conns, base_poly)
    multi = [ch for ch in chains if len(ch.connections) >= 2] or chains

    conn_cache = {}

    def conns_at(t):
        if t not in conn_cache:
            conns, _ = enumerate_saddle_connections(family.polygon_at(t), n,
                                                    threads=threads)
            conn_cache[t] = conns
        return conn_cache[t]

    def present(key, t) -> Optional[SaddleConnection]:
        for c in conns_at(t):
            if c.key == key:
                return c
        return None

    def emergent_parent(c, lo) -> Optional[SaddleChain]:
        poly_lo = family.polygon_at(lo)
        contacts = candidate_contacts(poly_lo, c.word, c.start_vertex,
                                      c.end_vertex)
        if not contacts:
            return None
        path = [c.start_vertex] + contacts + [c.end_vertex]
        members = []
        lo_conns = conns_at(lo)
        side_pairs = side_ids_of(poly_lo)
        for a, b in zip(path, path[1:]):
            found = next((m for m in lo_conns
                          if m.start_vertex == a and m.end_vertex == b), None)
            if found is None and (a, b) not in side_pairs \
                    and (b, a) not in side_pairs:
                return None
            if found is not None:
                members.append(found)
        if not members:
            return None
        return SaddleChain(tuple(members), ())

    events = []
    seen = set()
    ts = family.grid()
    for k in range(1, len(ts)):
        t = ts[k]
        for c in conns_at(t):
            if c.key in base_keys or c.key in seen:
                continue
            seen.add(c.key)
            lo, hi = ts[k - 1], t
            for _ in range(bisect_steps):
                mid = (lo + hi) / 2
                if present(c.key, mid) is not None:
                    hi = mid
                else:
                    lo = mid
            c_at = present(c.key, hi) or c
            parents = [ch for ch in multi
                       if c.start_vertex in ch.vertex_ids
                       and c.end_vertex in ch.vertex_ids]
            if parents:
                parent = max(parents, key=lambda ch: len(ch.connections))
                kind = "base"
            else:
                parent = emergent_parent(c_at, lo)
                kind = "emergent"
                if parent is None:
                    raise UnmatchedNewConnection(
                        f"connection {c.key} appearing at t*~{hi} matches no "
                        f"base chain and no contact chain")
            events.append(ChainEvent(
                connection=c, parent=parent, parent_kind=kind,
                t_grid=t, t_star=hi,
                matched_vertices=(c.start_vertex, c.end_vertex)))
    events.sort(key=lambda e: (e.t_star, e.connection.key))
    return events


# ---------------------------------------------------------------------------
# the angular margin of a chain
# ---------------------------------------------------------------------------

@dataclass
class ThetaReport:
    angle: float
    degenerate: bool
    sc_count: int
    chain_links: int


def _line_angle_between(d1, d2) -> float:
    """Angle between two directions viewed as unoriented lines, in [0, pi/2]."""
    a1 = math.atan2(float(d1[1]), float(d1[0]))
    a2 = math.atan2(float(d2[1]), float(d2[0]))
    d = abs(a1 - a2) % math.pi
    return min(d, math.pi - d)


def _ray_exit(poly, frame, p, d):
    """Exact first exit of the ray p + t d (t > 0) from the copy frame(Q).

    Returns (t, point, side_index, at_vertex).  ``None`` when the ray does not
    properly traverse the copy (wrong one-sided continuation branch).
    """
    cor = corridor_for(poly)
    best = None
    for k in range(poly.num_sides):
        a, b = poly.side_tuple(k)
        wa = raw_apply(frame, a)
        wb = raw_apply(frame, b)
        ex, ey = wb[0] - wa[0], wb[1] - wa[1]
        denom = d[0] * ey - d[1] * ex
        if denom == 0:
            continue
        t = Fraction((wa[0] - p[0]) * ey - (wa[1] - p[1]) * ex, denom)
        if t <= 0:
            continue
        hit = (p[0] + t * d[0], p[1] + t * d[1])
        su = Fraction((hit[0] - wa[0]) * ex + (hit[1] - wa[1]) * ey,
                      ex * ex + ey * ey)
        if su < 0 or su > 1:
            continue
        if best is None or t < best[0]:
            best = (t, hit, k, su == 0 or su == 1)
    if best is None:
        return None
    # the traversed piece must lie inside the copy: test the midpoint
    mid = (p[0] + best[0] / 2 * d[0], p[1] + best[0] / 2 * d[1])
    if not _point_in_copy(poly, frame, mid):
        return None
    return best


def _point_in_copy(poly, frame, q) -> bool:
    """Exact point-in-polygon for the copy frame(Q) (boundary counts in)."""
    from .geometry import orient_sign as osign

    verts = [raw_apply(frame, v) for v in poly.vertex_tuples()]
    n = len(verts)
    parity = frame[6]
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        s = osign(a, b, q) * parity
        if s < 0:
            if poly.convex:
                return False
    if poly.convex:
        return True
    # general polygon: exact crossing-number with rational arithmetic
    inside = False
    qx, qy = q
    for i in range(n):
        (x1, y1), (x2, y2) = verts[i], verts[(i + 1) % n]
        if (y1 > qy) != (y2 > qy):
            xs = x1 + Fraction(qy - y1, y2 - y1) * (x2 - x1)
            if xs == qx:
                return True
            if xs > qx:
                inside = not inside
        elif y1 == qy and y2 == qy:
            if min(x1, x2) <= qx <= max(x1, x2):
                return True
    return inside


def theta_margin(poly: PolygonTable, chain: SaddleChain,
                 horizon: int) -> ThetaReport:
    """Minimal line angle between the chain and segments from its unfolded
    vertices to the other vertices of its unfolded picture.

    The picture holds one polygon copy per link; when the horizon exceeds the
    chain's combinatorial length it is extended by exact straight-line
    unfolding past the far corner (branching over the one-sided continuation
    reflections, stopping at vertex hits).  An off-chain picture vertex lying
    exactly on the chain's supporting line inside the picture span reports a
    zero margin with the degeneracy flag.
    """
    from .unfolding import glue_options
    from .geometry import orient_sign as osign

    if horizon < chain.total_links:
        raise EmptySCSet(
            f"horizon {horizon} shorter than the chain ({chain.total_links})")
    members = chain.connections
    if len(chain.glue_sides) not in (0, len(members) - 1):
        raise ValueError("chain glue data inconsistent with member count")
    cor = corridor_for(poly)
    refl = [Corridor._reflection_from(*poly.side_tuple(i))
            for i in range(poly.num_sides)]

    # H[i] places member i's own unfolding plane into the chain picture
    H = [RAW_IDENTITY]
    member_frames = []
    for i, c in enumerate(members):
        _idx, frames, _w = word_frames_windows(poly, c.word)
        member_frames.append([cor.unscale_frame(f) for f in frames])
        if i + 1 < len(members):
            g = chain.glue_sides[i] if chain.glue_sides else None
            nxt = raw_compose(H[i], member_frames[i][-1])
            if g is not None:
                nxt = raw_compose(nxt, refl[g])
            H.append(nxt)

    world_frames = []
    for i in range(len(members)):
        for f in member_frames[i]:
            world_frames.append(raw_compose(H[i], f))

    chain_pts = []
    for i, c in enumerate(members):
        for p in (raw_apply(H[i], c.u), raw_apply(H[i], c.v)):
            if p not in chain_pts:
                chain_pts.append(p)

    u0 = chain_pts[0]
    d = members[0].first_dir
    d2 = d[0] * d[0] + d[1] * d[1]

    def line_param(q):
        return Fraction((q[0] - u0[0]) * d[0] + (q[1] - u0[1]) * d[1], d2)

    span_hi = max(line_param(p) for p in chain_pts)

    # straight-line extension past the far corner
    if horizon > chain.total_links:
        end_plane = raw_compose(H[-1], member_frames[-1][-1])
        end_pt = raw_apply(H[-1], members[-1].v)
        budget = horizon - chain.total_links
        stack = []
        for _d2, side in glue_options(poly, members[-1].end_vertex,
                                      members[-1].last_dir):
            f0 = raw_compose(end_plane, refl[side]) if side is not None \
                else end_plane
            stack.append((f0, end_pt, budget))
        visited = set()
        while stack:
            frame, p, left = stack.pop()
            if left <= 0 or frame in visited:
                continue
            visited.add(frame)
            hit = _ray_exit(poly, frame, p, d)
            if hit is None:
                continue
            t, point, side_k, at_vertex = hit
            world_frames.append(frame)
            span_hi = max(span_hi, line_param(point))
            if at_vertex:
                continue
            stack.append((raw_compose(frame, refl[side_k]), point, left - 1))

    verts = poly.vertex_tuples()
    others = set()
    for f in world_frames:
        for vtx in verts:
            w = raw_apply(f, vtx)
            if w not in chain_pts:
                others.add(w)
    if not others:
        raise EmptySCSet("the unfolded picture has no comparison vertices")

    degenerate = False
    angles = []
    ref = (u0[0] + d[0], u0[1] + d[1])
    for q in others:
        if osign(u0, ref, q) == 0:
            # on the chain's supporting line: a contact strictly inside the
            # picture span is a genuine degeneracy; beyond the span the
            # segment is not realizable in the picture and never compared
            if 0 < line_param(q) < span_hi:
                degenerate = True
            continue
        for p in chain_pts:
            dq = (q[0] - p[0], q[1] - p[1])
            if dq == (0, 0):
                continue
            angles.append(_line_angle_between(d, dq))
    if not angles and not degenerate:
        raise EmptySCSet("no comparison directions in the picture")
    angle = 0.0 if degenerate else min(angles)
    return ThetaReport(angle=angle, degenerate=degenerate,
                       sc_count=len(angles), chain_links=chain.total_links)


# ---------------------------------------------------------------------------
# exponent fits
# ---------------------------------------------------------------------------

@dataclass
class FitReport:
    n_max: int
    window: tuple
    p_slope: float
    nc_slope: float
    p_values: list
    nc_values: list
    companions: list = field(default_factory=list)  # (delta, p_slope, nc_slope)


def fit_counts(counts, window: Optional[tuple] = None) -> tuple:
    n_max = counts.n_max
    if window is None:
        window = (max(2, n_max // 4), n_max)
    lo, hi = window
    if hi > n_max or hi - lo < 3:
        raise InsufficientRange(f"window {window} needs more depth")
    ns = list(range(lo, hi + 1))
    ps = [counts.p[n - 1] for n in ns]
    ncs = [counts.nc_cum_oriented(n) for n in ns]
    if min(ps) <= 0 or min(ncs) <= 0:
        raise InsufficientRange("counts vanish inside the window")
    return window, ns, loglog_slope(ns, ps), loglog_slope(ns, ncs), ps, ncs


def exponent_fit(poly: PolygonTable, n_max: int,
                 window: Optional[tuple] = None,
                 perturbations: int = 0, delta: float = 1e-3,
                 pert_n_max: Optional[int] = None,
                 pert_window: Optional[tuple] = None,
                 seed: int = 0, threads: int = 1) -> FitReport:
    """Log-log growth exponents of N_c and p, with optional companion fits on
    random perturbations (exact enumeration requires rational input)."""
    _conns, counts = enumerate_saddle_connections(poly, n_max,
                                                  threads=threads)
    window, ns, p_slope, nc_slope, ps, ncs = fit_counts(counts, window)
    companions = []
    if perturbations:
        pn = pert_n_max or min(n_max, 20)
        for k in range(perturbations):
            q = perturb(poly, delta, seed=seed + k)
            _c2, counts2 = enumerate_saddle_connections(q, pn,
                                                        threads=threads)
            try:
                _w, _ns, psl, ncsl, _p, _n = fit_counts(counts2, pert_window)
                companions.append((delta, psl, ncsl))
            except InsufficientRange:
                companions.append((delta, math.nan, math.nan))
    return FitReport(n_max, window, p_slope, nc_slope, ps, ncs, companions)
