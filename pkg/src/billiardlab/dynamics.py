"""Billiard map and flow over float arithmetic.

Phase points sit on the boundary: ``(side label, arc length s along the side,
angle theta in (0, pi) against the positive boundary direction)``.  The map
shoots the ray into the polygon and specularly reflects at the first side hit.
Vertex passages are detected within a snap tolerance and reported as singular;
hits inside a slightly wider gray band are reported as uncertain and excluded
from any counting downstream.

Heavy experiments (word oracles, measure estimates, cell probing) run through
the vectorized :class:`Simulator`; the scalar API wraps the same kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import SingularOrbit, UncertainOrbit
from .geometry import PolygonTable

SNAP_REL = 1e-9   # vertex-hit certification band, relative to diameter
GRAY_REL = 1e-8   # unresolved band outside the snap band
TAU_REL = 1e-12   # minimum flight, relative to diameter


@dataclass(frozen=True)
class PhasePoint:
    side: str
    s: float
    theta: float


@dataclass(frozen=True)
class FlowPoint:
    x: tuple
    psi: float


@dataclass(frozen=True)
class StepResult:
    """One application of the billiard map.

    ``kind`` is "ok", "singular", or "uncertain"; ``flight`` is the geometric
    length of the orbit segment traversed (up to the vertex for singular
    hits).
    """

    kind: str
    next: Optional[PhasePoint]
    vertex: Optional[int]
    flight: float


@dataclass(frozen=True)
class TraceResult:
    word: tuple
    points: tuple
    flights: tuple
    status: str  # "ok" | "singular" | "uncertain"
    failed_index: Optional[int]  # step index at which the orbit died

    @property
    def word_str(self) -> str:
        return "".join(self.word)


class Simulator:
    """Vectorized float kernel for one polygon."""

    def __init__(self, poly: PolygonTable):
        self.poly = poly
        m = poly.num_sides
        verts = np.array([v.as_float() for v in poly.vertices], dtype=float)
        nxt = np.roll(verts, -1, axis=0)
        self.origin = verts
        self.vertices = verts
        ed = nxt - verts
        self.length = np.linalg.norm(ed, axis=1)
        self.tangent = ed / self.length[:, None]
        # CCW polygon: inward normal is the left normal of the tangent
        self.normal = np.stack([-self.tangent[:, 1], self.tangent[:, 0]],
                               axis=1)
        self.offsets = np.array(poly.side_offsets, dtype=float)
        self.perimeter = poly.perimeter
        self.m = m
        self.diam = poly.diameter
        self.snap = SNAP_REL * self.diam
        self.gray = GRAY_REL * self.diam
        self.tau_min = TAU_REL * self.diam

    # -- conversions --------------------------------------------------------

    def start_arrays(self, side_idx, s, theta):
        side_idx = np.asarray(side_idx, dtype=np.int64)
        s = np.asarray(s, dtype=float)
        theta = np.asarray(theta, dtype=float)
        t = self.tangent[side_idx]
        n = self.normal[side_idx]
        pos = self.origin[side_idx] + s[:, None] * t
        d = np.cos(theta)[:, None] * t + np.sin(theta)[:, None] * n
        return pos, d, side_idx

    def theta_of(self, side_idx, d):
        t = self.tangent[side_idx]
        return np.arctan2(t[:, 0] * d[:, 1] - t[:, 1] * d[:, 0],
                          t[:, 0] * d[:, 0] + t[:, 1] * d[:, 1])

    # -- the kernel ----------------------------------------------------------

    def step_arrays(self, pos, d, cur_side):
        """One map step for every row.

        Returns (pos', d', side', s', tau, status) with status 0 ok,
        1 singular (vertex hit), 2 uncertain (gray band / no hit).
        """
        n_rays = pos.shape[0]
        best_tau = np.full(n_rays, np.inf)
        best_side = np.full(n_rays, -1, dtype=np.int64)
        best_u = np.zeros(n_rays)
        for j in range(self.m):
            rel = self.origin[j] - pos
            tj = self.tangent[j]
            denom = d[:, 0] * tj[1] - d[:, 1] * tj[0]
            with np.errstate(divide="ignore", invalid="ignore"):
                tau = (rel[:, 0] * tj[1] - rel[:, 1] * tj[0]) / denom
            hit = pos + tau[:, None] * d
            u = (hit[:, 0] - self.origin[j, 0]) * tj[0] + \
                (hit[:, 1] - self.origin[j, 1]) * tj[1]
            valid = (
                (cur_side != j)
                & np.isfinite(tau)
                & (tau > self.tau_min)
                & (u > -self.gray)
                & (u < self.length[j] + self.gray)
                & (tau < best_tau)
            )
            best_tau = np.where(valid, tau, best_tau)
            best_side = np.where(valid, j, best_side)
            best_u = np.where(valid, u, best_u)

        status = np.zeros(n_rays, dtype=np.int8)
        no_hit = best_side < 0
        status[no_hit] = 2
        L = np.where(no_hit, 1.0, self.length[np.maximum(best_side, 0)])
        end_dist = np.minimum(np.abs(best_u), np.abs(L - best_u))
        status[(~no_hit) & (end_dist < self.gray)] = 2
        status[(~no_hit) & (end_dist < self.snap)] = 1

        side2 = np.maximum(best_side, 0)
        new_pos = pos + np.where(no_hit, 0.0, best_tau)[:, None] * d
        t2 = self.tangent[side2]
        n2 = self.normal[side2]
        dn = d[:, 0] * n2[:, 0] + d[:, 1] * n2[:, 1]
        new_d = d - 2.0 * dn[:, None] * n2
        return new_pos, new_d, best_side, best_u, best_tau, status

    def nearest_vertex(self, p):
        dv = self.vertices - np.asarray(p)[None, :]
        i = int(np.argmin(np.einsum("ij,ij->i", dv, dv)))
        return i

    def trace_codes(self, side_idx, s, theta, depth):
        """Symbol arrays for a batch of rays.

        Returns (codes, alive): ``codes`` has shape (depth, N) with the side
        index per symbol (symbol 0 is the starting side); ``alive`` marks rays
        that stayed certified non-singular through all recorded symbols.
        """
        pos, d, cur = self.start_arrays(side_idx, s, theta)
        n_rays = pos.shape[0]
        codes = np.empty((depth, n_rays), dtype=np.int16)
        codes[0] = cur
        alive = np.ones(n_rays, dtype=bool)
        for k in range(1, depth):
            new_pos, new_d, side, _u, _tau, status = \
                self.step_arrays(pos, d, cur)
            alive &= status == 0
            codes[k] = np.where(alive, side, -1)
            pos, d = new_pos, new_d
            cur = np.where(alive, side, cur)
            if not alive.any():
                codes[k + 1:] = -1
                break
        return codes, alive

    def trace_phase(self, side_idx, s, theta, depth):
        """Phase-point arrays along a batch of orbits.

        Returns (sides, ss, thetas, flights, alive): arrays of shape
        (depth, N) except flights (depth-1, N); rows past an orbit's death
        hold the last valid values and alive goes False.
        """
        pos, d, cur = self.start_arrays(side_idx, s, theta)
        n_rays = pos.shape[0]
        sides = np.empty((depth, n_rays), dtype=np.int64)
        ss = np.empty((depth, n_rays))
        ths = np.empty((depth, n_rays))
        fls = np.zeros((max(depth - 1, 0), n_rays))
        sides[0] = cur
        ss[0] = np.asarray(s, dtype=float)
        ths[0] = np.asarray(theta, dtype=float)
        alive = np.ones(n_rays, dtype=bool)
        for k in range(1, depth):
            new_pos, new_d, side, u, tau, status = \
                self.step_arrays(pos, d, cur)
            ok = alive & (status == 0)
            side_c = np.where(ok, side, cur)
            sides[k] = side_c
            ss[k] = np.where(ok, u, ss[k - 1])
            th = self.theta_of(np.maximum(side, 0), new_d)
            ths[k] = np.where(ok, th, ths[k - 1])
            fls[k - 1] = np.where(ok, tau, 0.0)
            pos = np.where(ok[:, None], new_pos, pos)
            d = np.where(ok[:, None], new_d, d)
            cur = side_c
            alive = ok
        return sides, ss, ths, fls, alive

    # -- clearance ----------------------------------------------------------

    def flight_segments(self, side_idx, s, theta):
        """(x0, x1, psi, status) of the first flight for each row."""
        pos, d, cur = self.start_arrays(side_idx, s, theta)
        new_pos, _nd, _side, _u, tau, status = self.step_arrays(pos, d, cur)
        psi = np.arctan2(d[:, 1], d[:, 0])
        return pos, new_pos, psi, status

    def clearance_of_segments(self, x0, x1, psi):
        """min over t of rho(flow point, phase-space boundary) per segment.

        rho = Euclidean + angular; the boundary components are vertex-footed
        vectors (any angle) and side-tangent vectors (two directions each).
        """
        n_rays = x0.shape[0]
        best = np.full(n_rays, np.inf)
        seg = x1 - x0
        seg_len2 = np.einsum("ij,ij->i", seg, seg)
        seg_len2 = np.where(seg_len2 == 0, 1.0, seg_len2)
        for i in range(self.m):
            v = self.vertices[i]
            t = np.einsum("ij,ij->i", v[None, :] - x0, seg) / seg_len2
            t = np.clip(t, 0.0, 1.0)
            c = x0 + t[:, None] * seg
            dist = np.hypot(c[:, 0] - v[0], c[:, 1] - v[1])
            best = np.minimum(best, dist)
        for j in range(self.m):
            a = self.origin[j]
            b = a + self.length[j] * self.tangent[j]
            dist = _seg_seg_dist(x0, x1, a, b)
            phi = math.atan2(self.tangent[j, 1], self.tangent[j, 0])
            dpsi = np.abs(np.mod(psi - phi + math.pi, 2 * math.pi) - math.pi)
            dpsi = np.minimum(dpsi, math.pi - dpsi)
            best = np.minimum(best, dist + dpsi)
        return best


def _pts_to_fixed_seg(p, a, b):
    """Distance from each row of p to the fixed segment [a, b]."""
    ab = b - a
    L2 = float(ab @ ab) or 1.0
    t = np.clip(((p - a) @ ab) / L2, 0.0, 1.0)
    c = a[None, :] + t[:, None] * ab[None, :]
    return np.hypot(p[:, 0] - c[:, 0], p[:, 1] - c[:, 1])


def _fixed_pt_to_segs(u, v, p):
    """Distance from the fixed point p to each row segment [u_i, v_i]."""
    uv = v - u
    L2 = np.einsum("ij,ij->i", uv, uv)
    L2 = np.where(L2 == 0, 1.0, L2)
    t = np.clip(np.einsum("ij,ij->i", p[None, :] - u, uv) / L2, 0.0, 1.0)
    c = u + t[:, None] * uv
    return np.hypot(c[:, 0] - p[0], c[:, 1] - p[1])


def _seg_seg_dist(p0, p1, a, b):
    """Vectorized distance from segments [p0,p1] (N rows) to a fixed [a,b]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)

    def o(p, q, rx, ry):
        return ((q[:, 0] - p[:, 0]) * (ry - p[:, 1])
                - (q[:, 1] - p[:, 1]) * (rx - p[:, 0]))

    o1 = o(p0, p1, a[0], a[1])
    o2 = o(p0, p1, b[0], b[1])
    ab0 = np.broadcast_to(a, p0.shape)
    ab1 = np.broadcast_to(b, p0.shape)
    o3 = o(ab0, ab1, p0[:, 0], p0[:, 1])
    o4 = o(ab0, ab1, p1[:, 0], p1[:, 1])
    crossing = (o1 * o2 < 0) & (o3 * o4 < 0)

    out = np.minimum(
        np.minimum(_pts_to_fixed_seg(p0, a, b), _pts_to_fixed_seg(p1, a, b)),
        np.minimum(_fixed_pt_to_segs(p0, p1, a), _fixed_pt_to_segs(p0, p1, b)),
    )
    return np.where(crossing, 0.0, out)


_sim_cache: dict = {}


def simulator_for(poly: PolygonTable) -> Simulator:
    key = id(poly)
    hit = _sim_cache.get(key)
    if hit is None or hit.poly is not poly:
        hit = Simulator(poly)
        _sim_cache[key] = hit
    return hit


# ---------------------------------------------------------------------------
# scalar API
# ---------------------------------------------------------------------------

def step(poly: PolygonTable, z: PhasePoint) -> StepResult:
    """The billiard map applied once; singularity and uncertainty are values."""
    sim = simulator_for(poly)
    si = poly.side_index(z.side)
    pos, d, cur = sim.start_arrays([si], [z.s], [z.theta])
    new_pos, new_d, side, u, tau, status = sim.step_arrays(pos, d, cur)
    flight = float(tau[0]) if np.isfinite(tau[0]) else math.nan
    if status[0] == 1:
        return StepResult("singular", None, sim.nearest_vertex(new_pos[0]),
                          flight)
    if status[0] == 2:
        return StepResult("uncertain", None, None, flight)
    j = int(side[0])
    th = float(sim.theta_of(np.array([j]), new_d)[0])
    nxt = PhasePoint(poly.labels[j], float(u[0]), th)
    return StepResult("ok", nxt, None, flight)


def trace(poly: PolygonTable, z: PhasePoint, n: int):
    """Code the forward orbit: n symbols, symbol 0 being z's own side."""
    word = [z.side]
    points = [z]
    flights = []
    cur = z
    for k in range(1, n):
        res = step(poly, cur)
        if res.kind != "ok":
            return TraceResult(tuple(word), tuple(points), tuple(flights),
                               "singular" if res.kind == "singular"
                               else "uncertain", k)
        flights.append(res.flight)
        cur = res.next
        word.append(cur.side)
        points.append(cur)
    return TraceResult(tuple(word), tuple(points), tuple(flights), "ok", None)


def _position_of(poly: PolygonTable, z: PhasePoint):
    sim = simulator_for(poly)
    si = poly.side_index(z.side)
    pos, d, _ = sim.start_arrays([si], [z.s], [z.theta])
    return pos[0], d[0], si


def flow(poly: PolygonTable, z: Union[PhasePoint, FlowPoint],
         t: float) -> FlowPoint:
    """Unit-speed flow for time t, reflecting as needed.

    Raises :class:`SingularOrbit` when the orbit meets a vertex strictly
    before exhausting t, :class:`UncertainOrbit` on unresolved hits.
    """
    sim = simulator_for(poly)
    if isinstance(z, PhasePoint):
        pos, d, cur = _position_of(poly, z)
        cur = int(cur)
    else:
        pos = np.array(z.x, dtype=float)
        d = np.array([math.cos(z.psi), math.sin(z.psi)])
        cur = -1
    remaining = float(t)
    guard = 0
    while True:
        guard += 1
        if guard > 10_000_000:
            raise UncertainOrbit("flow exceeded bounce budget")
        new_pos, new_d, side, _u, tau, status = sim.step_arrays(
            pos[None, :], d[None, :], np.array([cur]))
        fl = float(tau[0])
        if status[0] == 2:
            raise UncertainOrbit("unresolved boundary hit during flow")
        if remaining < fl - 1e-12 * sim.diam:
            x = pos + remaining * d
            return FlowPoint((float(x[0]), float(x[1])),
                             math.atan2(d[1], d[0]) % (2 * math.pi))
        if status[0] == 1:
            raise SingularOrbit(f"vertex hit at time {t - remaining + fl:.17g}")
        remaining -= fl
        pos, d, cur = new_pos[0], new_d[0], int(side[0])
        if remaining <= 1e-12 * sim.diam:
            return FlowPoint((float(pos[0]), float(pos[1])),
                             math.atan2(d[1], d[0]) % (2 * math.pi))


def min_clearance(poly: PolygonTable, z: PhasePoint) -> float:
    """min over the flight [z, S z] of the rho-distance to the phase boundary.

    rho((x, psi), boundary) minimizes Euclidean+angular distance over vertex
    footed vectors (no angle term) and side-tangent vectors.
    """
    sim = simulator_for(poly)
    si = poly.side_index(z.side)
    x0, x1, psi, _status = sim.flight_segments([si], [z.s], [z.theta])
    return float(sim.clearance_of_segments(x0, x1, psi)[0])


def stays_clear(poly: PolygonTable, z: PhasePoint, a: float, T: float) -> str:
    """Membership in G_a^T: every flight started within time T keeps
    clearance at least ``a``.  Returns "true", "false", or "uncertain"."""
    cur = z
    elapsed = 0.0
    while elapsed <= T:
        c = min_clearance(poly, cur)
        if c < a:
            return "false"
        res = step(poly, cur)
        if res.kind == "singular":
            # the flight ends in a vertex: clearance 0 inside the horizon
            return "false"
        if res.kind == "uncertain":
            return "uncertain"
        elapsed += res.flight
        cur = res.next
    return "true"
