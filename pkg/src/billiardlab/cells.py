"""n-cells of the billiard map: membership probing, ball inclusion, inradius.

A cell is probed, not reconstructed: membership of a phase point is decided by
tracing its word and comparing against the reference.  False verdicts always
carry an exact witness probe; true verdicts are sampling-based over a boundary
mesh plus interior samples of the L1 ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dynamics import PhasePoint, simulator_for, trace
from .errors import EmptyCell, SingularOrbit
from .geometry import PolygonTable


@dataclass(frozen=True)
class CellProbe:
    """The n-cell of a reference point, as a membership test."""

    word: tuple
    reference: PhasePoint
    n: int
    membership: Callable  # PhasePoint -> "in" | "out" | "uncertain"

    @property
    def word_str(self) -> str:
        return "".join(self.word)


@dataclass(frozen=True)
class BallVerdict:
    verdict: str  # "true" | "false" | "uncertain"
    witness: Optional[PhasePoint]
    probes: int


@dataclass
class InradiusCurve:
    ns: list
    r_lower: list
    r_upper: list
    uncertain: list


def cell_of(poly: PolygonTable, z: PhasePoint, n: int) -> CellProbe:
    """Word of z's n-cell plus a trace-based membership test."""
    ref = trace(poly, z, n)
    if ref.status != "ok":
        raise SingularOrbit(
            f"reference orbit dies at step {ref.failed_index} ({ref.status})")

    def membership(z2: PhasePoint) -> str:
        t = trace(poly, z2, n)
        if t.status != "ok":
            return "uncertain" if t.status == "uncertain" else "out"
        return "in" if t.word == ref.word else "out"

    return CellProbe(word=ref.word, reference=z, n=n, membership=membership)


def _global_to_phase(poly: PolygonTable, gs: np.ndarray):
    """Map global arc length (mod perimeter) to (side index, local s)."""
    offsets = np.asarray(poly.side_offsets)
    gs = np.mod(gs, poly.perimeter)
    side = np.searchsorted(offsets, gs, side="right") - 1
    side = np.clip(side, 0, poly.num_sides - 1)
    return side, gs - offsets[side]


def _ball_offsets(r: float, boundary_step: Optional[float],
                  interior_samples: int, rng) -> np.ndarray:
    """(ds, dtheta) offsets covering the open L1 ball of radius r."""
    h = boundary_step if boundary_step is not None else r / 64.0
    k = max(1, math.ceil(r / h))
    # boundary of the diamond |ds| + |dt| = r_eff, 4k points
    r_eff = r * (1.0 - 1e-9)
    ts = np.arange(4 * k) / float(k)  # in [0, 4)
    seg = np.floor(ts).astype(int)
    frac = ts - seg
    ds = np.empty(4 * k)
    dt = np.empty(4 * k)
    for i, (sa, sb, ta, tb) in enumerate(((1, -1, 0, 1), (0, -1, 1, -1),
                                          (-1, 1, 0, -1), (0, 1, -1, 1))):
        m = seg == i
        ds[m] = (sa + sb * frac[m]) * r_eff
        dt[m] = (ta + tb * frac[m]) * r_eff
    pts = [np.stack([ds, dt], axis=1)]
    if interior_samples > 0:
        got = 0
        while got < interior_samples:
            cand = rng.uniform(-r_eff, r_eff, size=(2 * interior_samples, 2))
            cand = cand[np.abs(cand).sum(axis=1) < r_eff]
            take = cand[:interior_samples - got]
            pts.append(take)
            got += take.shape[0]
    return np.concatenate(pts, axis=0)


def ball_in_cell(poly: PolygonTable, z: PhasePoint, r: float, n: int,
                 boundary_step: Optional[float] = None,
                 interior_samples: int = 1000,
                 seed: int = 0) -> BallVerdict:
    """Does the open L1-ball B(z, r) (in global arc length and angle) keep
    z's n-word at every tested point?

    False verdicts carry an exact witness phase point; true verdicts are
    sampling-based (boundary mesh of the diamond plus interior samples).
    """
    if r <= 0:
        raise ValueError("ball radius must be positive")
    sim = simulator_for(poly)
    ref = trace(poly, z, n)
    if ref.status != "ok":
        raise SingularOrbit("reference orbit is singular before depth n")
    ref_codes = np.array([poly.side_index(s) for s in ref.word],
                         dtype=np.int16)

    rng = np.random.default_rng(np.random.SeedSequence((seed, n, 0xB411)))
    offs = _ball_offsets(r, boundary_step, interior_samples, rng)
    gs0 = poly.side_offsets[poly.side_index(z.side)] + z.s
    gs = gs0 + offs[:, 0]
    theta = z.theta + offs[:, 1]
    keep = (theta > 0.0) & (theta < math.pi)
    offs = offs[keep]
    gs = gs[keep]
    theta = theta[keep]
    side, s = _global_to_phase(poly, gs)

    codes, alive = sim.trace_codes(side, s, theta, n)
    match = (codes == ref_codes[:, None]).all(axis=0)
    bad = np.nonzero(alive & ~match)[0]
    if bad.size:
        i = int(bad[0])
        wit = PhasePoint(poly.labels[int(side[i])], float(s[i]),
                         float(theta[i]))
        return BallVerdict("false", wit, int(offs.shape[0]))
    if not alive.all():
        return BallVerdict("uncertain", None, int(offs.shape[0]))
    return BallVerdict("true", None, int(offs.shape[0]))


def inradius_curve(poly: PolygonTable, z: PhasePoint, n_max: int,
                   bracket_factor: float = 1.05,
                   r_floor: float = 1e-9,
                   interior_samples: int = 200,
                   seed: int = 0) -> InradiusCurve:
    """Bisected inradius brackets r(n) of the cells along z's orbit.

    r is nonincreasing in n, so each depth starts from the previous upper
    bracket.  Bisection stops once upper/lower <= bracket_factor.
    """
    ns, lows, highs, uncs = [], [], [], []
    hi = poly.perimeter / 2.0 + math.pi
    for n in range(1, n_max + 1):
        lo = 0.0
        unc = False
        # shrink until a passing radius is found
        probe = min(hi, poly.perimeter / 2.0 + math.pi)
        while probe > r_floor:
            v = ball_in_cell(poly, z, probe, n,
                             interior_samples=interior_samples, seed=seed)
            if v.verdict == "true":
                lo = probe
                break
            if v.verdict == "uncertain":
                unc = True
            probe /= 2.0
        if lo == 0.0:
            ns.append(n)
            lows.append(0.0)
            highs.append(probe * 2.0 if probe > r_floor else r_floor)
            uncs.append(unc)
            hi = highs[-1]
            continue
        hi_n = min(hi, lo * 2.0)
        # ensure hi_n fails
        while True:
            v = ball_in_cell(poly, z, hi_n, n,
                             interior_samples=interior_samples, seed=seed)
            if v.verdict == "true":
                lo = hi_n
                hi_n *= 2.0
            else:
                if v.verdict == "uncertain":
                    unc = True
                break
        while hi_n / lo > bracket_factor:
            mid = math.sqrt(lo * hi_n)
            v = ball_in_cell(poly, z, mid, n,
                             interior_samples=interior_samples, seed=seed)
            if v.verdict == "true":
                lo = mid
            else:
                if v.verdict == "uncertain":
                    unc = True
                hi_n = mid
        ns.append(n)
        lows.append(lo)
        highs.append(hi_n)
        uncs.append(unc)
        hi = hi_n
    return InradiusCurve(ns, lows, highs, uncs)


@dataclass
class StructureReport:
    word: tuple
    sample_size: int
    connected_pass: float
    star_shaped_pass: float
    midpoint_convex_pass: float


def cell_structure_check(poly: PolygonTable, word,
                         samples: int = 400,
                         path_points: int = 17,
                         pair_checks: int = 200,
                         seed: int = 0) -> StructureReport:
    """Sampling-based structure report of a word's cell in the (s, theta)
    chart: path-connectivity, star-shapedness about a median center, and
    midpoint closure.  Chart-dependent convexity is reported, not asserted.
    """
    from .unfolding import beam_feasible

    symbols = tuple(word)
    n = len(symbols)
    beam = beam_feasible(poly, symbols)
    if beam.verdict == "empty":
        raise EmptyCell(f"word {''.join(symbols)} is infeasible")
    sim = simulator_for(poly)
    si = poly.side_index(symbols[0])
    L = poly.side_lengths[si]
    ref_codes = np.array([poly.side_index(s) for s in symbols], dtype=np.int16)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xCE11)))

    accepted = []
    attempts = 0
    while len(accepted) < samples and attempts < 50 * samples:
        batch = max(1024, samples)
        attempts += batch
        s = rng.uniform(0.0, L, batch)
        th = rng.uniform(1e-9, math.pi - 1e-9, batch)
        codes, alive = sim.trace_codes(np.full(batch, si, dtype=np.int64),
                                       s, th, n)
        ok = alive & (codes == ref_codes[:, None]).all(axis=0)
        for i in np.nonzero(ok)[0]:
            accepted.append((float(s[i]), float(th[i])))
            if len(accepted) >= samples:
                break
    if not accepted:
        raise EmptyCell(
            f"no sample of word {''.join(symbols)} found "
            f"({attempts} attempts)")
    pts = np.array(accepted)

    def in_cell(sv, tv):
        keep = (tv > 0) & (tv < math.pi) & (sv >= 0) & (sv <= L)
        out = np.zeros(sv.shape, dtype=bool)
        if keep.any():
            codes, alive = sim.trace_codes(
                np.full(int(keep.sum()), si, dtype=np.int64),
                sv[keep], tv[keep], n)
            out[keep] = alive & (codes == ref_codes[:, None]).all(axis=0)
        return out

    def segment_pass(a, b):
        lam = np.linspace(0.0, 1.0, path_points)
        sv = a[0] + lam * (b[0] - a[0])
        tv = a[1] + lam * (b[1] - a[1])
        return bool(in_cell(sv, tv).all())

    k = min(pair_checks, len(accepted))
    idx = rng.integers(0, len(accepted), size=(k, 2))
    conn_pass = sum(segment_pass(pts[i], pts[j]) for i, j in idx) / max(k, 1)

    center = np.median(pts, axis=0)
    if not in_cell(np.array([center[0]]), np.array([center[1]]))[0]:
        star_pass = 0.0
    else:
        star_idx = rng.integers(0, len(accepted), size=k)
        star_pass = sum(segment_pass(center, pts[i])
                        for i in star_idx) / max(k, 1)

    mids = (pts[idx[:, 0]] + pts[idx[:, 1]]) / 2.0
    mid_pass = float(in_cell(mids[:, 0], mids[:, 1]).mean()) if k else 0.0

    return StructureReport(symbols, len(accepted), conn_pass, star_pass,
                           mid_pass)
