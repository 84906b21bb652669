"""Certified enumeration of feasible words and saddle connections.

The word tree is walked depth-first in label order (hence lexicographically),
extending each corridor's endpoint hulls incrementally.  Empty beams prune
whole subtrees (sound for every simple polygon); uncertain beams, which only
arise on non-convex polygons when the witness search fails, are descended
optimistically and tracked in ``[p_min, p_max]`` brackets.  Saddle connections
are verified segment-by-segment with exact arithmetic, so their counts stay
certified even where word verdicts carry brackets.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientRange, NoConventionFits, NotConvex, PrecisionExhausted
from .geometry import PolygonTable, convex_hull
from .unfolding import (
    RAW_IDENTITY,
    SaddleConnection,
    beam_verdict,
    connection_candidates_for_word,
    corridor_for,
)


@dataclass
class WordTree:
    """Factor-closed prefix tree of feasible words (symbols are side labels)."""

    n_max: int
    verdicts: dict  # word tuple -> "nonempty" | "uncertain"

    def words_at(self, n: int) -> list:
        return sorted(w for w in self.verdicts if len(w) == n)

    def children(self, word: tuple) -> list:
        n = len(word) + 1
        return sorted(w for w in self.verdicts
                      if len(w) == n and w[:-1] == word)

    def __contains__(self, word) -> bool:
        return tuple(word) in self.verdicts


@dataclass
class CountTable:
    """Per-depth counters with honest uncertainty brackets."""

    polygon_name: str
    side_count: int
    convex: bool
    n_max: int
    p: list = field(default_factory=list)          # index n-1
    uncertain: list = field(default_factory=list)  # index n-1
    nc_exact_oriented: list = field(default_factory=list)   # index links-1
    nc_exact_unoriented: list = field(default_factory=list)
    self_reversed: list = field(default_factory=list)
    ng_lengths: list = field(default_factory=list)  # sorted floats
    ng_certified_horizon: float = 0.0

    @property
    def p_min(self) -> list:
        return list(self.p)

    @property
    def p_max(self) -> list:
        return [a + b for a, b in zip(self.p, self.uncertain)]

    def nc_cum_oriented(self, j: int, nc0: int = 0) -> int:
        if j < 0:
            return 0
        return nc0 + sum(self.nc_exact_oriented[:j])

    def nc_cum_unoriented(self, j: int, nc0: int = 0) -> int:
        if j < 0:
            return 0
        return nc0 + sum(self.nc_exact_unoriented[:j])

    def ng(self, t: float) -> int:
        import bisect
        return bisect.bisect_right(self.ng_lengths, t)


# ---------------------------------------------------------------------------
# the DFS core
# ---------------------------------------------------------------------------

class _Node:
    __slots__ = ("depth", "side", "frame", "window", "parent",
                 "lh", "rh", "verdict", "witness")

    def __init__(self, depth, side, frame, window, parent, lh, rh, verdict,
                 witness=None):
        self.depth = depth
        self.side = side
        self.frame = frame
        self.window = window
        self.parent = parent
        self.lh = lh
        self.rh = rh
        self.verdict = verdict
        self.witness = witness

    def path(self):
        """(side indices, frames, windows) from the root down to this node."""
        chain = []
        n = self
        while n is not None:
            chain.append(n)
            n = n.parent
        chain.reverse()
        return ([n.side for n in chain], [n.frame for n in chain],
                [n.window for n in chain])


def _walk(poly: PolygonTable, n_max: int, roots: Sequence[int], on_node):
    """DFS over feasible words; calls on_node(node, word_indices, frames,
    windows) for every nonempty/uncertain node in lexicographic order."""
    cor = corridor_for(poly)
    labels = poly.labels
    m = cor.num_sides
    order = sorted(range(m), key=lambda i: labels[i])
    stack = []
    for i in sorted(roots, key=lambda i: labels[i], reverse=True):
        win = cor.window(RAW_IDENTITY, i)
        lh = convex_hull((win[0],))
        rh = convex_hull((win[1],))
        word = (labels[i],)
        verdict, wit, _s = beam_verdict(poly, word, (win,), lh, rh,
                                       want_witness=not poly.convex)
        if verdict != "empty":
            stack.append(_Node(1, i, RAW_IDENTITY, win, None, lh, rh,
                               verdict, wit))
    while stack:
        node = stack.pop()
        idx, frames, windows = node.path()
        on_node(node, idx, frames, windows)
        if node.depth >= n_max:
            continue
        word_prefix = tuple(labels[i] for i in idx)
        for c in reversed(order):
            if c == node.side:
                continue  # consecutive repeats are infeasible in any polygon
            frame = cor.extend_frame(node.frame, c)
            win = cor.window(frame, c)
            lh = convex_hull(node.lh + (win[0],))
            rh = convex_hull(node.rh + (win[1],))
            word = word_prefix + (labels[c],)
            verdict, wit, _s = beam_verdict(poly, word,
                                            tuple(windows) + (win,), lh, rh,
                                            prev_witness=node.witness,
                                            want_witness=not poly.convex)
            if verdict == "empty":
                continue
            stack.append(_Node(node.depth + 1, c, frame, win, node,
                               lh, rh, verdict, wit))


def _enumerate_job(poly: PolygonTable, n_max: int, roots, collect_to: int,
                   want_connections: bool):
    p = [0] * n_max
    unc = [0] * n_max
    words: dict = {}
    conns: dict = {}
    labels = poly.labels

    def on_node(node, idx, frames, windows):
        d = node.depth
        if node.verdict == "nonempty":
            p[d - 1] += 1
        else:
            unc[d - 1] += 1
        if d <= collect_to:
            words[tuple(labels[i] for i in idx)] = node.verdict
        if want_connections:
            for c in connection_candidates_for_word(
                    poly, None, idx=idx, frames=frames, windows=windows):
                k = c.key
                old = conns.get(k)
                if old is None or c.word < old.word:
                    conns[k] = c

    _walk(poly, n_max, roots, on_node)
    return p, unc, words, conns


def _enumerate_job_star(args):
    return _enumerate_job(*args)


def _run_enumeration(poly: PolygonTable, n_max: int, collect_to: int,
                     want_connections: bool, threads: int):
    if not poly.is_exact():
        raise PrecisionExhausted(
            "enumeration requires exact polygon data; rationalize coordinates")
    roots = list(range(poly.num_sides))
    if threads <= 1 or poly.num_sides < 2:
        return _enumerate_job(poly, n_max, roots, collect_to,
                              want_connections)
    jobs = [(poly, n_max, [r], collect_to, want_connections)
            for r in sorted(roots, key=lambda i: poly.labels[i])]
    p = [0] * n_max
    unc = [0] * n_max
    words: dict = {}
    conns: dict = {}
    with ProcessPoolExecutor(max_workers=threads) as ex:
        for jp, junc, jwords, jconns in ex.map(_enumerate_job_star, jobs):
            p = [a + b for a, b in zip(p, jp)]
            unc = [a + b for a, b in zip(unc, junc)]
            words.update(jwords)
            for k, c in jconns.items():
                old = conns.get(k)
                if old is None or c.word < old.word:
                    conns[k] = c
    return p, unc, words, conns


def enumerate_words(poly: PolygonTable, n_max: int, collect_to: Optional[int] = None,
                    threads: int = 1,
                    max_uncertain_fraction: float = 1.0):
    """All feasible words to depth n_max.

    Returns ``(WordTree, CountTable)``; the tree holds words up to
    ``collect_to`` (default: min(n_max, 12)) to bound memory at deep runs.
    """
    if n_max < 1:
        raise InsufficientRange("n_max must be at least 1")
    if collect_to is None:
        collect_to = min(n_max, 12)
    p, unc, words, _ = _run_enumeration(poly, n_max, collect_to, False,
                                        threads)
    _check_budget(p, unc, max_uncertain_fraction)
    counts = CountTable(poly.name, poly.num_sides, poly.convex, n_max,
                        p=p, uncertain=unc)
    return WordTree(collect_to, words), counts


def _check_budget(p, unc, frac):
    for n, (a, b) in enumerate(zip(p, unc), start=1):
        if b > frac * max(a, 1):
            raise PrecisionExhausted(
                f"{b} unresolved words at depth {n} exceed budget")


def enumerate_saddle_connections(poly: PolygonTable, n_max: int,
                                 threads: int = 1,
                                 max_uncertain_fraction: float = 1.0):
    """All saddle connections of combinatorial length at most n_max.

    Connections are discovered along feasible words, deduplicated by their
    geometric key (a connection departing a corner is found under both
    incident starting sides), and verified exactly.  Returns
    ``(connections, CountTable)`` with connections sorted by (links, word,
    start, end).
    """
    if n_max < 1:
        raise InsufficientRange("n_max must be at least 1")
    p, unc, _w, conns = _run_enumeration(poly, n_max, 0, True, threads)
    _check_budget(p, unc, max_uncertain_fraction)

    connections = sorted(conns.values(),
                         key=lambda c: (c.links, c.word, c.start_vertex,
                                        c.end_vertex))
    nc_or = [0] * n_max
    for c in connections:
        nc_or[c.links - 1] += 1
    classes = [set() for _ in range(n_max)]
    selfrev = [0] * n_max
    for c in connections:
        k, rk = c.key, c.reversed_key
        classes[c.links - 1].add(min(k, rk))
        if k == rk:
            selfrev[c.links - 1] += 1
    lo, _hi, _warn = _length_bounds(poly, n_max)
    counts = CountTable(
        poly.name, poly.num_sides, poly.convex, n_max,
        p=p, uncertain=unc,
        nc_exact_oriented=nc_or,
        nc_exact_unoriented=[len(s) for s in classes],
        self_reversed=selfrev,
        ng_lengths=sorted(c.geom_length for c in connections),
        ng_certified_horizon=lo,
    )
    return connections, counts


def _length_bounds(poly, n):
    from .unfolding import geometric_length_bounds
    return geometric_length_bounds(poly, n)


def side_connections(poly: PolygonTable) -> list:
    """The sides themselves as degenerate one-link connections.

    Excluded from every N_c count, but exposed because perturbation analysis
    treats a blocking side like a saddle connection.
    """
    out = []
    cor = corridor_for(poly)
    for i in range(poly.num_sides):
        a, b = cor.side_ends[i]
        d = (b[0] - a[0], b[1] - a[1])
        out.append(SaddleConnection(
            start_vertex=i, end_vertex=(i + 1) % poly.num_sides,
            word=(poly.labels[i],), links=1,
            geom_length=poly.side_lengths[i],
            geom_length_sq=d[0] * d[0] + d[1] * d[1],
            direction=math.atan2(float(d[1]), float(d[0])),
            u=a, v=b, first_dir=d, last_dir=d))
    return out


# ---------------------------------------------------------------------------
# the counting identity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Convention:
    variant: str      # "cumulative" | "exact"
    orientation: str  # "oriented" | "unoriented"
    shift: int        # index shift k: p(n) = sum_{j=0}^{n-1} Nc(j + k)
    nc0: int          # value assigned to Nc(0)

    def describe(self) -> str:
        return (f"{self.variant}/{self.orientation}, shift {self.shift:+d}, "
                f"Nc(0) = {self.nc0}")


@dataclass
class IdentityReport:
    convention: Convention
    candidates: list
    per_n_ok: list   # (n, lhs p(n), rhs sum, ok) tuples
    passed: bool


def _nc_value(counts: CountTable, conv: Convention, j: int) -> int:
    if j < 0:
        return 0
    if conv.orientation == "oriented":
        exact = counts.nc_exact_oriented
    else:
        exact = counts.nc_exact_unoriented
    if conv.variant == "cumulative":
        return conv.nc0 + sum(exact[:j])
    return conv.nc0 if j == 0 else (exact[j - 1] if j <= len(exact) else 0)


def check_counting_identity(counts: CountTable,
                            pin_depth: int = 3) -> IdentityReport:
    """Pin the convention making p(n) = sum_{j<n} N_c(j) exact, then verify.

    The convention space covers cumulative-vs-exact counters, oriented vs
    unoriented connections, an index shift in {-1, 0, 1}, and the undefined
    N_c(0) in {0, sides, 2*sides}.  Raises :class:`NotConvex` for non-convex
    polygons (correction terms possible there) and :class:`NoConventionFits`
    when nothing matches, which signals an enumeration bug.
    """
    if not counts.convex:
        raise NotConvex("identity is only asserted for convex polygons")
    n_max = counts.n_max
    pin_depth = min(pin_depth, n_max)
    ell = counts.side_count
    candidates = []
    for variant in ("cumulative", "exact"):
        for orientation in ("oriented", "unoriented"):
            for shift in (-1, 0, 1):
                for nc0 in (0, ell, 2 * ell):
                    conv = Convention(variant, orientation, shift, nc0)
                    ok = all(
                        counts.p[n - 1] == sum(
                            _nc_value(counts, conv, j + shift)
                            for j in range(n))
                        for n in range(1, pin_depth + 1))
                    if ok:
                        candidates.append(conv)
    if not candidates:
        raise NoConventionFits(
            f"no convention reproduces p(n) for n <= {pin_depth}")

    best = None
    best_rows = None
    for conv in candidates:
        rows = []
        all_ok = True
        for n in range(1, n_max + 1):
            rhs = sum(_nc_value(counts, conv, j + conv.shift)
                      for j in range(n))
            ok = counts.p[n - 1] == rhs
            all_ok = all_ok and ok
            rows.append((n, counts.p[n - 1], rhs, ok))
        if all_ok:
            best = conv
            best_rows = rows
            break
        if best_rows is None:
            best_rows = rows
            best = conv
    passed = all(r[3] for r in best_rows)
    return IdentityReport(best, candidates, best_rows, passed)


# ---------------------------------------------------------------------------
# entropy estimates and power-law fits
# ---------------------------------------------------------------------------

@dataclass
class EntropyEstimates:
    n_max: int
    lower_poly: float     # ln p(n)/ln n at the window start
    upper_poly: float     # ln p(n)/ln n at n_max
    p_slope: float
    nc_slope: Optional[float]
    window: tuple


def loglog_slope(ns, values) -> float:
    xs = np.log(np.asarray(ns, dtype=float))
    ys = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(xs, ys, 1)[0])


def entropy_estimates(counts: CountTable,
                      window: Optional[tuple] = None) -> EntropyEstimates:
    """Finite-horizon polynomial-entropy estimates from a count table."""
    n_max = counts.n_max
    if n_max < 10:
        raise InsufficientRange("need counts to depth at least 10")
    if window is None:
        window = (max(2, n_max // 2), n_max)
    lo, hi = window
    if hi > n_max or lo < 1 or hi - lo < 3:
        raise InsufficientRange(f"bad fit window {window}")
    ns = list(range(lo, hi + 1))
    ps = [counts.p[n - 1] for n in ns]
    if min(ps) <= 0:
        raise InsufficientRange("p(n) vanishes inside the fit window")
    p_slope = loglog_slope(ns, ps)
    nc_slope = None
    if counts.nc_exact_oriented:
        ncs = [counts.nc_cum_oriented(n) for n in ns]
        if min(ncs) > 0:
            nc_slope = loglog_slope(ns, ncs)
    return EntropyEstimates(
        n_max=n_max,
        lower_poly=math.log(counts.p[lo - 1]) / math.log(lo),
        upper_poly=math.log(counts.p[hi - 1]) / math.log(hi),
        p_slope=p_slope,
        nc_slope=nc_slope,
        window=window,
    )


# ---------------------------------------------------------------------------
# the independent random-ray oracle
# ---------------------------------------------------------------------------

def encode_words(poly: PolygonTable, words) -> set:
    """Little-endian integer codes of words (side-index digits)."""
    base = poly.num_sides
    out = set()
    for w in words:
        code = 0
        mult = 1
        for sym in w:
            code += poly.side_index(sym) * mult
            mult *= base
        out.add(code)
    return out


def sample_realized_words(poly: PolygonTable, depth: int, rays: int,
                          seed: int = 0, chunk: int = 250_000):
    """Word sets realized by stratified random rays, one set per depth.

    This is the simulation-side oracle: rays launch from a jittered grid over
    (side, s, theta), and any ray passing a vertex inside the certification
    band is dropped so no noisy word can leak in.  Returns a list of sets of
    integer codes, index n-1 for word length n.
    """
    from .dynamics import simulator_for

    sim = simulator_for(poly)
    m = poly.num_sides
    realized = [set() for _ in range(depth)]
    rng_root = np.random.SeedSequence(seed)
    per_side = max(1, rays // m)
    n_s = 64
    n_t = 64
    rounds = max(1, math.ceil(per_side / (n_s * n_t)))
    base = m

    grid_s, grid_t = np.meshgrid(np.arange(n_s), np.arange(n_t),
                                 indexing="ij")
    grid_s = grid_s.ravel()
    grid_t = grid_t.ravel()
    cells = n_s * n_t
    side_streams = rng_root.spawn(m)

    for side in range(m):
        L = sim.length[side]
        streams = side_streams[side].spawn(rounds)
        for r in range(rounds):
            rng = np.random.default_rng(streams[r])
            us = (grid_s + rng.random(cells)) / n_s
            ut = (grid_t + rng.random(cells)) / n_t
            s = us * L
            theta = ut * math.pi
            keep = (theta > 1e-9) & (theta < math.pi - 1e-9)
            s, theta = s[keep], theta[keep]
            for lo in range(0, s.size, chunk):
                sl = slice(lo, lo + chunk)
                codes, alive = sim.trace_codes(
                    np.full(s[sl].shape, side, dtype=np.int64),
                    s[sl], theta[sl], depth)
                acc = np.zeros(alive.shape, dtype=np.int64)
                mult = 1
                ok = np.ones(alive.shape, dtype=bool)
                for n in range(depth):
                    ok &= codes[n] >= 0
                    acc = acc + np.where(ok, codes[n], 0) * mult
                    mult *= base
                    if not ok.any():
                        break
                    realized[n].update(np.unique(acc[ok]).tolist())
    return realized
