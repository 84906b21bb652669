"""Command-line entry point: every experiment behind one executable.

Exit codes: 0 success, 1 usage or validation failure, 2 precision exhaustion.
Each output CSV carries a manifest comment line plus a JSON sidecar; runs with
equal manifests produce byte-identical CSVs at any thread count.
"""

from __future__ import annotations

import argparse
import math
import sys
import time

from .errors import BilliardError, NotConvex, PrecisionExhausted
from .geometry import load_polygon
from .reporting import make_manifest, write_csv


def _add_common(p, polygon=True):
    if polygon:
        p.add_argument("--polygon", required=True, help="polygon JSON file")
        p.add_argument("--allow-clockwise", action="store_true",
                       help="auto-reverse clockwise vertex input")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--plot", action="store_true",
                   help="render a PNG figure next to the output")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="billiardlab",
        description="polygonal billiard complexity experiments")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("simulate", help="trace one orbit to CSV")
    _add_common(p)
    p.add_argument("--side", required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--out", required=True)

    p = sub.add_parser("unfold", help="render a word's unfolding")
    _add_common(p)
    p.add_argument("--word", required=True)
    p.add_argument("--svg", required=True)

    p = sub.add_parser("count", help="word and connection counts")
    _add_common(p)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("spectrum", help="connection length spectrum")
    _add_common(p)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("identity", help="pin and verify the counting identity")
    _add_common(p)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--out")

    p = sub.add_parser("cells", help="inradius curve of one orbit's cells")
    _add_common(p)
    p.add_argument("--side", required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--nmax", type=int, required=True)
    p.add_argument("--f", default="ceil-log-squared")
    p.add_argument("--out", required=True)

    pm = sub.add_parser("metric", help="measure-theoretic experiments")
    msub = pm.add_subparsers(dest="metric_cmd", required=True)

    p = msub.add_parser("ba-curve")
    _add_common(p)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--a", type=float, nargs="+",
                   default=[0.1, 0.05, 0.025, 0.0125])
    p.add_argument("--out", required=True)

    p = msub.add_parser("prop9")
    _add_common(p)
    p.add_argument("--a", type=float, default=0.2)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--samples", type=int, default=1000,
                   help="qualifying sample target")
    p.add_argument("--out", required=True)

    p = msub.add_parser("thm-evidence")
    _add_common(p)
    p.add_argument("--f", default="ceil-log-squared")
    p.add_argument("--nmax", type=int, default=12)
    p.add_argument("--samples", type=int, default=60)
    p.add_argument("--out", required=True)

    p = msub.add_parser("cover")
    _add_common(p)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--samples", type=int, default=20_000)
    p.add_argument("--out", required=True)

    pp = sub.add_parser("perturb", help="perturbation experiments")
    psub = pp.add_subparsers(dest="perturb_cmd", required=True)

    p = psub.add_parser("persist")
    _add_common(p)
    p.add_argument("--delta", type=float, default=1e-4)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--depth", type=int, default=5)
    p.add_argument("--out", required=True)

    p = psub.add_parser("scan")
    _add_common(p, polygon=False)
    p.add_argument("--family", required=True, help="family JSON file")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--out", required=True)

    p = psub.add_parser("theta")
    _add_common(p)
    p.add_argument("--chain-id", type=int, default=0)
    p.add_argument("--depth", type=int, default=1,
                   help="enumeration depth for chain detection")
    p.add_argument("--horizon", type=int, default=4)
    p.add_argument("--out", required=True)

    p = psub.add_parser("fit")
    _add_common(p)
    p.add_argument("--depth", type=int, default=24)
    p.add_argument("--window", type=int, nargs=2)
    p.add_argument("--out", required=True)

    return ap


# ---------------------------------------------------------------------------

def _load(args):
    return load_polygon(args.polygon,
                        allow_clockwise=getattr(args, "allow_clockwise",
                                                False))


def _run_simulate(args) -> int:
    from .dynamics import PhasePoint, step

    poly = _load(args)
    z = PhasePoint(args.side, args.s, args.theta)
    rows = []
    cumulative = 0.0
    cur = z
    status = "ok"
    for k in range(args.steps):
        res = step(poly, cur)
        if res.kind != "ok":
            status = res.kind
            break
        cumulative += res.flight
        rows.append((k, cur.side, cur.s, cur.theta, res.flight, cumulative))
        cur = res.next
    man = make_manifest("simulate", poly, args.seed, side=args.side,
                        s=args.s, theta=args.theta, steps=args.steps,
                        status=status)
    write_csv(args.out, ["step", "side", "s", "theta", "flight",
                         "cumulative_time"], rows, man)
    if status != "ok":
        print(f"orbit truncated at step {len(rows)} ({status})",
              file=sys.stderr)
    return 0


def _run_unfold(args) -> int:
    from .reporting import plot_unfolding, unfolding_svg
    from .unfolding import beam_feasible, unfold_word

    poly = _load(args)
    word = list(args.word)
    edges = unfold_word(poly, word[0], word)
    beam = beam_feasible(poly, word)
    svg = unfolding_svg(edges, beam.witness)
    with open(args.svg, "w", encoding="utf-8") as fh:
        fh.write(svg)
    print(f"word {args.word}: {beam.verdict}")
    if args.plot:
        plot_unfolding(edges, beam.witness,
                       args.svg.rsplit(".", 1)[0] + ".png")
    return 0


def _run_count(args) -> int:
    from .enumeration import enumerate_saddle_connections

    poly = _load(args)
    t0 = time.time()
    _conns, counts = enumerate_saddle_connections(
        poly, args.depth, threads=args.threads)
    rows = []
    for n in range(1, args.depth + 1):
        rows.append((
            n, counts.p[n - 1], counts.p_min[n - 1], counts.p_max[n - 1],
            counts.nc_cum_oriented(n), counts.nc_cum_unoriented(n),
            counts.uncertain[n - 1]))
    man = make_manifest("count", poly, args.seed, depth=args.depth,
                        threads=args.threads)
    write_csv(args.out, ["n", "p", "p_min", "p_max", "Nc_oriented",
                         "Nc_unoriented", "uncertain"], rows, man,
              wall_time=time.time() - t0)
    if args.plot:
        ns = list(range(1, args.depth + 1))
        from .reporting import plot_counts
        plot_counts(ns, [counts.p[n - 1] for n in ns],
                    [counts.nc_cum_oriented(n) for n in ns],
                    args.out.rsplit(".", 1)[0] + ".png",
                    title=poly.name)
    return 0


def _run_spectrum(args) -> int:
    from .enumeration import enumerate_saddle_connections

    poly = _load(args)
    conns, counts = enumerate_saddle_connections(poly, args.depth,
                                                 threads=args.threads)
    conns = sorted(conns, key=lambda c: (c.geom_length_sq, c.word))
    rows = [(c.geom_length, c.links, "".join(c.word), c.start_vertex,
             c.end_vertex) for c in conns]
    man = make_manifest("spectrum", poly, args.seed, depth=args.depth,
                        certified_horizon=counts.ng_certified_horizon)
    write_csv(args.out, ["length", "links", "word", "start_vertex",
                         "end_vertex"], rows, man)
    return 0


def _run_identity(args) -> int:
    from .enumeration import check_counting_identity, \
        enumerate_saddle_connections

    poly = _load(args)
    _conns, counts = enumerate_saddle_connections(poly, args.depth,
                                                  threads=args.threads)
    try:
        rep = check_counting_identity(counts)
    except NotConvex:
        print("identity check skipped: polygon is not convex "
              "(correction terms possible)")
        return 0
    print(f"pinned convention: {rep.convention.describe()}")
    for n, lhs, rhs, ok in rep.per_n_ok:
        print(f"  n={n}: p={lhs} sum={rhs} {'ok' if ok else 'FAIL'}")
    print("PASS" if rep.passed else "FAIL")
    if args.out:
        man = make_manifest("identity", poly, args.seed, depth=args.depth,
                            convention=rep.convention.describe(),
                            passed=rep.passed)
        write_csv(args.out, ["n", "p", "sum_nc", "ok"], rep.per_n_ok, man)
    return 0 if rep.passed else 1


def _run_cells(args) -> int:
    from .cells import inradius_curve
    from .dynamics import PhasePoint
    from .metric import resolve_f

    poly = _load(args)
    f = resolve_f(args.f)
    z = PhasePoint(args.side, args.s, args.theta)
    curve = inradius_curve(poly, z, args.nmax, seed=args.seed)
    rows = []
    ref1, ref2 = [], []
    for n, lo, hi in zip(curve.ns, curve.r_lower, curve.r_upper):
        fn = f.fn(n)
        ref1.append(1.0 / (n ** 3 * fn))
        ref2.append(1.0 / (n ** 2 * fn))
        rows.append((n, lo, hi, ref1[-1], ref2[-1]))
    man = make_manifest("cells", poly, args.seed, side=args.side, s=args.s,
                        theta=args.theta, nmax=args.nmax, f=args.f)
    write_csv(args.out, ["n", "r_lower", "r_upper", "ref_curve_t1",
                         "ref_curve_t2"], rows, man)
    if args.plot:
        from .reporting import plot_inradius
        plot_inradius(curve.ns, curve.r_lower, curve.r_upper, ref1, ref2,
                      args.out.rsplit(".", 1)[0] + ".png")
    return 0


def _run_metric(args) -> int:
    poly = _load(args)
    if args.metric_cmd == "ba-curve":
        from .metric import estimate_Ba
        stats = estimate_Ba(poly, args.a, samples=args.samples,
                            seed=args.seed)
        rows = list(zip(stats.a_values, stats.mu_hat, stats.ci_lo,
                        stats.ci_hi, stats.ratio))
        man = make_manifest("metric ba-curve", poly, args.seed,
                            samples=stats.samples,
                            unresolved=stats.unresolved)
        write_csv(args.out, ["a", "mu_hat", "ci_lo", "ci_hi", "ratio"],
                  rows, man)
        if args.plot:
            from .reporting import plot_ba_curve
            plot_ba_curve(stats.a_values, stats.mu_hat,
                          args.out.rsplit(".", 1)[0] + ".png")
        return 0
    if args.metric_cmd == "prop9":
        from .metric import verify_prop9
        rep = verify_prop9(poly, args.a, args.n,
                           qualifying_target=args.samples, seed=args.seed)
        rows = [(rep.a, rep.n, rep.T_n, rep.radius, rep.sampled,
                 rep.qualifying, rep.passed, rep.failed, rep.unresolved)]
        man = make_manifest("metric prop9", poly, args.seed)
        write_csv(args.out, ["a", "n", "T_n", "radius", "sampled",
                             "qualifying", "passed", "failed", "unresolved"],
                  rows, man)
        print(f"prop9: {rep.passed}/{rep.qualifying} passed, "
              f"{rep.failed} failed, {rep.unresolved} unresolved")
        return 0 if rep.failed == 0 else 1
    if args.metric_cmd == "thm-evidence":
        from .metric import theorem_experiments
        rep = theorem_experiments(poly, args.f, args.nmax,
                                  samples=args.samples, seed=args.seed)
        rows = [(i, t1, t2) for i, (t1, t2) in
                enumerate(zip(rep.t1_tail_start, rep.t2_hit_counts))]
        man = make_manifest("metric thm-evidence", poly, args.seed,
                            f=rep.f_name, n_max=rep.n_max, label=rep.label,
                            t1_tail_fraction=rep.t1_tail_fraction,
                            singular_dropped=rep.singular_dropped)
        write_csv(args.out, ["sample", "t1_tail_start", "t2_hit_count"],
                  rows, man)
        print(f"{rep.label}: tail fraction {rep.t1_tail_fraction:.3f} "
              f"at n_max={rep.n_max}")
        return 0
    if args.metric_cmd == "cover":
        from .enumeration import sample_realized_words
        from .metric import hamming_cover
        from .dynamics import simulator_for
        from .metric import LiouvilleSampler
        import numpy as np

        sim = simulator_for(poly)
        sampler = LiouvilleSampler(poly, args.seed)
        side, s, theta = sampler.sample_arrays(args.samples)
        codes, alive = sim.trace_codes(side, s, theta, args.n)
        words = ["".join(poly.labels[c] for c in codes[:, i])
                 for i in np.nonzero(alive)[0]]
        est = hamming_cover(words, args.n, args.eps)
        man = make_manifest("metric cover", poly, args.seed,
                            samples=args.samples)
        write_csv(args.out, ["n", "eps", "P_upper", "distinct",
                             "sample_size", "ref_curve"],
                  [(est.n, est.eps, est.P_upper, est.distinct_words,
                    est.sample_size, est.reference_curve)], man)
        print(f"cover: P_upper={est.P_upper} distinct={est.distinct_words} "
              f"ref={est.reference_curve:g}")
        return 0
    raise AssertionError(args.metric_cmd)


def _run_perturb(args) -> int:
    if args.perturb_cmd == "scan":
        from .perturbation import chain_creation_scan, family_from_json
        with open(args.family, "r", encoding="utf-8") as fh:
            family = family_from_json(fh.read())
        events = chain_creation_scan(family, args.depth,
                                     threads=args.threads)
        rows = [(str(e.t_star), str(e.t_grid), e.parent_kind,
                 "".join(e.connection.word), e.connection.start_vertex,
                 e.connection.end_vertex,
                 "-".join(map(str, e.parent.vertex_ids)))
                for e in events]
        man = make_manifest("perturb scan", family.base, args.seed,
                            depth=args.depth, events=len(events))
        write_csv(args.out, ["t_star", "t_grid", "parent_kind", "word",
                             "start_vertex", "end_vertex", "parent_chain"],
                  rows, man)
        print(f"{len(events)} creation events")
        return 0

    poly = _load(args)
    if args.perturb_cmd == "persist":
        from .perturbation import persistence_check, perturb
        rows = []
        all_ok = True
        for trial in range(args.trials):
            qhat = perturb(poly, args.delta, seed=args.seed + trial)
            rep = persistence_check(poly, qhat, args.depth,
                                    threads=args.threads)
            ok = rep.inequality_ok and not rep.missing
            all_ok = all_ok and ok
            rows.append((trial, args.delta, ok, rep.matched,
                         len(rep.missing), rep.safe_delta))
        man = make_manifest("perturb persist", poly, args.seed,
                            delta=args.delta, trials=args.trials,
                            depth=args.depth)
        write_csv(args.out, ["trial", "delta", "ok", "matched", "missing",
                             "safe_delta"], rows, man)
        print("persistence:", "PASS" if all_ok else "FAIL")
        return 0 if all_ok else 1
    if args.perturb_cmd == "theta":
        from .enumeration import enumerate_saddle_connections
        from .perturbation import theta_margin
        from .unfolding import detect_saddle_chains
        conns, _ = enumerate_saddle_connections(poly, args.depth,
                                                threads=args.threads)
        chains = detect_saddle_chains(conns, poly)
        chains = sorted(chains, key=lambda c: (-len(c.connections),
                                               c.vertex_ids))
        if not chains:
            print("no chains found", file=sys.stderr)
            return 1
        if not 0 <= args.chain_id < len(chains):
            print(f"chain id out of range (found {len(chains)})",
                  file=sys.stderr)
            return 1
        chain = chains[args.chain_id]
        rep = theta_margin(poly, chain, args.horizon)
        man = make_manifest("perturb theta", poly, args.seed,
                            chain="-".join(map(str, chain.vertex_ids)),
                            horizon=args.horizon)
        write_csv(args.out, ["chain", "links", "angle", "degenerate",
                             "sc_count"],
                  [("-".join(map(str, chain.vertex_ids)), rep.chain_links,
                    rep.angle, rep.degenerate, rep.sc_count)], man)
        print(f"theta margin {rep.angle:.6f} rad "
              f"({'degenerate' if rep.degenerate else 'regular'})")
        return 0
    if args.perturb_cmd == "fit":
        from .perturbation import exponent_fit
        window = tuple(args.window) if args.window else None
        rep = exponent_fit(poly, args.depth, window=window,
                           threads=args.threads)
        rows = list(zip(range(rep.window[0], rep.window[1] + 1),
                        rep.p_values, rep.nc_values))
        man = make_manifest("perturb fit", poly, args.seed,
                            depth=args.depth, window=list(rep.window),
                            p_slope=rep.p_slope, nc_slope=rep.nc_slope)
        write_csv(args.out, ["n", "p", "Nc_oriented_cum"], rows, man)
        print(f"p slope {rep.p_slope:.3f}, Nc slope {rep.nc_slope:.3f} "
              f"over n in {rep.window}")
        return 0
    raise AssertionError(args.perturb_cmd)


_RUNNERS = {
    "simulate": _run_simulate,
    "unfold": _run_unfold,
    "count": _run_count,
    "spectrum": _run_spectrum,
    "identity": _run_identity,
    "cells": _run_cells,
    "metric": _run_metric,
    "perturb": _run_perturb,
}


def dispatch(argv) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return _RUNNERS[args.cmd](args)
    except PrecisionExhausted as exc:
        print(f"precision exhausted: {exc}", file=sys.stderr)
        return 2
    except BilliardError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
