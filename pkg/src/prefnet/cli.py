"""``prefnet`` command line.

Every stochastic subcommand takes ``--seed``; all randomness is derived from
it through named sub-streams, so output never depends on ``--threads``.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import analysis, network, selection, spread
from ._random import derive_rng, derive_seed
from .distmodel import DistributionError
from .network import NetworkError
from .prefmath import CapacityError, PreferenceError, perm_table
from .voting import RULES, RuleSpec, aggregate

log = logging.getLogger("prefnet")

EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_CAPACITY = 4
EXIT_CHECK = 5


class CheckFailed(Exception):
    """A verification suite ran but found violations."""


def _csv_list(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _graph_param(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key.strip(), float(value)


def _emit(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
        log.info("wrote %s", out)


def _emit_with(writer, obj, out: str | None) -> None:
    """Run a path-based writer, sending the result to stdout when no path is given."""
    if out not in (None, "-"):
        writer(obj, out)
        log.info("wrote %s", out)
        return
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "out.csv"
        writer(obj, path)
        sys.stdout.write(path.read_text())


def _load_net(args) -> network.Network:
    return network.load_network(args.network, giant_component=args.giant_component)


def _distances(args, net, profiles=None) -> np.ndarray:
    if args.distance == "empirical":
        if profiles is None:
            raise ValueError("--distance empirical needs --profiles")
        return analysis.empirical_distances(profiles)
    table = spread.build_tr_table(args.r, args.tr_samples, derive_seed(args.seed, "tr"))
    return spread.msm_sp(net, table)


# ---------------------------------------------------------------------------
# subcommands

def cmd_gen_net(args) -> None:
    params = dict(args.param or [])
    net = network.generate_synthetic(args.model, args.n, params, args.preset, args.seed)
    _emit_with(network.write_network, net, args.out)


def cmd_simulate(args) -> None:
    net = _load_net(args)
    cfg = spread.SpreadConfig(args.model, args.topics, args.r, args.mode, args.seed)
    profiles = spread.simulate(net, cfg, args.threads)
    _emit_with(spread.write_profiles, profiles, args.out)


def cmd_select(args) -> None:
    net = _load_net(args)
    profiles = spread.read_profiles(args.profiles, net.n) if args.profiles else None
    rng = derive_rng(args.seed, "select", args.algorithm, args.k)
    if args.algorithm == "random-poll":
        result = selection.random_poll(net.n, args.k, rng)
    elif args.algorithm == "degree-cen":
        D = _distances(args, net, profiles)
        result = selection.centrality_selection(network.degree_centrality_ranking(net, args.k), D, rng, "degree-cen")
    elif args.algorithm == "between-cen":
        D = _distances(args, net, profiles)
        result = selection.centrality_selection(network.betweenness_ranking(net, args.k), D, rng, "between-cen")
    elif args.algorithm == "greedy-orig":
        if profiles is None:
            raise ValueError("greedy-orig needs --profiles")
        D = _distances(args, net, profiles)
        result = selection.greedy_orig(args.rule, profiles, D, args.k, rng)
    else:
        D = _distances(args, net, profiles)
        result = selection.greedy_select(args.algorithm.split("-")[1], D, args.k, rng)
    _emit_with(selection.write_selection, result, args.out)


def cmd_evaluate(args) -> None:
    ks = tuple(range(1, args.kmax + 1)) if args.ks is None else tuple(int(k) for k in _csv_list(args.ks))
    cfg = analysis.ExperimentConfig(
        n=args.n,
        graph=args.graph,
        graph_params=tuple(sorted(dict(args.param or []).items())),
        preset=args.preset,
        network_path=args.network,
        spread_model=args.spread_model,
        spread_mode=args.spread_mode,
        topics=args.topics,
        r=args.r,
        distance=args.distance,
        rules=args.rules,
        algorithms=args.algos,
        ks=ks,
        poll_runs=args.poll_runs,
        tr_samples=args.tr_samples,
        seed=args.seed,
        workers=args.threads,
        timings=args.timings,
    )
    _emit(analysis.results_csv(analysis.run_experiment(cfg)), args.out)


def _verify_tu(args) -> str:
    rng = derive_rng(args.seed, "verify", "tu")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["instance", "n", "shapley_error", "efficiency_error", "gately_max_dev", "tau_lambda", "tau_error", "ok"])
    failed = 0
    for i in range(args.instances):
        D = rng.random((args.n, args.n))
        D = (D + D.T) / 2
        np.fill_diagonal(D, 0.0)
        rep = selection.tu_checks(D)
        failed += not rep.ok
        w.writerow([i, rep.n, f"{rep.shapley_error:.3e}", f"{rep.efficiency_error:.3e}",
                    f"{max(abs(g - 1) for g in rep.gately):.3e}", f"{rep.tau_lambda:.6f}",
                    f"{rep.tau_error:.3e}", int(rep.ok)])
    if failed:
        sys.stdout.write(buf.getvalue())
        raise CheckFailed(f"{failed} of {args.instances} instances failed")
    return buf.getvalue()


def _verify_submodularity(args) -> str:
    rep = selection.check_objective_properties(args.trials, derive_rng(args.seed, "verify", "submodularity"))
    lines = ["objective,trials,monotone_violations,submodular_violations"]
    for name in rep.monotone_violations:
        lines.append(f"{name},{rep.trials},{rep.monotone_violations[name]},{rep.submodular_violations[name]}")
    text = "\n".join(lines) + "\n"
    if not rep.ok:
        sys.stdout.write(text)
        raise CheckFailed("objective property violations found")
    return text


def _verify_table(args) -> str:
    table = spread.build_tr_table(args.r, args.tr_samples, derive_seed(args.seed, "tr"))
    bad = table.symmetry_violations()
    text = "r,dx,dy,t\n" + "".join(
        f"{table.r},{a / spread.GRID:.2f},{b / spread.GRID:.2f},{table.values[a, b] / spread.GRID:.2f}\n"
        for a in range(spread.GRID + 1) for b in range(a, spread.GRID + 1))
    if bad:
        sys.stdout.write(text)
        raise CheckFailed(f"{bad} symmetry violations")
    return text


def _verify_validation(args) -> str:
    net = _load_net(args)
    reports = analysis.validate_models(net, args.topics, r=args.r, seed=args.seed, workers=args.threads)
    return analysis.validation_csv(reports)


def _verify_insensitivity(args) -> str:
    if args.profiles:
        prof = spread.read_profiles(args.profiles)
        idx = prof.index[0]
        profile = perm_table(prof.r).perms[idx[idx >= 0]]
    else:
        rng = derive_rng(args.seed, "verify", "profile")
        pt = perm_table(args.r)
        profile = pt.perms[rng.integers(0, pt.size, args.voters)]
    out = []
    for i, rule in enumerate(args.rules):
        rep = analysis.weak_insensitivity_test(rule, profile, samples=args.samples, seed=args.seed,
                                               workers=args.threads)
        text = rep.to_csv()
        out.append(text if i == 0 else text.split("\n", 1)[1])
        log.info("%s: pass fraction %.3f", rule, rep.pass_fraction)
    return "".join(out)


SUITES = {
    "tu": _verify_tu,
    "submodularity": _verify_submodularity,
    "table": _verify_table,
    "validation": _verify_validation,
    "insensitivity": _verify_insensitivity,
}


def cmd_verify(args) -> None:
    if args.suite == "validation" and not args.network:
        raise ValueError("--suite validation needs --network")
    _emit(SUITES[args.suite](args), args.out)


def cmd_fit(args) -> None:
    net = _load_net(args)
    profiles = spread.read_profiles(args.profiles, net.n)
    fitted = network.fit_edges_from_profiles(net, profiles, min_topics=args.min_topics)
    _emit_with(network.write_network, fitted, args.out)


def cmd_score(args) -> None:
    profiles = spread.read_profiles(args.profiles)
    perms = perm_table(profiles.r).perms
    idx = profiles.index
    if not 0 <= args.user < profiles.n:
        raise ValueError(f"user {args.user} not in 0..{profiles.n - 1}")
    answered = idx >= 0
    counts = answered.sum(axis=1)
    aggregates = []
    for t in range(len(idx)):
        if counts[t] == 0:
            aggregates.append(None)
            continue
        # a tied aggregate is represented by its first ranking in lexicographic order
        agg = aggregate(RuleSpec.parse(args.rule), perms[idx[t][answered[t]]])
        aggregates.append(tuple(int(a) for a in perms[agg.index[0]]))

    def prefs(node):
        return [tuple(int(a) for a in perms[p]) if p >= 0 else None for p in idx[:, node]]

    user = prefs(args.user)
    score = analysis.social_centrality(user, aggregates, counts)
    lines = ["user,social_centrality", f"{args.user},{score:.1f}"]
    if args.friend is not None:
        if not 0 <= args.friend < profiles.n:
            raise ValueError(f"friend {args.friend} not in 0..{profiles.n - 1}")
        sim = analysis.friend_similarity(user, prefs(args.friend))
        lines = ["user,social_centrality,friend,friend_similarity",
                 f"{args.user},{score:.1f},{args.friend},{sim:.2f}"]
    _emit("\n".join(lines) + "\n", args.out)


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="prefnet", description="Preference spread and representative selection on networks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True, net=False, out=True):
        if seed:
            sp.add_argument("--seed", type=int, required=True)
        sp.add_argument("--threads", type=int, default=1)
        if net:
            sp.add_argument("--network", required=net == "required", help="edge CSV u,v,mu,sigma")
            sp.add_argument("--giant-component", action="store_true", help="keep only the largest component")
        if out:
            sp.add_argument("--out", "-o", help="output path (default stdout)")

    def dist_flags(sp):
        sp.add_argument("--distance", choices=("msm-sp", "empirical"), default="msm-sp")
        sp.add_argument("--r", type=int, default=5)
        sp.add_argument("--tr-samples", type=int, default=spread.TR_SAMPLES)

    sp = sub.add_parser("gen-net", help="generate a synthetic network")
    common(sp)
    sp.add_argument("--model", default="ws", help="ws | ba | er")
    sp.add_argument("--n", type=int, default=500)
    sp.add_argument("--preset", default="facebook-all", choices=sorted(network.PRESETS))
    sp.add_argument("--param", type=_graph_param, action="append", help="graph parameter key=value, e.g. k=14")
    sp.set_defaults(func=cmd_gen_net)

    sp = sub.add_parser("simulate", help="spread preferences over a network")
    common(sp, net="required")
    sp.add_argument("--model", default="rpm-s", choices=spread.MODELS)
    sp.add_argument("--mode", default="random", choices=spread.MODES)
    sp.add_argument("--topics", type=int, default=1000)
    sp.add_argument("--r", type=int, default=5)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("select", help="choose k representatives")
    common(sp, net="required")
    dist_flags(sp)
    sp.add_argument("--algorithm", default="greedy-sum", choices=analysis.ALGORITHMS)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--profiles", help="topic,node,ranking CSV")
    sp.add_argument("--rule", default="plurality", help="rule for greedy-orig")
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("evaluate", help="error-vs-k experiment")
    common(sp, net=True)
    dist_flags(sp)
    sp.add_argument("--graph", default="ws")
    sp.add_argument("--param", type=_graph_param, action="append")
    sp.add_argument("--n", type=int, default=500)
    sp.add_argument("--preset", default="facebook-all", choices=sorted(network.PRESETS))
    sp.add_argument("--spread-model", default="rpm-s", choices=spread.MODELS)
    sp.add_argument("--spread-mode", default="random", choices=spread.MODES)
    sp.add_argument("--topics", type=int, default=1000)
    sp.add_argument("--rules", type=_csv_list, default=("plurality",))
    sp.add_argument("--algos", type=_csv_list, default=("greedy-sum", "greedy-min", "degree-cen", "between-cen", "random-poll"))
    sp.add_argument("--kmax", type=int, default=50)
    sp.add_argument("--ks", help="comma-separated k values (overrides --kmax)")
    sp.add_argument("--poll-runs", type=int, default=100)
    sp.add_argument("--timings", action="store_true", help="fill runtime_ms (not reproducible)")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("verify", help="run a verification suite")
    common(sp, net=True)
    sp.add_argument("--suite", required=True, choices=sorted(SUITES))
    sp.add_argument("--n", type=int, default=6)
    sp.add_argument("--instances", type=int, default=20)
    sp.add_argument("--trials", type=int, default=10_000)
    sp.add_argument("--r", type=int, default=5)
    sp.add_argument("--tr-samples", type=int, default=spread.TR_SAMPLES)
    sp.add_argument("--topics", type=int, default=10_000)
    sp.add_argument("--voters", type=int, default=200)
    sp.add_argument("--samples", type=int, default=500)
    sp.add_argument("--profiles", help="use topic 0 of this file for the insensitivity suite")
    sp.add_argument("--rules", type=_csv_list, default=("dictatorship:0", "borda", "plurality", "veto"))
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("fit", help="fit edge parameters from observed profiles")
    common(sp, seed=False, net="required")
    sp.add_argument("--profiles", required=True)
    sp.add_argument("--min-topics", type=int, default=network.MIN_TOPICS)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("score", help="social centrality of a user")
    common(sp, seed=False)
    sp.add_argument("--profiles", required=True)
    sp.add_argument("--user", type=int, required=True)
    sp.add_argument("--friend", type=int)
    sp.add_argument("--rule", default="borda", choices=[r for r in RULES if r != "dictatorship"])
    sp.set_defaults(func=cmd_score)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be at least 1")
    try:
        args.func(args)
    except CheckFailed as exc:
        print(f"prefnet: check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except CapacityError as exc:
        print(f"prefnet: capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (OSError, NetworkError, PreferenceError, DistributionError, ValueError) as exc:
        print(f"prefnet: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
