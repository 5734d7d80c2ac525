"""Command-line entry point: experiments in, CSV + PNG + manifest out.

Exit codes are a stable contract: 0 success, 1 runtime or I/O error,
2 usage error.  Every output directory gets a manifest that the
``replay`` subcommand can re-run to reproduce the artifacts bit for bit.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, adversary, analytics, plots, simulator
from .errors import SaltpeerError
from .identity import Salt, chain_create, digest, new_identity
from .manifest import RunManifest
from .protocol import PeeringRequest, decode_message, encode_message
from .scoring import SCORE_SCALE, score_bits
from .simulator import SimConfig

_USAGE_ERROR = 2
_RUNTIME_ERROR = 1


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip() != ""]


def _float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip() != ""]


def _write_rows(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _finish_run(out_dir: Path, subcommand: str, args: argparse.Namespace, artifacts: list[str]) -> None:
    recorded = {
        key: str(value)
        for key, value in vars(args).items()
        if key not in ("func", "out") and value is not None
    }
    recorded["out"] = str(out_dir)
    RunManifest(subcommand, __version__, recorded, artifacts).write(out_dir)


# -- simulate ----------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    config = SimConfig(
        n_nodes=args.nodes,
        k=args.k,
        salt_interval=args.salt_interval,
        query_delay=args.query_delay,
        theta=args.theta,
        latency=args.latency,
        max_ticks=args.ticks,
        rng_seed=args.seed,
        salt_phase=args.salt_phase,
        chain_length=args.chain_length,
        m_max=args.m_max,
    )
    config.validate()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    artifacts = []

    sim = simulator.Simulation(config)
    metrics = sim.run()
    metrics.write_csv(out / "metrics.csv")
    artifacts.append("metrics.csv")
    edges = simulator.snapshot_topology(sim, config.max_ticks - 1)
    simulator.write_topology_csv(out / "topology.csv", edges)
    artifacts.append("topology.csv")
    plots.save_convergence_plot(
        metrics,
        out / "convergence.png",
        title=f"N={config.n_nodes} k={config.k} T={config.salt_interval} seed={config.rng_seed}",
    )
    artifacts.append("convergence.png")

    if args.cdf_epochs > 0:
        result = simulator.score_distribution_experiment(config, args.cdf_epochs)
        grid = np.linspace(0.0, 0.5, 201)
        inbound_rows = result.inbound_table(grid)
        simulator.write_cdf_csv(out / "inbound_cdf.csv", inbound_rows)
        plots.save_cdf_plot(
            inbound_rows, out / "inbound_cdf.png", "lowest inbound score",
            title=f"N={config.n_nodes}",
        )
        scaled_grid = np.linspace(0.0, 20.0, 201)
        outbound_rows = result.outbound_table(scaled_grid)
        simulator.write_cdf_csv(out / "outbound_cdf.csv", outbound_rows)
        plots.save_cdf_plot(
            outbound_rows, out / "outbound_cdf.png", "lowest outbound score, scaled by N",
            title=f"N={config.n_nodes}",
        )
        artifacts += ["inbound_cdf.csv", "inbound_cdf.png", "outbound_cdf.csv", "outbound_cdf.png"]

    _finish_run(out, "simulate", args, artifacts)
    return 0


# -- eclipse -----------------------------------------------------------------


def cmd_eclipse(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    artifacts = []

    if args.mode == "inbound":
        rows = []
        plot_rows = []
        for n_attackers, requests in itertools.product(
            _int_list(args.attackers), _int_list(args.requests)
        ):
            mc = adversary.mc_inbound_takeover(n_attackers, requests, args.k, args.trials, rng)
            closed = analytics.inbound_takeover_prob(n_attackers, requests, args.k)
            rows.append(
                [n_attackers, requests, args.k, mc.trials,
                 mc.estimate, mc.std_err, closed, abs(mc.estimate - closed)]
            )
            plot_rows.append(
                {"n_attackers": n_attackers, "honest_requests": requests,
                 "mc_estimate": mc.estimate, "std_err": mc.std_err, "closed_form": closed}
            )
        _write_rows(
            out / "takeover.csv",
            ["n_attackers", "honest_requests", "k", "trials",
             "mc_estimate", "std_err", "closed_form", "abs_diff"],
            rows,
        )
        artifacts.append("takeover.csv")
        if plot_rows:
            plots.save_takeover_plot(plot_rows, out / "takeover.png", title="inbound takeover")
            artifacts.append("takeover.png")
    elif args.mode == "outbound":
        rows = []
        plot_rows = []
        for n_attackers, requests in itertools.product(
            _int_list(args.attackers), _int_list(args.requests)
        ):
            mc = adversary.mc_outbound_takeover(
                n_attackers, args.honest, requests, args.k, args.trials, rng
            )
            closed = analytics.outbound_takeover_prob(n_attackers, args.honest, requests, args.k)
            rows.append(
                [n_attackers, args.honest, requests, args.k, mc.trials,
                 mc.estimate, mc.std_err, closed, abs(mc.estimate - closed)]
            )
            plot_rows.append(
                {"n_attackers": n_attackers, "honest_requests": requests,
                 "mc_estimate": mc.estimate, "std_err": mc.std_err, "closed_form": closed}
            )
        _write_rows(
            out / "takeover.csv",
            ["n_attackers", "n_honest", "honest_requests", "k", "trials",
             "mc_estimate", "std_err", "closed_form", "abs_diff"],
            rows,
        )
        artifacts.append("takeover.csv")
        if plot_rows:
            plots.save_takeover_plot(plot_rows, out / "takeover.png", title="outbound takeover")
            artifacts.append("takeover.png")
    else:  # sim
        config = SimConfig(
            n_nodes=args.nodes,
            k=args.k,
            salt_interval=args.salt_interval,
            theta=args.theta,
            max_ticks=args.ticks,
            rng_seed=args.seed,
        )
        rows = []
        for n_attackers in _int_list(args.attackers):
            attack = adversary.AttackConfig(
                sim=config,
                n_attackers=n_attackers,
                strategy=args.strategy,
                trials=args.trials,
                measure_theta_pressure=True,
            )
            stats = adversary.run_eclipse_simulation(attack)
            observed = [t for t in stats.times_to_eclipse if t is not None]
            rows.append(
                [args.strategy, n_attackers, stats.trials,
                 stats.fraction_ever, stats.fraction_final,
                 (sum(observed) / len(observed)) if observed else "",
                 stats.theta_pass_rate if stats.theta_pass_rate is not None else ""]
            )
        _write_rows(
            out / "eclipse_sim.csv",
            ["strategy", "n_attackers", "trials", "fraction_ever",
             "fraction_final", "mean_time_to_eclipse", "theta_pass_rate"],
            rows,
        )
        artifacts.append("eclipse_sim.csv")

    _finish_run(out, "eclipse", args, artifacts)
    return 0


# -- analytics ---------------------------------------------------------------

# formula name -> (csv param columns, list parser per column, callable)
_FORMULAS = {
    "order-stat-pdf": (
        ["rank", "sample_size", "score"],
        [_int_list, _int_list, _float_list],
        lambda r, L, x: analytics.order_stat_pdf(r, L, x),
    ),
    "order-stat-mean": (
        ["rank", "sample_size"],
        [_int_list, _int_list],
        lambda r, L: analytics.order_stat_mean(r, L),
    ),
    "inbound-takeover": (
        ["attackers", "requests", "k"],
        [_int_list, _int_list, _int_list],
        lambda a, L, k: analytics.inbound_takeover_prob(a, L, k),
    ),
    "outbound-takeover": (
        ["attackers", "honest", "requests", "k"],
        [_int_list, _int_list, _int_list, _int_list],
        lambda a, n, L, k: analytics.outbound_takeover_prob(a, n, L, k),
    ),
    "finite-cdf": (
        ["score", "honest", "k", "requests"],
        [_float_list, _int_list, _int_list, _int_list],
        lambda x, n, k, L: analytics.finite_outbound_cdf(x, n, k, L),
    ),
    "limiting-cdf": (
        ["scaled_score", "k", "requests"],
        [_float_list, _int_list, _int_list],
        lambda x, k, L: analytics.limiting_outbound_cdf(x, k, L),
    ),
    "eclipse-bound": (
        ["ratio", "k"],
        [_float_list, _int_list],
        lambda a, k: analytics.eclipse_lower_bound(a, k),
    ),
}


def cmd_analytics(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    columns, parsers, fn = _FORMULAS[args.formula]
    grids = []
    for column, parser in zip(columns, parsers):
        raw = getattr(args, column)
        grids.append(parser(raw) if raw is not None else [])
    rows = [list(point) + [fn(*point)] for point in itertools.product(*grids)]
    _write_rows(out / "table.csv", columns + ["value"], rows)
    artifacts = ["table.csv"]

    varying = [i for i, g in enumerate(grids) if len(g) > 1]
    if rows and len(varying) == 1:
        axis = varying[0]
        plots.save_curve_plot(
            [row[axis] for row in rows],
            [row[-1] for row in rows],
            out / "curve.png",
            xlabel=columns[axis],
            ylabel="value",
            title=args.formula,
        )
        artifacts.append("curve.png")

    _finish_run(out, "analytics", args, artifacts)
    return 0


# -- verify ------------------------------------------------------------------

_SHA_ZERO32 = "66687aadf862bd776c8fc18b8e9f8e20089714856ee233b3902a591d0d5f2925"
_RNG_SEED0_DRAW = "5f82c2d9cfeb0fa321d7d982f8bd1045b8e8cd4ea93d7d0a1df04213b6273b04"
_OUTBOUND_GOLDEN_BITS = 10614172606054281434
_INBOUND_GOLDEN_BITS = 6920332237172097106


def _verify_checks(trials: int, seed: int):
    """Yield (name, passed, detail) for every oracle-equivalence check."""
    rng = np.random.default_rng(seed)

    got = digest(b"\x00" * 32).hex()
    yield "digest-golden-zero32", got == _SHA_ZERO32, f"got {got[:16]}..."

    chain = chain_create(b"\x00" * 32, 2)
    got = chain.current().value.hex()
    yield "chain-golden-publish", got == _SHA_ZERO32, f"got {got[:16]}..."

    got = new_identity(np.random.default_rng(0)).hex()
    yield "rng-golden-seed0", got == _RNG_SEED0_DRAW, f"got {got[:16]}..."

    bits = score_bits(b"\x00" * 32, b"\x01" * 32, b"\x02" * 32)
    yield "outbound-score-golden", bits == _OUTBOUND_GOLDEN_BITS, f"got {bits}"
    bits = score_bits(b"\x03" * 32, b"\x04" * 32, b"\x05" * 32)
    yield "inbound-score-golden", bits == _INBOUND_GOLDEN_BITS, f"got {bits}"

    req = PeeringRequest(b"\x0a" * 32, b"\x0b" * 32, Salt(b"\x0c" * 32, "public"), 300, 2)
    encoded = encode_message(req)
    roundtrip = decode_message(encoded) == req
    expected = "01" + "0a" * 32 + "0b" * 32 + "0c" * 32 + "ac02" + "02"
    yield "wire-encoding-golden", encoded.hex() == expected and roundtrip, encoded.hex()[:20] + "..."

    for n_attackers, requests, k in [(4, 4, 4), (20, 20, 4)]:
        mc = adversary.mc_inbound_takeover(n_attackers, requests, k, trials, rng)
        closed = analytics.inbound_takeover_prob(n_attackers, requests, k)
        tol = max(4 * mc.std_err, 1e-12)
        ok = abs(mc.estimate - closed) <= tol
        yield (
            f"mc-inbound-({n_attackers},{requests},{k})",
            ok,
            f"|{mc.estimate:.6f}-{closed:.6f}| tol {tol:.2e}",
        )

    exact = analytics.inbound_takeover_prob(4, 4, 4)
    yield "inbound-closed-1/70", abs(exact - 1 / 70) < 1e-15, f"got {exact!r}"

    for n_attackers, n_honest, requests, k in [(2, 2, 2, 2), (20, 50, 10, 4)]:
        mc = adversary.mc_outbound_takeover(n_attackers, n_honest, requests, k, trials, rng)
        closed = analytics.outbound_takeover_prob(n_attackers, n_honest, requests, k)
        tol = max(4 * mc.std_err, 1e-12)
        ok = abs(mc.estimate - closed) <= tol
        yield (
            f"mc-outbound-({n_attackers},{n_honest},{requests},{k})",
            ok,
            f"|{mc.estimate:.6f}-{closed:.6f}| tol {tol:.2e}",
        )

    mc = adversary.mc_random_choice_takeover(1000, 500, 4, trials, rng)
    closed = analytics.random_choice_eclipse_prob(1000, 500, 4)
    tol = 4 * mc.std_err
    yield (
        "mc-random-choice-(1000,500,4)",
        abs(mc.estimate - closed) <= tol,
        f"|{mc.estimate:.6f}-{closed:.6f}| tol {tol:.2e}",
    )

    samples = rng.random((trials, 9)).min(axis=1).mean()
    yield (
        "order-stat-min-mean-L9",
        abs(samples - analytics.order_stat_mean(1, 9)) <= 0.005,
        f"got {samples:.5f}, tol 0.005",
    )

    worst = max(
        abs(
            analytics.finite_outbound_cdf(x / 10_000, 10_000, 4, 16)
            - analytics.limiting_outbound_cdf(x, 4, 16)
        )
        for x in np.linspace(0.0, 20.0, 101)
    )
    yield "finite-vs-limiting-cdf", worst <= 1e-3, f"max diff {worst:.2e}, tol 1e-3"

    target = new_identity(rng)
    passes = 0
    n_ids = 20_000
    threshold = 0.1 * SCORE_SCALE
    for _ in range(n_ids):
        requester = rng.bytes(32)
        if requester != target and score_bits(requester, target, b"\x07" * 32) <= threshold:
            passes += 1
    rate = passes / n_ids
    yield "theta-pass-rate-0.1", abs(rate - 0.1) <= 0.01, f"got {rate:.4f}, tol 0.01"


def cmd_verify(args: argparse.Namespace) -> int:
    failures = 0
    report = []
    for name, passed, detail in _verify_checks(args.trials, args.seed):
        status = "PASS" if passed else "FAIL"
        if not passed:
            failures += 1
        line = f"{status}  {name}  ({detail})"
        print(line)
        report.append([status, name, detail])
    print(f"{len(report) - failures}/{len(report)} checks passed")
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_rows(out / "verify_report.csv", ["status", "check", "detail"], report)
        _finish_run(out, "verify", args, ["verify_report.csv"])
    return _RUNTIME_ERROR if failures else 0


# -- replay ------------------------------------------------------------------


def cmd_replay(args: argparse.Namespace) -> int:
    manifest = RunManifest.read(Path(args.manifest))
    if manifest.subcommand == "replay":
        print("refusing to replay a replay", file=sys.stderr)
        return _USAGE_ERROR
    return main(manifest.to_argv(args.out))


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="saltpeer",
        description="Salt-based autopeering simulator and eclipse-resistance analytics",
    )
    parser.add_argument("--version", action="version", version=f"saltpeer {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("simulate", help="run the neighbor-selection simulation")
    p.add_argument("--nodes", type=int, default=100)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--salt-interval", type=int, default=100, help="ticks between salt updates")
    p.add_argument("--query-delay", type=int, default=1)
    p.add_argument("--theta", type=float, default=1.0, help="eligibility threshold; 1 disables")
    p.add_argument("--latency", type=int, default=1)
    p.add_argument("--ticks", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--salt-phase", choices=["random", "synchronized"], default="random")
    p.add_argument("--chain-length", type=int, default=64)
    p.add_argument("--m-max", type=int, default=16)
    p.add_argument("--cdf-epochs", type=int, default=0,
                   help="also run the min-score distribution experiment for this many epochs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eclipse", help="takeover experiments: MC vs closed forms, or full runs")
    p.add_argument("--mode", choices=["inbound", "outbound", "sim"], default="inbound")
    p.add_argument("--attackers", default="5,20,80", help="comma list of attacker counts")
    p.add_argument("--requests", default="5,20,80", help="comma list of honest request counts")
    p.add_argument("--honest", type=int, default=50, help="honest population (outbound mode)")
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--trials", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strategy", choices=["spam_inbound", "protocol_following"],
                   default="spam_inbound")
    p.add_argument("--nodes", type=int, default=50, help="honest nodes (sim mode)")
    p.add_argument("--salt-interval", type=int, default=50)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--ticks", type=int, default=500)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eclipse)

    p = sub.add_parser("analytics", help="tabulate a closed form over a parameter grid")
    p.add_argument("--formula", choices=sorted(_FORMULAS), required=True)
    p.add_argument("--rank", help="comma list")
    p.add_argument("--sample-size", dest="sample_size", help="comma list")
    p.add_argument("--attackers", help="comma list")
    p.add_argument("--honest", help="comma list")
    p.add_argument("--requests", help="comma list")
    p.add_argument("--k", help="comma list")
    p.add_argument("--score", help="comma list")
    p.add_argument("--scaled-score", dest="scaled_score", help="comma list")
    p.add_argument("--ratio", help="comma list")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analytics)

    p = sub.add_parser("verify", help="run the oracle-equivalence suite")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("replay", help="re-run a recorded manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default=None, help="override the recorded output directory")
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except SaltpeerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_ERROR
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return _RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
