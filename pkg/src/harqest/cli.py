"""Command-line front end.

Subcommands: stability, solve, simulate, highsnr, sweep. All output is
plain-text files for external plotting plus a stdout summary. Exit codes:
0 ok, 2 config error, 3 convergence failure, 4 divergence detected.
"""

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .channel import MarkovChannel
from .config import Config, load_config
from .errors import ConfigError, ConvergenceError, HarqestError
from .harq_model import (
    HarqModel,
    block_error_prob,
    worst_retransmission_error_markov,
    worst_retransmission_error_static,
)
from .lti_estimation import build_cost_ladder, solve_steady_state
from .mdp_markov import (
    build_markov_mdp,
    check_stability_markov,
    high_snr_markov,
    solve_rvi_markov,
    verify_switching_markov,
)
from .mdp_static import (
    build_static_mdp,
    check_stability_static,
    high_snr_optimal_static,
    solve_rvi,
    verify_switching,
)
from .policy_io import load_policy, save_policy
from .simulator import PolicyEntry, PolicySpec, evaluate_policies, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_DIVERGENCE = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harqest",
        description="Retransmit-or-refresh transmission control for remote estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="path to the config file")
        p.add_argument("--out", default=None, help="output directory (default from config)")
        p.add_argument("--seed", type=int, default=None, help="override the simulation seed")

    p = sub.add_parser("stability", help="bounded-MSE existence check and stability region sweep")
    common(p)
    p.add_argument(
        "--rho-sq", type=float, nargs="+", default=[1.1, 2.0, 3.0, 5.0],
        help="squared spectral radii for the region sweep grid",
    )
    p.add_argument("--grid-steps", type=int, default=51, help="region sweep resolution per axis")

    p = sub.add_parser("solve", help="solve the transmission-control MDP")
    common(p)
    p.add_argument("--cost", choices=["mse", "delay"], default=None, help="override cost mode")

    p = sub.add_parser("simulate", help="Monte Carlo policy evaluation")
    common(p)
    p.add_argument(
        "--policy", required=True,
        help="policy file, or one of: myopic, no-retx, psi",
    )
    p.add_argument(
        "--compare", nargs="*", default=[],
        help="additional policies for the comparison table",
    )

    p = sub.add_parser("highsnr", help="perfect-retransmission threshold optimization")
    common(p)
    p.add_argument("--theta-max", type=int, default=8, help="threshold search bound")

    p = sub.add_parser("sweep", help="solve + switching verification over SNR and scheme")
    common(p)
    p.add_argument("--snr-db", type=float, nargs="+", default=[5.0, 10.0, 15.0])
    p.add_argument("--schemes", nargs="+", choices=["cc", "ir"], default=["cc", "ir"])

    return parser


def _prepare(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, sim=replace(cfg.sim, seed=args.seed))
    out_dir = args.out if args.out is not None else cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    return cfg, out_dir


def _ladder(cfg: Config):
    kal = solve_steady_state(cfg.system)
    return build_cost_ladder(cfg.system, kal, cfg.solver.q_max + 2), kal


def _omega_caps(cfg: Config):
    if cfg.solver.omega_caps is not None:
        return cfg.solver.omega_caps
    return (4,) * cfg.channel.size


def cmd_stability(args) -> int:
    cfg, out_dir = _prepare(args)
    rho_sq = cfg.system.rho_squared
    lines = [f"rho^2(A) = {rho_sq:.6f}"]
    if cfg.is_static:
        worst = worst_retransmission_error_static(cfg.harq, cfg.channel.gains[0], cfg.solver.r_max)
        report = check_stability_static(worst.value, rho_sq)
        lines += [
            f"Lambda0 = {worst.value:.6e} (attempt {worst.argmax_attempts}, "
            f"monotone decreasing: {worst.monotone_decreasing})",
            f"product = {report.product:.6e}",
            f"verdict = {'stable: product < 1' if report.stable else 'existence not guaranteed'}",
        ]
    else:
        caps = _omega_caps(cfg)
        budget = sum(caps)
        worsts = [
            worst_retransmission_error_markov(cfg.harq, cfg.channel.gains, i, budget)
            for i in range(cfg.channel.size)
        ]
        for i, worst in enumerate(worsts):
            lines.append(
                f"Lambda_{i} = {worst.value:.6e} (history {worst.argmax_counts}, "
                f"at budget boundary: {worst.at_budget_boundary})"
            )
        report = check_stability_markov(cfg.channel.pi, [w.value for w in worsts], rho_sq)
        lines += [
            f"product = {report.product:.6e}",
            f"verdict = {'stable: product < 1' if report.stable else 'existence not guaranteed'}",
        ]
        if cfg.channel.size == 2:
            grid_path = os.path.join(out_dir, "stability_region.csv")
            _write_region_grid(cfg.channel, args.rho_sq, args.grid_steps, grid_path)
            lines.append(f"region sweep written to {grid_path}")
    text = "\n".join(lines)
    print(text)
    with open(os.path.join(out_dir, "stability.txt"), "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    return EXIT_OK


def _write_region_grid(ch: MarkovChannel, rho_sq_values, steps: int, path):
    grid = np.linspace(0.0, 1.0, steps)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("lambda1,lambda2,rho_sq,stable\n")
        for rho_sq in rho_sq_values:
            for l1 in grid:
                for l2 in grid:
                    verdict = check_stability_markov(ch.pi, [l1, l2], rho_sq)
                    fh.write(f"{l1!r},{l2!r},{rho_sq!r},{int(verdict.stable)}\n")


def cmd_solve(args) -> int:
    cfg, out_dir = _prepare(args)
    cost_mode = args.cost if args.cost is not None else cfg.solver.cost_mode
    ladder, _ = _ladder(cfg)
    if cfg.is_static:
        mdp = build_static_mdp(
            cfg.harq, cfg.channel.gains[0], ladder,
            cfg.solver.r_max, cfg.solver.q_max, cost_mode,
        )
        policy = solve_rvi(mdp, tol=cfg.solver.tol, max_iters=cfg.solver.max_iters)
        switching = verify_switching(policy)
        name = f"policy_static_{cost_mode}.txt"
    else:
        mdp = build_markov_mdp(
            cfg.harq, cfg.channel, ladder, _omega_caps(cfg), cfg.solver.q_max, cost_mode,
        )
        policy = solve_rvi_markov(mdp, tol=cfg.solver.tol, max_iters=cfg.solver.max_iters)
        switching = verify_switching_markov(policy)
        name = f"policy_markov_{cost_mode}.txt"
    path = os.path.join(out_dir, name)
    save_policy(policy, path)
    print(f"states = {len(policy.states)}")
    print(f"zeta = {policy.zeta!r} (span {policy.span!r}, iterations {policy.iterations}, "
          f"converged {policy.converged})")
    print(f"switching structure: {'pass' if switching.passed else 'FAIL'}"
          + (f" ({len(switching.violations)} violations)" if not switching.passed else ""))
    print(f"policy written to {path}")
    return EXIT_OK


def _policy_spec(token: str) -> PolicyEntry:
    builtin = {
        "myopic": "myopic",
        "no-retx": "no_retransmission",
        "psi": "always_retransmit_psi",
    }
    if token in builtin:
        return PolicyEntry(label=token, spec=PolicySpec(kind=builtin[token], label=token))
    table = load_policy(token)
    kind = "delay_optimal_table" if table.cost_mode == "delay" else "table"
    label = os.path.splitext(os.path.basename(token))[0]
    return PolicyEntry(label=label, spec=PolicySpec(kind=kind, table=table, label=label))


def cmd_simulate(args) -> int:
    cfg, out_dir = _prepare(args)
    ladder, _ = _ladder(cfg)
    entries = [_policy_spec(args.policy)]
    for token in args.compare:
        entries.append(_policy_spec(token))
    trace = run(cfg.harq, cfg.channel, ladder, entries[0].spec, cfg.sim, replicate=0)
    trace_path = os.path.join(out_dir, f"trace_{entries[0].label}_rep0.csv")
    trace.to_csv(trace_path)
    print(f"replicate-0 trace written to {trace_path}"
          + (f" (diverged at slot {trace.diverged_slot})" if trace.diverged else ""))
    table = evaluate_policies(entries, cfg.harq, cfg.channel, ladder, cfg.sim)
    table_path = os.path.join(out_dir, "comparison.csv")
    table.to_csv(table_path)
    for row in table.rows:
        detail = f"{row.mean!r} +- {row.stderr!r}" if not row.n_diverged else "diverged"
        print(f"  {row.label}: {detail} ({cfg.sim.replicates} replicates)")
    for label, trajectory in table.trajectories.items():
        path = os.path.join(out_dir, f"trajectory_{label}.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("k,mean_running_avg\n")
            for k, value in enumerate(trajectory, start=1):
                fh.write(f"{k},{value!r}\n")
    print(f"comparison written to {table_path}")
    diverged = trace.diverged or any(row.n_diverged for row in table.rows)
    return EXIT_DIVERGENCE if diverged else EXIT_OK


def cmd_highsnr(args) -> int:
    cfg, out_dir = _prepare(args)
    ladder, _ = _ladder(cfg)
    ladder = ladder.extended(max(args.theta_max, 2) + 1)
    lambda_primes = tuple(block_error_prob(cfg.harq, (g,)) for g in cfg.channel.gains)
    if cfg.is_static:
        result = high_snr_optimal_static(ladder, lambda_primes[0], args.theta_max)
        lines = [
            f"lambda_prime = {lambda_primes[0]!r}",
            f"theta_star = {result.theta_star}",
            f"zeta_star = {result.zeta_star!r}",
        ]
        lines += [f"zeta({t}) = {z!r}" for t, z in enumerate(result.zetas, start=1)]
    else:
        result = high_snr_markov(ladder, cfg.channel, lambda_primes, args.theta_max)
        lines = [
            f"lambda_primes = {lambda_primes!r}",
            f"theta_star = {result.theta_star}",
            f"zeta_star = {result.zeta_star!r}",
            f"evaluated = {len(result.evaluated)} threshold vectors"
            + (f", skipped {len(result.skipped)}" if result.skipped else ""),
        ]
    text = "\n".join(lines)
    print(text)
    with open(os.path.join(out_dir, "highsnr.txt"), "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, out_dir = _prepare(args)
    ladder, _ = _ladder(cfg)
    rows = []
    all_pass = True
    for snr_db in args.snr_db:
        for scheme in args.schemes:
            model = HarqModel.from_db(scheme, snr_db, cfg.harq.blocklength, cfg.harq.rate)
            if cfg.is_static:
                mdp = build_static_mdp(
                    model, cfg.channel.gains[0], ladder,
                    cfg.solver.r_max, cfg.solver.q_max, "mse",
                )
                policy = solve_rvi(mdp, tol=cfg.solver.tol, max_iters=cfg.solver.max_iters)
                switching = verify_switching(policy)
            else:
                mdp = build_markov_mdp(
                    model, cfg.channel, ladder, _omega_caps(cfg), cfg.solver.q_max, "mse",
                )
                policy = solve_rvi_markov(mdp, tol=cfg.solver.tol, max_iters=cfg.solver.max_iters)
                switching = verify_switching_markov(policy)
            verdict = "pass" if switching.passed else f"FAIL({len(switching.violations)})"
            rows.append((snr_db, scheme, policy.zeta, policy.iterations, verdict))
            all_pass = all_pass and switching.passed
    with open(os.path.join(out_dir, "sweep.csv"), "w", encoding="utf-8") as fh:
        fh.write("snr_db,scheme,zeta,iterations,switching\n")
        for snr_db, scheme, zeta, iterations, verdict in rows:
            line = f"{snr_db!r},{scheme},{zeta!r},{iterations},{verdict}"
            fh.write(line + "\n")
            print(line)
    print(f"switching verification: {'all pass' if all_pass else 'violations found'}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "stability": cmd_stability,
        "solve": cmd_solve,
        "simulate": cmd_simulate,
        "highsnr": cmd_highsnr,
        "sweep": cmd_sweep,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except HarqestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entry_point():
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
