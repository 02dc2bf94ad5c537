"""Command line interface: synth, verify, simulate, plot, and run.

Exit codes: 0 on success, 1 when the method fails (certification,
verification, or a simulation verdict), 2 on usage or configuration
errors.  Worker count for multi-start solves comes from the STT_WORKERS
environment variable.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, DomainError, FunnelViolation
from .scenario import (
    Scenario,
    build_problem,
    load_scenario,
    read_tube_document,
    segment_environment,
    segment_epsilon,
    simulate_mission,
    write_tube_document,
)
from .sim import SimTrace
from .synthesis import certify, make_sampling_plan, solve_sop, verify_dense

VERIFY_TOL = 1e-6
SYNTH_ATTEMPTS = 3


def _say(quiet: bool, message: str) -> None:
    if not quiet:
        print(message)


def _parse_seeds(raw: str | None, scenario: Scenario) -> list[int]:
    if raw is None:
        return list(scenario.seeds)
    try:
        return [int(v) for v in raw.split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(f"--seeds must be a comma-separated list of integers, got {raw!r}")


def synthesize_scenario(scenario: Scenario, eps_override: float | None,
                        quiet: bool) -> tuple[list, bool]:
    """Solve every mission segment, halving epsilon on failed certificates."""
    pairs = []
    all_valid = True
    for k in range(len(scenario.mission)):
        eps = eps_override if eps_override is not None else segment_epsilon(scenario, k)
        tube = cert = None
        for attempt in range(SYNTH_ATTEMPTS):
            problem = build_problem(scenario, k, eps)
            tube, eta = solve_sop(problem, scenario.solver)
            cert = certify(tube, problem, eta)
            if cert.valid:
                break
            if attempt < SYNTH_ATTEMPTS - 1:
                _say(quiet, f"segment {k}: certificate failed at eps={eps:.6g} "
                            f"(eta*={cert.eta_star:.6g}, L={cert.L:.6g}); retrying")
                eps *= 0.5
        slack = cert.eta_star + (cert.L + cert.env_rate) * cert.epsilon
        _say(quiet, f"segment {k}: eta*={cert.eta_star:.6g} L={cert.L:.6g} "
                    f"eps={cert.epsilon:.6g} env_rate={cert.env_rate:.6g} "
                    f"margin={slack:.6g} {'VALID' if cert.valid else 'INVALID'}")
        pairs.append((tube, cert))
        all_valid = all_valid and cert.valid
    return pairs, all_valid


def cmd_synth(args) -> int:
    scenario = load_scenario(args.scenario)
    pairs, all_valid = synthesize_scenario(scenario, args.eps, args.quiet)
    if args.out is not None:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        write_tube_document(args.out, pairs)
        _say(args.quiet, f"wrote {args.out}")
    if not all_valid:
        _say(args.quiet, "synthesis failed: not every segment certified")
        return 1
    return 0


def _load_tubes(scenario: Scenario, tube_path: str):
    pairs = read_tube_document(tube_path)
    if len(pairs) != len(scenario.mission):
        raise ConfigError(f"{tube_path} has {len(pairs)} segments, scenario "
                          f"{scenario.name!r} needs {len(scenario.mission)}")
    return pairs


def cmd_verify(args) -> int:
    scenario = load_scenario(args.scenario)
    pairs = _load_tubes(scenario, args.tube)
    ok = True
    for k, (tube, cert) in enumerate(pairs):
        env = segment_environment(scenario, k)
        if args.grid is not None:
            grid = args.grid
        else:
            grid = 10 * len(make_sampling_plan(env.t_c, cert.epsilon).times)
        report = verify_dense(tube, env, grid)
        status = "OK" if report.ok(VERIFY_TOL) else "VIOLATED"
        _say(args.quiet,
             f"segment {k}: grid={report.grid_points} "
             f"radius={report.g_radius:.6g}@{report.t_radius:.4g} "
             f"workspace={report.g_workspace:.6g}@{report.t_workspace:.4g} "
             f"unsafe={report.g_unsafe:.6g}@{report.t_unsafe:.4g} {status}")
        ok = ok and report.ok(VERIFY_TOL)
    return 0 if ok else 1


def _simulate_all(scenario: Scenario, tubes, seeds: list[int], out_dir: Path,
                  quiet: bool) -> tuple[bool, list[SimTrace]]:
    traces_dir = out_dir / "traces"
    traces_dir.mkdir(parents=True, exist_ok=True)
    verdict_doc = {"scenario": scenario.name, "seeds": {}}
    ok = True
    traces = []
    for seed in seeds:
        trace, verdicts = simulate_mission(scenario, tubes, seed)
        trace.to_csv(traces_dir / f"seed_{seed}.csv")
        traces.append(trace)
        seed_ok = all(v.all_true for v in verdicts)
        ok = ok and seed_ok
        verdict_doc["seeds"][str(seed)] = {
            "segments": [v.to_dict() for v in verdicts],
            "all_true": seed_ok,
        }
        _say(quiet, f"seed {seed}: {'PASS' if seed_ok else 'FAIL'} "
                    f"(min clearance {min(v.min_clearance for v in verdicts):.6g})")
    verdict_doc["all_true"] = ok
    with open(out_dir / "verdicts.json", "w") as fh:
        json.dump(verdict_doc, fh, indent=2)
        fh.write("\n")
    return ok, traces


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    pairs = _load_tubes(scenario, args.tube)
    seeds = _parse_seeds(args.seeds, scenario)
    out_dir = Path(args.out) if args.out else Path("stt_out") / scenario.name
    try:
        ok, _ = _simulate_all(scenario, [t for t, _ in pairs], seeds, out_dir, args.quiet)
    except FunnelViolation as bad:
        print(f"simulation aborted: {bad}", file=sys.stderr)
        return 1
    _say(args.quiet, f"wrote {out_dir / 'verdicts.json'}")
    return 0 if ok else 1


def cmd_plot(args) -> int:
    from . import plots

    scenario = load_scenario(args.scenario)
    pairs = _load_tubes(scenario, args.tube)
    trace_paths = [p for p in args.trace.split(",") if p.strip() != ""]
    if not trace_paths:
        raise ConfigError("--trace needs at least one trace file")
    traces = [SimTrace.from_csv(p) for p in trace_paths]
    out = Path(args.out) if args.out else Path("tube.svg")
    out.parent.mkdir(parents=True, exist_ok=True)
    plots.plot_trajectory(scenario, [t for t, _ in pairs], traces, out)
    errors_path = out.with_name(out.stem + "_errors.svg")
    plots.plot_errors(scenario, traces[0], errors_path)
    _say(args.quiet, f"wrote {out} and {errors_path}")
    return 0


def cmd_run(args) -> int:
    from . import plots

    scenario = load_scenario(args.scenario)
    out_dir = Path(args.out) if args.out else Path("stt_out") / scenario.name
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs, all_valid = synthesize_scenario(scenario, args.eps, args.quiet)
    tube_path = out_dir / "tube.json"
    write_tube_document(tube_path, pairs)
    _say(args.quiet, f"wrote {tube_path}")
    if not all_valid:
        _say(args.quiet, "run failed during synthesis")
        return 1
    for k, (tube, cert) in enumerate(pairs):
        env = segment_environment(scenario, k)
        grid = args.grid if args.grid is not None else \
            10 * len(make_sampling_plan(env.t_c, cert.epsilon).times)
        report = verify_dense(tube, env, grid)
        _say(args.quiet, f"segment {k}: dense worst margin {report.worst:.6g} "
                         f"on {report.grid_points} points")
        if not report.ok(VERIFY_TOL):
            _say(args.quiet, "run failed during verification")
            return 1
    seeds = _parse_seeds(args.seeds, scenario)
    try:
        ok, traces = _simulate_all(scenario, [t for t, _ in pairs], seeds, out_dir,
                                   args.quiet)
    except FunnelViolation as bad:
        print(f"simulation aborted: {bad}", file=sys.stderr)
        return 1
    fig_dir = out_dir / "figures"
    fig_dir.mkdir(exist_ok=True)
    plots.plot_trajectory(scenario, [t for t, _ in pairs], traces,
                          fig_dir / "trajectory.svg")
    plots.plot_errors(scenario, traces[0], fig_dir / "errors.svg")
    _say(args.quiet, f"wrote figures to {fig_dir}")
    if not ok:
        _say(args.quiet, "run failed during simulation")
        return 1
    _say(args.quiet, "run complete")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stt",
        description="Synthesize, certify, and track spatiotemporal tubes.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, tube=False, needs_out=False):
        p.add_argument("--scenario", required=True,
                       help="scenario file or bundled name (corridor, office, dynamic)")
        if tube:
            p.add_argument("--tube", required=True, help="tube document from synth")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")

    p_synth = sub.add_parser("synth", help="synthesize and certify tubes")
    common(p_synth)
    p_synth.add_argument("--out", help="tube document to write")
    p_synth.add_argument("--eps", type=float, help="override the covering radius")
    p_synth.set_defaults(func=cmd_synth)

    p_verify = sub.add_parser("verify", help="re-check a tube on a dense grid")
    common(p_verify, tube=True)
    p_verify.add_argument("--grid", type=int, help="dense grid points per segment")
    p_verify.set_defaults(func=cmd_verify)

    p_sim = sub.add_parser("simulate", help="run disturbed closed-loop simulations")
    common(p_sim, tube=True)
    p_sim.add_argument("--seeds", help="comma-separated seeds (default from scenario)")
    p_sim.add_argument("--out", help="output directory for traces and verdicts")
    p_sim.set_defaults(func=cmd_simulate)

    p_plot = sub.add_parser("plot", help="render tube and error figures")
    common(p_plot, tube=True)
    p_plot.add_argument("--trace", required=True,
                        help="comma-separated trace CSV files")
    p_plot.add_argument("--out", help="trajectory figure path (SVG)")
    p_plot.set_defaults(func=cmd_plot)

    p_run = sub.add_parser("run", help="synth, verify, simulate, and plot")
    common(p_run)
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--seeds", help="comma-separated seeds (default from scenario)")
    p_run.add_argument("--eps", type=float, help="override the covering radius")
    p_run.add_argument("--grid", type=int, help="dense grid points per segment")
    p_run.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as bad:
        # argparse exits 2 on usage errors and 0 on --help; keep both
        return int(bad.code or 0)
    try:
        return args.func(args)
    except (ConfigError, DomainError) as bad:
        print(f"error: {bad}", file=sys.stderr)
        return 2
    except OSError as bad:
        print(f"error: {bad}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
