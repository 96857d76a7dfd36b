"""Batch command-line surface: scenario files, runs, analyses, reports.

Commands
--------
validate <file>                 check a scenario file end to end
gains <file>                    solve the regulator equations, print residuals
simulate <file> --out <csv>     integrate and write the trajectory CSV
analyze <file> --dbar D         delay-dependent feasibility test
margin <file>                   bisect the largest certified delay bound
demo --delay {0.1|0.4|0.7}      run the built-in three-agent study

Exit codes: 0 success; 1 usage or configuration error; 2 validation failure
or infeasible analysis; 3 numerical failure (divergence, undecided solver).
Every error path prints one line to stderr of the form ``error[code]: ...``.
"""
import argparse
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import lmi
from .errors import (
    DelayOptError,
    DivergenceError,
    InfeasibleBaseError,
    MissingFieldError,
    SolverUndecidedError,
    ValidationError,
)
from .graph import ModeDigraph, SwitchingTopology
from .markov import GeneratorMatrix
from .objective import CostSet, QuadraticCost, global_optimum, lipschitz_max
from .plant import AgentModel, GainSet, regulator_residuals, solve_regulator
from .protocol import ProtocolParams
from .sim import DelaySpec, Scenario, Trajectory, integrate, metrics

CSV_SIG_DIGITS = 12


@dataclass
class AnalysisOptions:
    """Defaults for the analysis commands, settable from the scenario file."""

    varpi: float = 0.0
    variant: str = "theorem1"
    dmax: float = 1.0
    tol: float = 0.01


@dataclass
class RunReport:
    metrics_summary: dict
    lmi_verdict: dict
    certificate_path: str
    trajectory_path: str


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise MissingFieldError(f"missing field {key!r} in {where}")
    return d[key]


def _matrix(value, where: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(f"{where} is not a numeric matrix") from None
    return arr


def parse_scenario(path) -> tuple:
    """Load and fully validate a scenario file.

    Returns (Scenario, AnalysisOptions).  Diagnostics carry the offending
    field and agent index.
    """
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise MissingFieldError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON in {path}: {exc}", code="config") from None
    return scenario_from_dict(raw)


def scenario_from_dict(raw: dict) -> tuple:
    agents_raw = _require(raw, "agents", "scenario")
    agents = []
    for i, spec in enumerate(agents_raw):
        where = f"agent {i + 1}"
        try:
            agents.append(
                AgentModel(
                    A=_matrix(_require(spec, "A", where), f"{where}: A"),
                    B=_matrix(_require(spec, "B", where), f"{where}: B"),
                    C=_matrix(_require(spec, "C", where), f"{where}: C"),
                )
            )
        except MissingFieldError:
            raise
        except ValidationError as exc:
            raise type(exc)(f"{where}: {exc}") from None

    gains_raw = _require(raw, "gains", "scenario")
    if len(gains_raw) != len(agents):
        raise ValidationError(
            f"expected {len(agents)} gain entries, got {len(gains_raw)}",
            code="dimension",
        )
    gains = []
    for i, (spec, model) in enumerate(zip(gains_raw, agents)):
        where = f"gains for agent {i + 1}"
        k = _matrix(_require(spec, "K", where), f"{where}: K")
        present = [key for key in ("U", "W", "X") if key in spec]
        if len(present) == 3:
            u = _matrix(spec["U"], f"{where}: U")
            w = _matrix(spec["W"], f"{where}: W")
            x = _matrix(spec["X"], f"{where}: X")
        elif present:
            raise ValidationError(
                f"{where}: supply all of U, W, X or none (got only {present})"
            )
        else:
            sol = solve_regulator(model)
            u, w, x = sol.U, sol.W, sol.X
        gains.append(GainSet(K=k, U=u, W=w, X=x))

    costs_raw = _require(raw, "costs", "scenario")
    costs = CostSet(
        [
            QuadraticCost(
                H=_matrix(_require(spec, "H", f"cost {i + 1}"), f"cost {i + 1}: H"),
                g=_matrix(_require(spec, "g", f"cost {i + 1}"), f"cost {i + 1}: g"),
                c=float(spec.get("c", 0.0)),
            )
            for i, spec in enumerate(costs_raw)
        ]
    )

    topo_raw = _require(raw, "topology", "scenario")
    topology = SwitchingTopology(
        [ModeDigraph(_matrix(adj, f"topology mode {k + 1}")) for k, adj in enumerate(topo_raw)]
    )
    generator = GeneratorMatrix(_matrix(_require(raw, "generator", "scenario"), "generator"))
    initial_modes = raw.get("initial_mode_distribution")
    if initial_modes is None:
        initial_modes = np.full(generator.n_states, 1.0 / generator.n_states)
    else:
        initial_modes = _matrix(initial_modes, "initial_mode_distribution")

    proto_raw = _require(raw, "protocol", "scenario")
    params = ProtocolParams(
        alpha=float(_require(proto_raw, "alpha", "protocol")),
        beta=float(_require(proto_raw, "beta", "protocol")),
    )

    delay_raw = _require(raw, "delay", "scenario")
    dbar = _require(delay_raw, "dbar", "delay")
    if np.isscalar(dbar):
        dbar = np.full(len(agents), float(dbar))
    else:
        dbar = _matrix(dbar, "delay: dbar")
    delay = DelaySpec(
        kind=delay_raw.get("kind", "constant"),
        dbar=dbar,
        omega=float(delay_raw.get("omega", 0.0)),
    )

    sim_raw = _require(raw, "sim", "scenario")
    x0_raw = sim_raw.get("x0")
    if x0_raw is None:
        x0 = [np.zeros(m.n) for m in agents]
    else:
        x0 = [_matrix(x, f"sim: x0[{i}]") for i, x in enumerate(x0_raw)]
    scenario = Scenario(
        agents=agents,
        gains=gains,
        costs=costs,
        topology=topology,
        generator=generator,
        initial_mode_distribution=initial_modes,
        params=params,
        delay=delay,
        x0=x0,
        eta0=[_matrix(e, "sim: eta0") for e in sim_raw["eta0"]] if "eta0" in sim_raw else None,
        z0=[_matrix(z, "sim: z0") for z in sim_raw["z0"]] if "z0" in sim_raw else None,
        dt=float(_require(sim_raw, "dt", "sim")),
        horizon=float(_require(sim_raw, "horizon", "sim")),
        seed=int(sim_raw.get("seed", 0)),
    )
    scenario.validate()

    analysis_raw = raw.get("analysis", {})
    analysis = AnalysisOptions(
        varpi=float(analysis_raw.get("varpi", scenario.delay.rate_bound)),
        variant=str(analysis_raw.get("variant", "theorem1")),
        dmax=float(analysis_raw.get("dmax", 1.0)),
        tol=float(analysis_raw.get("tol", 0.01)),
    )
    return scenario, analysis


def scenario_to_dict(sc: Scenario, analysis: AnalysisOptions = None) -> dict:
    def mat(a):
        return np.asarray(a).tolist()

    out = {
        "agents": [{"A": mat(m.A), "B": mat(m.B), "C": mat(m.C)} for m in sc.agents],
        "gains": [
            {"K": mat(g.K), "U": mat(g.U), "W": mat(g.W), "X": mat(g.X)}
            for g in sc.gains
        ],
        "costs": [{"H": mat(f.H), "g": mat(f.g), "c": f.c} for f in sc.costs],
        "topology": [mat(m.adjacency) for m in sc.topology.modes],
        "generator": mat(sc.generator.rates),
        "initial_mode_distribution": mat(sc.initial_mode_distribution),
        "protocol": {"alpha": sc.params.alpha, "beta": sc.params.beta},
        "delay": {
            "kind": sc.delay.kind,
            "dbar": mat(sc.delay.dbar),
            "omega": sc.delay.omega,
        },
        "sim": {
            "dt": sc.dt,
            "horizon": sc.horizon,
            "seed": sc.seed,
            "x0": [mat(x) for x in sc.x0],
            "eta0": [mat(e) for e in sc.eta0],
            "z0": [mat(z) for z in sc.z0],
        },
    }
    if analysis is not None:
        out["analysis"] = {
            "varpi": analysis.varpi,
            "variant": analysis.variant,
            "dmax": analysis.dmax,
            "tol": analysis.tol,
        }
    return out


def write_scenario(sc: Scenario, path, analysis: AnalysisOptions = None):
    with open(path, "w", newline="\n") as fh:
        json.dump(scenario_to_dict(sc, analysis), fh, indent=2, sort_keys=True)
        fh.write("\n")


def emit_trajectory_csv(tr: Trajectory, path):
    """Write the run as CSV: t, mode, outputs, tracking errors, residual norm.

    Deterministic bytes for a given trajectory: fixed significant digits,
    LF line endings.
    """
    if len(tr.t) == 0:
        raise ValidationError("trajectory is empty")
    n = tr.n_agents
    if tr.q == 1:
        y_cols = [f"y_{i + 1}" for i in range(n)]
    else:
        y_cols = [f"y_{i + 1}_{k + 1}" for i in range(n) for k in range(tr.q)]
    header = ["t", "mode"] + y_cols + [f"err_{i + 1}" for i in range(n)] + ["xi_norm"]
    errs = np.linalg.norm(
        tr.y.reshape(len(tr.t), n, tr.q) - tr.theta_star[None, None, :], axis=2
    )
    xi_norm = np.linalg.norm(tr.xi, axis=1)
    fmt = f"%.{CSV_SIG_DIGITS}g"
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(len(tr.t)):
            row = [fmt % tr.t[k], str(int(tr.mode[k]))]
            row += [fmt % v for v in tr.y[k]]
            row += [fmt % v for v in errs[k]]
            row.append(fmt % xi_norm[k])
            fh.write(",".join(row) + "\n")


def _lmi_data_for(sc: Scenario, dbar: float, varpi: float) -> lmi.LmiData:
    return lmi.build_lmi_data(
        sc.agents,
        sc.gains,
        sc.topology,
        sc.params,
        l_max=lipschitz_max(sc.costs),
        dbar=dbar,
        varpi=varpi,
        m_min=min(f.strong_convexity for f in sc.costs),
    )


def cmd_validate(args) -> int:
    sc, analysis = parse_scenario(args.file)
    print(
        f"ok: {sc.n_agents} agents, {sc.topology.n_modes} modes, q={sc.q}, "
        f"dt={sc.dt:g}, horizon={sc.horizon:g}, delay kind={sc.delay.kind}"
    )
    return 0


def cmd_gains(args) -> int:
    sc, _ = parse_scenario(args.file)
    for i, (model, supplied) in enumerate(zip(sc.agents, sc.gains)):
        sol = solve_regulator(model)
        solved = max(sol.residuals)
        verified = max(regulator_residuals(model, supplied.U, supplied.W, supplied.X))
        print(
            f"agent {i + 1}: solved residual {solved:.3e}, "
            f"supplied-gain residual {verified:.3e}"
        )
    return 0


def cmd_simulate(args) -> int:
    sc, _ = parse_scenario(args.file)
    if args.delay is not None:
        sc.delay = DelaySpec.constant(args.delay, sc.n_agents)
    if args.horizon is not None:
        sc.horizon = args.horizon
    if args.seed is not None:
        sc.seed = args.seed
    tr = integrate(sc)
    emit_trajectory_csv(tr, args.out)
    m = metrics(tr, tr.theta_star, args.tol)
    conv = "never" if m.convergence_time is None else f"{m.convergence_time:g}"
    print(
        f"wrote {args.out}: final error {m.final_error:.4g}, "
        f"convergence (tol {args.tol:g}) at {conv}"
    )
    return 0


def cmd_analyze(args) -> int:
    sc, analysis = parse_scenario(args.file)
    varpi = args.varpi if args.varpi is not None else analysis.varpi
    variant = args.variant if args.variant is not None else analysis.variant
    data = _lmi_data_for(sc, dbar=args.dbar, varpi=varpi)
    result = lmi.solve_feasibility(data, variant=variant)
    if isinstance(result, lmi.FeasibilityCertificate):
        lam = ", ".join(f"{v:.4g}" for v in result.lambda_max_per_mode)
        print(
            f"feasible: variant={variant} dbar={result.dbar:g} varpi={result.varpi:g} "
            f"lambda_max per mode [{lam}]"
        )
        if args.cert_out:
            check = lmi.check_certificate(data, result)
            lmi.write_certificate(result, args.cert_out, check)
            print(f"certificate written to {args.cert_out}")
        return 0
    print(
        f"infeasible: variant={variant} dbar={args.dbar:g} "
        f"best slack {result.best_slack:.4g} (needs >= {lmi.DEFAULT_MU:g})"
    )
    return 2


def cmd_margin(args) -> int:
    sc, analysis = parse_scenario(args.file)
    varpi = args.varpi if args.varpi is not None else analysis.varpi
    variant = args.variant if args.variant is not None else analysis.variant
    dmax = args.dmax if args.dmax is not None else analysis.dmax
    tol = args.tol if args.tol is not None else analysis.tol
    data = _lmi_data_for(sc, dbar=0.0, varpi=varpi)
    result = lmi.delay_margin(data, variant=variant, d_max=dmax, tol=tol)
    for db, verdict in result.log:
        print(f"  probe dbar={db:.6g}: {verdict}")
    if result.d_infeasible is None:
        print(f"certified up to dbar={result.d_star:g} (feasible through d_max)")
    else:
        print(
            f"margin: certified dbar={result.d_star:.6g}, "
            f"first failed probe {result.d_infeasible:.6g}"
        )
    return 0


def cmd_demo(args) -> int:
    import os

    from .demo import demo_scenario

    os.makedirs(args.out, exist_ok=True)
    sc = demo_scenario(
        delay=args.delay, horizon=args.horizon, dt=args.dt, seed=args.seed
    )
    traj_path = os.path.join(args.out, f"trajectory_d{args.delay:g}.csv")
    cert_path = os.path.join(args.out, f"certificate_d{args.delay:g}.txt")
    report_path = os.path.join(args.out, f"report_d{args.delay:g}.json")
    scenario_path = os.path.join(args.out, f"scenario_d{args.delay:g}.json")

    write_scenario(sc, scenario_path, AnalysisOptions())
    divergence_time = None
    try:
        tr = integrate(sc)
    except DivergenceError as exc:
        divergence_time = exc.time
        tr = None
    if tr is not None:
        emit_trajectory_csv(tr, traj_path)
        m = metrics(tr, tr.theta_star, args.tol)
        opt = global_optimum(sc.costs)
        summary = {
            "theta_star": opt.theta_star.tolist(),
            "f_min": opt.f_min,
            "final_error": m.final_error,
            "convergence_time": m.convergence_time,
            "tolerance": args.tol,
        }
    else:
        summary = {"diverged_at": divergence_time}

    data = _lmi_data_for(sc, dbar=args.delay, varpi=0.0)
    result = lmi.solve_feasibility(data)
    if isinstance(result, lmi.FeasibilityCertificate):
        check = lmi.check_certificate(data, result)
        lmi.write_certificate(result, cert_path, check)
        verdict = {
            "variant": "theorem1",
            "dbar": args.delay,
            "feasible": True,
            "lambda_max_per_mode": result.lambda_max_per_mode.tolist(),
            "independent_check": check.passed,
        }
    else:
        cert_path = ""
        verdict = {
            "variant": "theorem1",
            "dbar": args.delay,
            "feasible": False,
            "best_slack": result.best_slack,
        }

    report = RunReport(
        metrics_summary=summary,
        lmi_verdict=verdict,
        certificate_path=cert_path,
        trajectory_path=traj_path if tr is not None else "",
    )
    with open(report_path, "w", newline="\n") as fh:
        json.dump(report.__dict__, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"demo delay={args.delay:g}: report in {report_path}")
    if tr is not None:
        conv = summary["convergence_time"]
        print(
            f"  final error {summary['final_error']:.4g}, convergence at "
            f"{'never' if conv is None else f'{conv:g}'}"
        )
    else:
        print(f"  simulation diverged at t={divergence_time:g}")
    print(f"  analysis: {'feasible' if verdict['feasible'] else 'infeasible'}")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="delayopt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a scenario file")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gains", help="solve the regulator equations")
    p.add_argument("file")
    p.set_defaults(func=cmd_gains)

    p = sub.add_parser("simulate", help="integrate and write a trajectory CSV")
    p.add_argument("file")
    p.add_argument("--out", required=True)
    p.add_argument("--delay", type=float, default=None)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tol", type=float, default=0.05)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="delay-dependent feasibility test")
    p.add_argument("file")
    p.add_argument("--dbar", type=float, required=True)
    p.add_argument("--varpi", type=float, default=None)
    p.add_argument(
        "--variant", choices=list(lmi.VARIANTS), default=None
    )
    p.add_argument("--cert-out", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("margin", help="bisect the certified delay margin")
    p.add_argument("file")
    p.add_argument("--dmax", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--varpi", type=float, default=None)
    p.add_argument("--variant", choices=list(lmi.VARIANTS), default=None)
    p.set_defaults(func=cmd_margin)

    p = sub.add_parser("demo", help="run the built-in three-agent study")
    p.add_argument("--delay", type=float, required=True, choices=[0.1, 0.4, 0.7])
    p.add_argument("--out", required=True)
    p.add_argument("--horizon", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tol", type=float, default=0.05)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error[usage]: {exc}", file=sys.stderr)
        return 1
    if getattr(args, "command", None) == "demo" and args.seed is None:
        from .demo import DEMO_SEED

        args.seed = DEMO_SEED
    try:
        return args.func(args)
    except MissingFieldError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 2
    except InfeasibleBaseError as exc:
        print(f"error[infeasible]: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"error[divergence]: {exc}", file=sys.stderr)
        return 3
    except SolverUndecidedError as exc:
        print(f"error[undecided]: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return 1
    except DelayOptError as exc:
        print(f"error[internal]: {exc}", file=sys.stderr)
        return 3


def console_main():
    sys.exit(main())


if __name__ == "__main__":
    console_main()
