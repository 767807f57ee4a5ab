"""Command-line surface: scenario runs, ODE-only runs, predictions, suites."""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .effective import (
    EffectiveState,
    integrate_effective,
    interaction_time,
    predict_outcome,
)
from .effective import KIND_DECREASING, KIND_INCREASING
from .grids import make_grid
from .linops import spectral_checks
from .potentials import PotentialSpec
from .scenarios import (
    ScenarioError,
    convergence_study,
    run_residual_scaling,
    run_scenario,
    scenario_from_toml,
)
from .solitons import check_identities, core_identity_names


def _add_potential_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--direction", choices=("increasing", "decreasing"),
                   default="increasing")
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--a-minus", type=float, default=1.0)
    p.add_argument("--a-plus", type=float, default=None,
                   help="defaults to 2 (increasing) or 0.5 (decreasing)")
    p.add_argument("--steepness", type=float, default=1.0)


def _potential_from_args(args) -> PotentialSpec:
    a_plus = args.a_plus
    if a_plus is None:
        a_plus = 2.0 if args.direction == "increasing" else 0.5
    return PotentialSpec(direction=args.direction, epsilon=args.epsilon,
                         a_minus=args.a_minus, a_plus=a_plus,
                         steepness=args.steepness)


def cmd_simulate(args) -> int:
    s = scenario_from_toml(args.config)
    result = run_scenario(s)
    print(f"[{result.kind}] {result.name}: {'PASS' if result.passed else 'FAIL'} "
          f"-> {result.bundle_dir}")
    for key, value in sorted(result.summary.items()):
        print(f"  {key}: {value}")
    return 0 if result.passed else 1


def cmd_effective(args) -> int:
    s = scenario_from_toml(args.config)
    pot = s.potential
    if pot is None or s.v0 is None:
        raise ScenarioError("effective run needs potential and v0")
    te = interaction_time(s.v0, pot.epsilon)
    kind = KIND_INCREASING if pot.direction == "increasing" else KIND_DECREASING
    horizon = (-te, te) if s.horizon == "auto" else s.horizon
    traj = integrate_effective(
        kind, EffectiveState(s.c_start, s.v0, s.v0 * horizon[0], 0.0),
        pot, s.m, horizon[0], horizon[1])
    from pathlib import Path

    bundle = Path(s.output_dir)
    bundle.mkdir(parents=True, exist_ok=True)
    traj.to_csv(bundle / "effective.csv")
    pred = predict_outcome(s.m, s.v0, pot)
    comparison = {
        "c_end": float(traj.C[-1]),
        "v_end": float(traj.V[-1]),
        "c_inf": pred.c_inf,
        "v_inf": pred.v_inf,
        "kind": pred.kind,
        "c_rel_err": abs(traj.C[-1] - pred.c_inf) / abs(pred.c_inf),
        "max_invariant_drift": float(traj.invariant_drift.max()),
    }
    with open(bundle / "prediction.json", "w") as fh:
        json.dump({"kind": pred.kind, "c_inf": pred.c_inf, "v_inf": pred.v_inf,
                   "lambda_inf": pred.lambda_inf}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(bundle / "comparison.json", "w") as fh:
        json.dump(comparison, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"effective trajectory -> {bundle/'effective.csv'}")
    for key, value in sorted(comparison.items()):
        print(f"  {key}: {value}")
    return 0


def cmd_predict(args) -> int:
    pot = _potential_from_args(args)
    pred = predict_outcome(args.m, args.v0, pot, dim=args.dim)
    payload = {"kind": pred.kind, "c_inf": pred.c_inf, "v_inf": pred.v_inf,
               "lambda_inf": pred.lambda_inf}
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def cmd_verify_identities(args) -> int:
    report = check_identities(args.m)
    core = set(core_identity_names())
    failed = False
    for chk in report.checks:
        ok = chk.ok(args.tol)
        tag = "PASS" if ok else "FAIL"
        extra = "" if chk.name in core else " (informational)"
        print(f"[{tag}] {chk.name}: rel error {chk.rel_error:.3e}{extra}")
        if chk.name in core and not ok:
            failed = True
    return 1 if failed else 0


def cmd_verify_operators(args) -> int:
    grid = make_grid(2048, 100.0)
    failed = False
    for c in args.c:
        rep = spectral_checks(args.m, c, grid)
        print(f"m={args.m} c={c}: first eigenvalue {rep.eigenvalue:.8f}, "
              f"coercivity proxy {rep.coercivity_proxy:.3e}")
        for chk in rep.checks:
            tag = "PASS" if chk.ok else "FAIL"
            print(f"  [{tag}] {chk.name}: {chk.value:.3e} (< {chk.threshold:g})")
            failed = failed or not chk.ok
    return 1 if failed else 0


def cmd_residual_scaling(args) -> int:
    s = scenario_from_toml(args.config)
    result = run_residual_scaling(s)
    print(f"[residual-scaling] {result.name}: "
          f"{'PASS' if result.passed else 'FAIL'} -> {result.bundle_dir}")
    print(json.dumps(result.summary, indent=2, sort_keys=True))
    return 0 if result.passed else 1


def cmd_converge(args) -> int:
    s = scenario_from_toml(args.config)
    result = convergence_study(s)
    print(f"[converge] {result.name}: "
          f"{'PASS' if result.passed else 'FAIL'} -> {result.bundle_dir}")
    print(json.dumps(result.summary, indent=2, sort_keys=True))
    return 0 if result.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlslab",
        description="Soliton propagation lab for slowly varying NLS media",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario from a TOML config")
    p.add_argument("config")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("effective", help="integrate only the parameter ODEs")
    p.add_argument("config")
    p.set_defaults(func=cmd_effective)

    p = sub.add_parser("predict", help="asymptotic outcome prediction")
    p.add_argument("--m", type=float, required=True)
    p.add_argument("--v0", type=float, required=True)
    p.add_argument("--dim", type=int, default=1, choices=(1, 2))
    p.add_argument("--out", default=None)
    _add_potential_args(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("verify-identities", help="soliton identity suite")
    p.add_argument("--m", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_verify_identities)

    p = sub.add_parser("verify-operators", help="linearized operator suite")
    p.add_argument("--m", type=float, required=True)
    p.add_argument("--c", type=float, nargs="+", default=[1.0, 4.0])
    p.set_defaults(func=cmd_verify_operators)

    p = sub.add_parser("residual-scaling", help="ansatz residual vs epsilon")
    p.add_argument("config")
    p.set_defaults(func=cmd_residual_scaling)

    p = sub.add_parser("converge", help="full-run convergence study")
    p.add_argument("config")
    p.set_defaults(func=cmd_converge)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
