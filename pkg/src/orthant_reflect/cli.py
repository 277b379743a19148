"""``orthant-reflect`` command line.

Exit codes: 0 success, 1 a checked bound or invariant failed, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import sys
import time

from . import csvio, harness
from .core import read_matrix
from .errors import OrthantReflectError
from .paths import read_path_csv
from .projection import DEFAULT_TOL, project_fixed_point
from .sde import strong_error
from .skorokhod import fast_scheme, fixed_point_oracle

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _parse_point(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse point {text!r}") from None


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_project(args) -> int:
    Q = read_matrix(args.matrix)
    res = project_fixed_point(Q, args.point, tol=args.tol)
    d = Q.d
    header = [*(f"pi{j + 1}" for j in range(d)), *(f"r_bar{j + 1}" for j in range(d)), "iterations", "residual"]
    row = [*res.pi, *res.r_bar, res.iterations, res.residual]
    _emit(csvio.table_text(header, [row]), args.out)
    return EXIT_OK


def cmd_skorokhod(args) -> int:
    Q = read_matrix(args.matrix)
    y = read_path_csv(args.path)
    if args.oracle == "fast":
        sol = fast_scheme(Q, y)
    elif args.oracle == "fixed-point":
        sol = fixed_point_oracle(Q, y)
    else:
        sol = harness.exact_step_solution(Q, y)
    _emit(harness.solution_csv_text(sol), args.out)
    if not args.verify:
        return EXIT_OK
    checks = harness.solution_checks(Q, y, sol, exact=args.oracle != "fast")
    report = sys.stdout if args.out else sys.stderr
    for c in checks:
        print(c.line(), file=report)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


def _scenario_from_args(args, name: str) -> harness.Scenario:
    s = harness.get_scenario(name)
    file_values = harness.read_config(args.config) if args.config else {}
    flags = {
        key: getattr(args, key, None)
        for key in ("seed", "paths", "p", "n_max", "densities", "horizon")
    }
    return harness.configure(s, file_values, flags)


def cmd_simulate(args) -> int:
    s = _scenario_from_args(args, args.scenario)
    if s.kind != "diffusion":
        raise OrthantReflectError(f"scenario {s.name!r} is not a diffusion scenario")
    sol = harness.simulate_path(s, n=args.n, verify=args.verify)
    _emit(harness.solution_csv_text(sol), args.out)
    return EXIT_OK


def cmd_rate(args) -> int:
    s = _scenario_from_args(args, args.scenario)
    if s.kind != "diffusion":
        raise OrthantReflectError(f"scenario {s.name!r} is not a diffusion scenario")
    rep = strong_error(s.Q, s.model(), s.wiener(), s.densities, p=s.p, paths=s.paths)
    _emit(rep.to_csv(), args.out)
    return EXIT_OK


def cmd_scenario(args) -> int:
    if args.list:
        for name, s in harness.REGISTRY.items():
            print(f"{name}: {s.description}")
        return EXIT_OK
    if not args.name or not args.out:
        raise OrthantReflectError("scenario needs --name and --out (or --list)")
    s = _scenario_from_args(args, args.name)
    start = time.perf_counter()
    result = harness.run_scenario(s, args.out)
    for c in result.checks:
        print(c.line())
    verdict = "PASS" if result.passed else "FAIL"
    print(f"{verdict} {s.name} ({time.perf_counter() - start:.1f}s, {len(result.files)} files in {args.out})")
    return result.exit_code


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--paths", type=int, help="Monte Carlo paths")
    p.add_argument("--p", type=int, help="moment exponent p (error is raised to 2p)")
    p.add_argument("--n-max", dest="n_max", type=int, help="reference density")
    p.add_argument("--densities", help="comma-separated densities dividing n-max")
    p.add_argument("--horizon", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orthant-reflect",
        description="Skorokhod problem and reflected SDEs on the orthant with oblique reflection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", help="project a point onto the orthant")
    p.add_argument("--matrix", required=True)
    p.add_argument("--point", required=True, type=_parse_point, help='"v1,...,vd"')
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--out")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("skorokhod", help="solve the Skorokhod problem for a path CSV")
    p.add_argument("--matrix", required=True)
    p.add_argument("--path", required=True)
    p.add_argument("--oracle", choices=("fast", "fixed-point", "exact-step"), default="fast")
    p.add_argument("--verify", action="store_true", help="run invariant checks and print a report")
    p.add_argument("--out")
    p.set_defaults(func=cmd_skorokhod)

    p = sub.add_parser("simulate", help="simulate one path of a diffusion scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--n", type=int, help="grid density (default: finest scenario density)")
    p.add_argument("--verify", action="store_true")
    p.add_argument("--out")
    _add_overrides(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rate", help="strong-error rate report for a diffusion scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out")
    _add_overrides(p)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("scenario", help="run a built-in scenario and its checks")
    p.add_argument("--name")
    p.add_argument("--out", help="output directory")
    p.add_argument("--list", action="store_true")
    _add_overrides(p)
    p.set_defaults(func=cmd_scenario)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OrthantReflectError as exc:
        print(f"orthant-reflect: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"orthant-reflect: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
