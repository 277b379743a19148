"""Scenario registry and runners.

A scenario bundles a reflection matrix, an input (step function, analytic
path or diffusion model) and run parameters.  :func:`run_scenario` writes
data CSVs plus a ``<name>_summary.txt`` of PASS/FAIL lines into an output
directory; every file is a pure function of the scenario parameters, so a
rerun with the same seed reproduces them byte for byte.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import csvio
from .core import ReflectionMatrix, sup_norm, validate_matrix
from .errors import ConfigParse, UnknownScenario
from .paths import (
    GridPath,
    StepFunction,
    discretize,
    grid_from_times,
    sup_distance,
)
from .report import RateReport
from .sde import (
    DiffusionModel,
    WienerConfig,
    coarsen,
    constant_diffusion,
    fast_euler_diffusion,
    generate_wiener,
    mean_reverting_drift,
    moment_estimates,
    strong_error,
    zero_drift,
)
from .skorokhod import (
    SkorokhodSolution,
    check_theorem3,
    check_theorem4,
    fast_scheme,
    fixed_point_form_gap,
    fixed_point_oracle,
    running_max_reflection,
    step_function_exact,
)

SEED_ENV = "ORTHANT_REFLECT_SEED"
EXAMPLE_Q = ((0.0, 0.5), (0.5, 0.0))


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


@dataclass
class ScenarioResult:
    name: str
    checks: list[Check] = field(default_factory=list)
    files: list[Path] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1


@dataclass(frozen=True)
class Scenario:
    name: str
    kind: str  # "step", "path" or "diffusion"
    matrix: tuple
    source: Callable = field(compare=False, repr=False)
    densities: tuple[int, ...] = ()
    horizon: float = 1.0
    p: int = 1
    paths: int = 200
    seed: int = 0
    n_max: int = 8192
    pairs: int = 500
    moment_densities: tuple[int, ...] = (64, 256, 1024)
    moment_paths: int = 500
    slope_band: float = 0.3
    description: str = ""

    @property
    def Q(self) -> ReflectionMatrix:
        return validate_matrix(self.matrix)

    def model(self) -> DiffusionModel:
        if self.kind != "diffusion":
            raise ConfigParse(f"scenario {self.name!r} has no diffusion model")
        return self.source()

    def wiener(self, seed: int | None = None) -> WienerConfig:
        return WienerConfig(self.seed if seed is None else seed, self.n_max, len(self.matrix), self.horizon)


# -- scenario inputs -------------------------------------------------------

def single_jump_input() -> StepFunction:
    return StepFunction([0.0, 1.0], [[0.0, 0.0], [-1.0, -1.0]])


def sine_input(t: float) -> np.ndarray:
    return 0.25 * np.array([math.sin(2 * math.pi * t), math.sin(2 * math.pi * t + math.pi / 3)])


def bm_model() -> DiffusionModel:
    return DiffusionModel([0.0], zero_drift, constant_diffusion([[1.0]]), lipschitz_hint=0.0)


def _wobbly_diffusion(x):
    x = np.asarray(x, dtype=float)
    s = np.empty(x.shape + (2,))
    s[..., 0, 0] = 0.5 + 0.1 * np.sin(x[..., 0])
    s[..., 1, 1] = 0.5 + 0.1 * np.sin(x[..., 1])
    s[..., 0, 1] = 0.1 * np.cos(x[..., 1])
    s[..., 1, 0] = 0.1 * np.cos(x[..., 0])
    return s


def diffusion_2d_model() -> DiffusionModel:
    # started and mean-reverting close to the corner so reflection is active
    return DiffusionModel(
        [0.5, 0.5], mean_reverting_drift([0.5, 0.5]), _wobbly_diffusion, lipschitz_hint=1.0
    )


REGISTRY: dict[str, Scenario] = {}


def register(s: Scenario) -> Scenario:
    if s.name in REGISTRY:
        raise ValueError(f"duplicate scenario name {s.name!r}")
    validate_matrix(s.matrix)
    REGISTRY[s.name] = s
    return s


register(Scenario(
    "paper-example", "step", EXAMPLE_Q, single_jump_input,
    densities=(4, 16, 64), horizon=2.0,
    description="single jump to (-1,-1) at t=1; closed-form scheme iterates",
))
register(Scenario(
    "step-random", "step", EXAMPLE_Q, single_jump_input,
    densities=(64, 256, 1024, 4096), horizon=1.0, seed=20240601, pairs=500,
    description="random step inputs: oracle agreement, pointwise convergence, stability",
))
register(Scenario(
    "continuous-sine", "path", EXAMPLE_Q, sine_input,
    densities=(10, 100, 1000), horizon=2.0,
    description="continuous input: a-priori error bound against a 10x finer reference",
))
register(Scenario(
    "bm-1d-rate", "diffusion", ((0.0,),), bm_model,
    densities=(16, 32, 64, 128, 256, 512, 1024), horizon=1.0, seed=12345,
    paths=200, n_max=8192, slope_band=0.3,
    description="reflected Brownian motion on the half line: strong rate and 1-d oracle",
))
register(Scenario(
    "diffusion-2d-rate", "diffusion", EXAMPLE_Q, diffusion_2d_model,
    densities=(16, 32, 64, 128, 256, 512, 1024), horizon=1.0, seed=2024,
    paths=200, n_max=8192, slope_band=0.4,
    description="2-d reflected diffusion: strong rate and moment stability",
))


def get_scenario(name: str) -> Scenario:
    try:
        return REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(REGISTRY))
        raise UnknownScenario(f"unknown scenario {name!r} (known: {known})") from None


# -- configuration ---------------------------------------------------------

_OVERRIDABLE = {
    "seed": int,
    "paths": int,
    "p": int,
    "n_max": int,
    "pairs": int,
    "moment_paths": int,
    "horizon": float,
    "slope_band": float,
    "densities": "ints",
    "moment_densities": "ints",
}


def _convert(key: str, raw, source: str):
    kind = _OVERRIDABLE[key]
    try:
        if kind == "ints":
            if isinstance(raw, str):
                return tuple(int(v) for v in raw.replace(" ", "").split(",") if v)
            return tuple(int(v) for v in raw)
        return kind(raw)
    except (TypeError, ValueError):
        raise ConfigParse(f"{source}: bad value for {key}: {raw!r}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParse(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _OVERRIDABLE:
            raise ConfigParse(f"{source}:{lineno}: unknown key {key!r}")
        out[key] = _convert(key, value.strip(), f"{source}:{lineno}")
    return out


def read_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParse(f"{path}: cannot read config ({exc.strerror})") from None
    return parse_config_text(text, str(path))


def configure(
    s: Scenario,
    file_values: dict | None = None,
    flag_values: dict | None = None,
    env: dict | None = None,
) -> Scenario:
    """Apply the env seed, then the config file, then command-line flags."""
    env = os.environ if env is None else env
    updates = {}
    if env.get(SEED_ENV):
        updates["seed"] = _convert("seed", env[SEED_ENV], SEED_ENV)
    for values in (file_values or {}, flag_values or {}):
        for key, value in values.items():
            if value is not None:
                updates[key] = _convert(key, value, "flag")
    return dataclasses.replace(s, **updates)


# -- solution CSV ----------------------------------------------------------

def solution_csv_text(sol: SkorokhodSolution) -> str:
    d = sol.x.d
    header = ["t", *(f"x{j + 1}" for j in range(d)), *(f"k{j + 1}" for j in range(d))]
    rows = np.column_stack([sol.x.times, sol.x.values, sol.k.values])
    return csvio.table_text(header, rows)


def read_solution_csv(source) -> SkorokhodSolution:
    header, data, _ = csvio.read_table(source)
    if not header or header[0] != "t" or (len(header) - 1) % 2:
        raise ConfigParse(f"{source}: header must be t,x1..xd,k1..kd")
    d = (len(header) - 1) // 2
    n, horizon = grid_from_times(data[:, 0], str(source))
    return SkorokhodSolution(
        GridPath(n, horizon, data[:, 1 : 1 + d]), GridPath(n, horizon, data[:, 1 + d :])
    )


def _write(result: ScenarioResult, out: Path, filename: str, text: str) -> None:
    path = out / filename
    path.write_text(text, encoding="utf-8")
    result.files.append(path)


# -- runners ---------------------------------------------------------------

def _single_jump_closed_form(n: int, horizon: float) -> tuple[np.ndarray, np.ndarray]:
    j = np.arange(int(math.floor(n * horizon + 1e-9)) + 1)
    i = j - n
    after = i >= 0
    k = np.where(after, 2.0 - np.exp2(-np.maximum(i, 0).astype(float)), 0.0)
    x = np.where(after, -np.exp2(-(np.maximum(i, 0) + 1).astype(float)), 0.0)
    return np.column_stack([x, x]), np.column_stack([k, k])


def _run_single_jump(s: Scenario, out: Path, result: ScenarioResult) -> None:
    Q = s.Q
    y = s.source()
    x_exact, _ = step_function_exact(Q, y)
    for n in s.densities:
        yn = discretize(y, n, s.horizon)
        sol = fast_scheme(Q, yn, verify=True)
        x_cf, k_cf = _single_jump_closed_form(n, s.horizon)
        err = max(sup_norm(sol.x.values - x_cf), sup_norm(sol.k.values - k_cf))
        result.checks.append(Check(f"iterates[n={n}]", err <= 1e-12, f"max deviation {err:.3g} (tol 1e-12)"))
        sup_x = sup_distance(sol.x, discretize(x_exact, n, s.horizon), 2.0)
        result.checks.append(Check(
            f"sup-error[n={n}]", abs(sup_x - 0.5) <= 1e-14, f"sup_(t<=2)|x^n - x| = {sup_x!r} (expect 0.5)"
        ))
        gap = fixed_point_form_gap(Q, yn, sol.k)
        result.checks.append(Check(f"fixed-point-form[n={n}]", gap <= 1e-12, f"gap {gap:.3g}"))
        _write(result, out, f"{s.name}_n{n}.csv", solution_csv_text(sol))


def random_matrix(rng: np.random.Generator, d: int, max_norm: float = 0.95) -> ReflectionMatrix:
    """Random admissible matrix with both max-sum norms equal to a draw from (0, max_norm)."""
    q = rng.random((d, d))
    np.fill_diagonal(q, 0.0)
    if d == 1:
        return validate_matrix(q)
    target = rng.uniform(0.0, max_norm)
    scale = max(q.sum(axis=0).max(), q.sum(axis=1).max())
    return validate_matrix(q * (target / scale))


def random_step_input(rng: np.random.Generator, d: int, jumps: int, slots: int = 8) -> StepFunction:
    """Step input with jumps at distinct multiples of ``1/slots`` in (0, 1)."""
    times = np.sort(rng.choice(np.arange(1, slots), size=jumps, replace=False)) / slots
    values = rng.normal(size=(jumps + 1, d))
    values[0] = np.abs(values[0])
    return StepFunction(np.concatenate([[0.0], times]), values)


def random_walk_path(rng: np.random.Generator, d: int, n: int, horizon: float) -> GridPath:
    steps = int(math.floor(n * horizon + 1e-9))
    inc = rng.normal(scale=rng.uniform(0.05, 1.0), size=(steps, d))
    # occasional large jumps so the bound is exercised on discontinuous input too
    inc += (rng.random((steps, d)) < 0.02) * rng.normal(scale=2.0, size=(steps, d))
    values = np.vstack([np.abs(rng.normal(size=d)), np.zeros((steps, d))])
    values[1:] = values[0] + np.cumsum(inc, axis=0)
    return GridPath(n, horizon, values)


def _run_step_random(s: Scenario, out: Path, result: ScenarioResult) -> None:
    rng = np.random.default_rng(s.seed)
    n_coarse = s.densities[0]

    oracle_rows, conv_rows = [], []
    worst_oracle, worst_final, monotone = 0.0, 0.0, True
    for trial in range(20):
        d = int(rng.integers(1, 5))
        Q = random_matrix(rng, d, max_norm=0.7)
        y = random_step_input(rng, d, jumps=3)
        x_ex, k_ex = step_function_exact(Q, y)
        ref = fixed_point_oracle(Q, discretize(y, n_coarse, s.horizon))
        gap = max(
            sup_distance(ref.x, discretize(x_ex, n_coarse, s.horizon)),
            sup_distance(ref.k, discretize(k_ex, n_coarse, s.horizon)),
        )
        worst_oracle = max(worst_oracle, gap)
        oracle_rows.append((trial, d, Q.col_norm, gap))
        # midpoints between jumps are continuity points
        edges = np.concatenate([y.times, [s.horizon]])
        probes = 0.5 * (edges[:-1] + edges[1:])
        errs = []
        for n in s.densities:
            sol = fast_scheme(Q, discretize(y, n, s.horizon))
            e = max(sup_norm(sol.x.at(t) - x_ex(t)) for t in probes)
            errs.append(e)
            conv_rows.append((trial, n, e))
        # rounding noise floor once the error has converged
        monotone &= all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))
        worst_final = max(worst_final, errs[-1])
    result.checks.append(Check("cross-oracle", worst_oracle <= 1e-10, f"max discrepancy {worst_oracle:.3g} (tol 1e-10)"))
    result.checks.append(Check(
        "pointwise-convergence", monotone and worst_final <= 1e-9,
        f"errors non-increasing in n: {monotone}; worst at n={s.densities[-1]}: {worst_final:.3g}",
    ))

    stab_rows = []
    k_viol = total_viol = growth_viol = 0
    for pair in range(s.pairs):
        d = int(rng.integers(1, 5))
        Q = random_matrix(rng, d)
        n = int(rng.integers(5, 200))
        y1 = random_walk_path(rng, d, n, s.horizon)
        if rng.random() < 0.5:
            shift = rng.normal(scale=0.5, size=d)
            v2 = y1.values + shift
        else:
            v2 = y1.values + random_walk_path(rng, d, n, s.horizon).values * rng.uniform(0.01, 1.0)
        v2[0] = np.abs(v2[0])
        y2 = GridPath(n, s.horizon, v2)
        rep = check_theorem4(Q, y1, y2)
        det = rep.details
        k_ok = det["k_gap"] <= det["rhs_k"] + 1e-12 * (1 + det["y_dist"])
        k_viol += not k_ok
        total_viol += not rep.passed
        sol = fast_scheme(Q, y1)
        growth = sup_norm(sol.k.values[-1]) <= sup_norm(y1.values) / (1 - Q.col_norm) + 1e-12
        growth_viol += not growth
        stab_rows.append((pair, d, n, Q.col_norm, det["y_dist"], det["k_gap"], det["x_gap"], det["rhs_k"], rep.rhs))
    result.checks.append(Check("stability-k", k_viol == 0, f"{k_viol} violations in {s.pairs} pairs"))
    result.checks.append(Check("stability-total", total_viol == 0, f"{total_viol} violations in {s.pairs} pairs"))
    result.checks.append(Check("regulator-growth", growth_viol == 0, f"{growth_viol} violations in {s.pairs} paths"))

    _write(result, out, f"{s.name}_oracles.csv", csvio.table_text(("trial", "d", "col_norm", "discrepancy"), oracle_rows))
    _write(result, out, f"{s.name}_convergence.csv", csvio.table_text(("trial", "n", "error"), conv_rows))
    _write(result, out, f"{s.name}_stability.csv", csvio.table_text(
        ("pair", "d", "n", "col_norm", "y_dist", "k_gap", "x_gap", "rhs_k", "rhs_total"), stab_rows
    ))


def _run_continuous(s: Scenario, out: Path, result: ScenarioResult) -> None:
    Q = s.Q
    rows, lhs_seq = [], []
    for n in s.densities:
        y = discretize(s.source, n, s.horizon)
        ref = fixed_point_oracle(Q, discretize(s.source, 10 * n, s.horizon))
        rep = check_theorem3(Q, y, ref)
        det = rep.details
        rows.append((n, det["omega"], det["x_err"], det["k_err"], rep.lhs, rep.rhs))
        lhs_seq.append(rep.lhs)
        result.checks.append(Check(f"error-bound[n={n}]", rep.passed, f"lhs {rep.lhs:.6g} <= rhs {rep.rhs:.6g}"))
    decreasing = all(b < a for a, b in zip(lhs_seq, lhs_seq[1:]))
    result.checks.append(Check(
        "error-vanishes", decreasing and lhs_seq[-1] < 1e-2,
        f"lhs decreasing: {decreasing}; lhs at n={s.densities[-1]}: {lhs_seq[-1]:.6g} (< 1e-2)",
    ))
    _write(result, out, f"{s.name}_bound.csv", csvio.table_text(("n", "omega", "x_err", "k_err", "lhs", "rhs"), rows))


def _rate_checks(s: Scenario, rep: RateReport, result: ScenarioResult, min_r2: float | None) -> None:
    lo, hi = s.p - s.slope_band, s.p + s.slope_band
    ok = lo <= rep.slope <= hi
    result.checks.append(Check("rate-slope", ok, f"slope {rep.slope:.4f} in [{lo:g}, {hi:g}]"))
    if min_r2 is not None:
        result.checks.append(Check("rate-fit", rep.r_squared >= min_r2, f"r^2 {rep.r_squared:.4f} >= {min_r2}"))
    means = [r.mean_err_2p for r in rep.rows]
    errs = [r.stderr for r in rep.rows]
    mono = all(b <= a + 2 * math.hypot(ea, eb) for a, b, ea, eb in zip(means, means[1:], errs, errs[1:]))
    result.checks.append(Check("error-monotone", mono, "mean error non-increasing in n up to 2 standard errors"))


def _run_diffusion(s: Scenario, out: Path, result: ScenarioResult) -> None:
    Q = s.Q
    model = s.model()
    rep = strong_error(Q, model, s.wiener(), s.densities, p=s.p, paths=s.paths)
    _write(result, out, f"{s.name}_rate.csv", rep.to_csv())
    if model.d == 1:
        _rate_checks(s, rep, result, min_r2=0.95)
        _one_d_oracle(s, model, result)
    else:
        _rate_checks(s, rep, result, min_r2=None)
        moments = moment_estimates(Q, model, s.wiener(), s.moment_densities, p=1, paths=s.moment_paths)
        vals = [m for m, _ in moments.values()]
        spread = (max(vals) - min(vals)) / float(np.mean(vals))
        result.checks.append(Check(
            "moment-stability", spread < 0.10,
            f"E sup|X^n|^2 relative spread {spread:.4f} over n={list(moments)} (< 0.10)",
        ))
        rows = [(n, m, e) for n, (m, e) in moments.items()]
        _write(result, out, f"{s.name}_moments.csv", csvio.table_text(("n", "mean_sup_sq", "stderr"), rows))


def one_d_oracle_gap(s: Scenario, model: DiffusionModel, n: int, paths: int = 100) -> float:
    """Largest gap between the scheme and the running-max map over seeded paths."""
    Q = s.Q
    worst = 0.0
    for m in range(paths):
        w = generate_wiener(s.wiener(s.seed + m))
        sol = fast_euler_diffusion(Q, model, w, n)
        driver = coarsen(w, n).path
        exact = running_max_reflection(GridPath(n, driver.horizon, model.x0 + driver.values))
        worst = max(worst, sup_distance(sol.x, exact.x), sup_distance(sol.k, exact.k))
    return worst


def _one_d_oracle(s: Scenario, model: DiffusionModel, result: ScenarioResult) -> None:
    n = s.densities[-1]
    gap = one_d_oracle_gap(s, model, n)
    result.checks.append(Check("oracle-1d", gap <= 1e-12, f"max gap {gap:.3g} over 100 paths at n={n} (tol 1e-12)"))


_RUNNERS = {
    "paper-example": _run_single_jump,
    "step-random": _run_step_random,
    "continuous-sine": _run_continuous,
    "bm-1d-rate": _run_diffusion,
    "diffusion-2d-rate": _run_diffusion,
}


def run_scenario(s: Scenario, out_dir) -> ScenarioResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = ScenarioResult(s.name)
    _RUNNERS[s.name](s, out, result)
    summary = "".join(c.line() + "\n" for c in result.checks)
    _write(result, out, f"{s.name}_summary.txt", summary)
    return result


def simulate_path(s: Scenario, n: int | None = None, verify: bool = False) -> SkorokhodSolution:
    """One path of a diffusion scenario, driven by the Wiener path of ``s.seed``."""
    n = s.densities[-1] if n is None else n
    return fast_euler_diffusion(s.Q, s.model(), generate_wiener(s.wiener()), n, verify=verify)


def solution_checks(Q: ReflectionMatrix, y: GridPath, sol: SkorokhodSolution, exact: bool) -> list[Check]:
    """Invariant checks reported by ``skorokhod --verify``."""
    v, x, k = y.values, sol.x.values, sol.k.values
    scale = 1.0 + max(sup_norm(v), sup_norm(k))
    tol = 1e-12 * scale
    checks = [
        Check("regulator-start", sup_norm(k[0]) == 0.0, f"k_0 = {k[0].tolist()}"),
        Check("regulator-monotone", bool(np.all(np.diff(k, axis=0) >= -tol)), "k non-decreasing"),
    ]
    recon = sup_norm(x - (v + Q.reflect(k)))
    checks.append(Check("reconstruction", recon <= tol, f"sup|x - y - (I-Q^T)k| = {recon:.3g}"))
    growth = sup_norm(k[-1]) <= sup_norm(v) / (1 - Q.col_norm) + tol
    checks.append(Check("regulator-growth", growth, "sup|k| <= sup|y| / (1 - col_norm)"))
    if exact:
        low = float(x.min())
        checks.append(Check("in-orthant", low >= -tol, f"min x = {low:.3g}"))
        dk = np.diff(k, axis=0)
        comp = float(np.max(np.abs(x[1:]) * (dk > tol), initial=0.0))
        checks.append(Check("complementarity", comp <= 1e-8 * scale, f"max |x_j| where k_j grows = {comp:.3g}"))
    else:
        try:
            fast_scheme(Q, y, verify=True)
            checks.append(Check("scheme-forms", True, "max and incremental forms agree"))
        except AssertionError as exc:
            checks.append(Check("scheme-forms", False, str(exc)))
        gap = fixed_point_form_gap(Q, y, sol.k)
        checks.append(Check("fixed-point-form", gap <= 1e-12, f"gap {gap:.3g}"))
    return checks


def grid_step_input(y: GridPath) -> StepFunction:
    """The grid path as a step function with jumps at grid times."""
    return StepFunction(y.times, y.values)


def exact_step_solution(Q: ReflectionMatrix, y: GridPath) -> SkorokhodSolution:
    x, k = step_function_exact(Q, grid_step_input(y))
    return SkorokhodSolution(GridPath(y.n, y.horizon, x.values), GridPath(y.n, y.horizon, k.values), y)
