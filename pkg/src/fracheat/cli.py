"""Command-line experiment driver.

Every subcommand writes CSV tables plus ``summary.json`` (schema
``fracheat.v1``) into ``--out`` and exits 0 when all non-informational
checks pass, 1 when one fails, 2 on configuration errors (nothing written)
and 3 when the mode-truncation gate trips.
"""

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import _backend
from .evolution import TimeDependentData, elliptic_limit_check, solve_h
from .green import (boundary_slope, green_apply, green_kernel, h1_check, martin_apply,
                    martin_kernel)
from .grid_ops import OperatorKind, assemble, build_grid, operator_from_green, synthetic_green
from .kernel_bounds import (dgamma_two_sided_report, hopf_report, ondiagonal_slope,
                            two_sided_report, weighted_diagonal_report)
from .semigroup import (chapman_kolmogorov_error, heat_kernel, resolvent_check, submarkov_check,
                        ultracontractivity_check)
from .spectral import eigendecompose, estimate_sobolev_constant, weyl_check
from .weakdual import make_test_functions, weak_phi_residual

SCHEMA = "fracheat.v1"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_TRUNCATION = 0, 1, 2, 3
COMMANDS = ("eig", "weyl", "green", "heat", "solve", "verify", "kernel-bounds", "sweep")
PRESETS = ("zero", "one", "phi1", "random")
KNOWN_CHECKS = (
    "eig_positive", "weyl", "h1", "u_star_slope", "martin_positive", "ultracontractivity",
    "submarkov", "chapman_kolmogorov", "resolvent_0.1", "resolvent_1", "resolvent_10",
    "elliptic_limit", "duhamel_exact", "stationarity", "weak_dual", "two_sided",
    "dgamma_two_sided", "hopf", "weighted_diagonal", "ondiagonal_slope",
)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    op: str = "sfl"
    s: float = 0.5
    dim: int = 1
    n: int = 128
    modes: int | None = None
    seed: int = 0
    t_start: float = 0.0
    t_stop: float = 1.0
    t_count: int = 201
    u0: str | list = "zero"
    f: str | list = "zero"
    h: str | list = "one"
    suite: str = "core"
    checks: list | None = None
    tolerances: dict = field(default_factory=dict)

    def validate(self):
        try:
            kind = OperatorKind(self.op)
        except ValueError:
            raise ConfigError(f"unknown operator {self.op!r}")
        if not isinstance(self.dim, int) or self.dim not in (1, 2):
            raise ConfigError(f"dim must be 1 or 2, got {self.dim!r}")
        if not isinstance(self.n, int) or self.n < 4:
            raise ConfigError(f"n must be an integer >= 4, got {self.n!r}")
        if self.dim == 2 and self.n > 48:
            raise ConfigError("d=2 grids are dense: keep n <= 48")
        s = self.s
        if not isinstance(s, (int, float)):
            raise ConfigError("s must be a number")
        if kind is OperatorKind.CFL and not 0.5 < s < 1:
            raise ConfigError(f"cfl needs s in (1/2, 1), got {s}")
        if kind is OperatorKind.SFL and not 0 < s <= 1:
            raise ConfigError(f"sfl needs s in (0, 1], got {s}")
        if kind in (OperatorKind.RFL, OperatorKind.SYNTHETIC) and not 0 < s < 1:
            raise ConfigError(f"{self.op} needs s in (0, 1), got {s}")
        size = self.n ** self.dim
        if self.modes is not None and not (isinstance(self.modes, int) and 1 <= self.modes <= size):
            raise ConfigError(f"modes must be an integer in [1, {size}]")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        if not (self.t_stop > self.t_start >= 0 and isinstance(self.t_count, int) and self.t_count >= 3):
            raise ConfigError("time grid needs 0 <= t_start < t_stop and t_count >= 3")
        n_boundary = 2 if self.dim == 1 else 4 * self.n
        for name, length in (("u0", size), ("f", size), ("h", n_boundary)):
            v = getattr(self, name)
            if isinstance(v, list):
                if len(v) != length or not all(isinstance(x, (int, float)) and np.isfinite(x) for x in v):
                    raise ConfigError(f"tabulated {name} needs {length} finite numbers")
            elif v not in PRESETS or (name == "h" and v == "phi1"):
                raise ConfigError(f"{name} must be a preset {PRESETS} or a list of values")
        if self.checks is not None:
            if not isinstance(self.checks, list) or not self.checks:
                raise ConfigError("checks must be a non-empty list")
            unknown = set(self.checks) - set(KNOWN_CHECKS)
            if unknown:
                raise ConfigError(f"unknown checks: {sorted(unknown)}")
        if self.suite not in ("core",):
            raise ConfigError(f"unknown suite {self.suite!r}")
        if not isinstance(self.tolerances, dict):
            raise ConfigError("tolerances must be an object")
        return self

    @property
    def times(self):
        return np.linspace(self.t_start, self.t_stop, self.t_count)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return raw


def build_config(args):
    values = load_config(args.config) if args.config else {}
    for name in ("op", "s", "dim", "n", "modes", "seed", "suite"):
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    try:
        cfg = ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc))
    return cfg.validate()


def _tol(cfg, name, default):
    return float(cfg.tolerances.get(name, default))


def make_eig(cfg):
    grid = build_grid(cfg.dim, cfg.n)
    if cfg.op == OperatorKind.SYNTHETIC.value:
        gamma = cfg.s if cfg.dim > 2 * cfg.s else 0.5
        op = operator_from_green(synthetic_green(grid, cfg.s, gamma, "baseline"))
    else:
        op = assemble(cfg.op, grid, cfg.s)
    return eigendecompose(op, cfg.modes)


def preset(name, eig, rng, boundary=False):
    grid = eig.grid
    size = len(grid.boundary_weights) if boundary else grid.size
    if isinstance(name, list):
        return np.asarray(name, dtype=float)
    if name == "zero":
        return np.zeros(size)
    if name == "one":
        return np.ones(size)
    if name == "random":
        return rng.random(size)
    if boundary:
        raise ConfigError("phi1 is not a boundary preset")
    return eig.phi1.copy()


class Run:
    """Collects CSV tables and check results for one invocation."""

    def __init__(self, cfg, command):
        self.cfg = cfg
        self.command = command
        self.tables = {}
        self.checks = {}
        self.truncation_tripped = False

    def table(self, name, check, symbol, header, rows):
        self.tables[name] = (["check", "symbol"] + list(header),
                             [[check, symbol] + list(r) for r in rows])

    def check(self, name, passed, informational=False, **values):
        clean = {k: _jsonable(v) for k, v in values.items()}
        self.checks[name] = {"passed": bool(passed), "informational": bool(informational), **clean}

    def selected(self):
        keep = self.cfg.checks
        if keep is None:
            return self.checks
        return {k: v for k, v in self.checks.items() if k.split(":")[-1] in keep}

    def exit_code(self):
        if self.truncation_tripped:
            return EXIT_TRUNCATION
        failed = [c for c in self.selected().values() if not c["passed"] and not c["informational"]]
        return EXIT_FAIL if failed else EXIT_OK

    def write(self, out):
        os.makedirs(out, exist_ok=True)
        for name, (header, rows) in self.tables.items():
            with open(os.path.join(out, f"{name}.csv"), "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                for r in rows:
                    w.writerow([_fmt(v) for v in r])
        summary = {
            "schema": SCHEMA,
            "command": self.command,
            "config": asdict(self.cfg),
            "seed": self.cfg.seed,
            "backend": _backend.BACKEND,
            "checks": self.selected(),
            "exit_code": self.exit_code(),
        }
        with open(os.path.join(out, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _gate(run, eig):
    """Trip the truncation gate when the tail dominates at the smallest positive output time."""
    times = run.cfg.times
    t_min = times[times > 0].min()
    if not heat_kernel(eig, t_min).truncation_ok:
        run.truncation_tripped = True


def cmd_eig(run, eig):
    k = np.arange(1, len(eig.lambdas) + 1)
    p = 2 * eig.s / eig.grid.dim
    run.table("eigenvalues", "eig", "lambda_k", ["k", "lambda", "lambda_over_k_pow"],
              zip(k, eig.lambdas, eig.lambdas / k ** p))
    run.check("eig_positive", eig.lambdas[0] > 0, lambda1=eig.lambda1,
              gap=eig.lambdas[1] - eig.lambdas[0], phi1_positive=eig.info["phi1_positive"])


def cmd_weyl(run, eig):
    extra, cs = {}, None
    if eig.grid.dim > 2 * eig.s:
        cs = estimate_sobolev_constant(eig, seed=run.cfg.seed, n_random=50)
    rep = weyl_check(eig, min(64, eig.modes), sobolev=cs)
    if cs is not None:
        extra = {"sobolev_estimate": cs, "sobolev_constant_bound": rep.sobolev_constant_bound}
    lam = eig.lambdas[: len(rep.k)]
    run.table("weyl", "weyl", "lambda_k >= c k^(2s/d)", ["k", "lambda", "c_k_pow", "margin"],
              zip(rep.k, lam, rep.c * rep.k ** rep.exponent, rep.margins))
    run.check("weyl", rep.passed, c=rep.c, fitted_exponent=rep.fitted_exponent,
              expected_exponent=rep.exponent, k_max=int(rep.k[-1]), **extra)


def cmd_green(run, eig):
    grid = eig.grid
    kern = green_kernel(eig)
    h1 = h1_check(kern, eig.s, eig.gamma, grid, _tol(run.cfg, "spread", 1e3))
    run.check("h1", h1.passed, informational=h1.skipped, min=h1.min, max=h1.max, note=h1.note)
    m = martin_kernel(eig)
    ustar = martin_apply(m, 1.0)
    run.table("u_star", "u_star", "M[1]", ["node", "delta", "u_star"],
              zip(range(grid.size), grid.delta, ustar))
    expected = 2 * eig.s - eig.gamma - 1
    if eig.kind is OperatorKind.SYNTHETIC:
        return
    slope = boundary_slope(ustar, grid, (4 * grid.h, 0.1))
    run.check("u_star_slope", abs(slope - expected) <= _tol(run.cfg, "slope", 0.1),
              slope=slope, expected=expected)
    pos = m.values[m.converged]
    run.check("martin_positive", pos.min() >= -1e-10 * np.abs(pos).max(), min=pos.min(),
              converged_fraction=m.converged.mean())


def cmd_heat(run, eig):
    _gate(run, eig)
    rep = ultracontractivity_check(eig, eig.s, eig.gamma)
    rows = [(t, a, b if rep.c_weighted is not None else "") for t, a, b in
            zip(rep.t, rep.c_plain, rep.c_weighted if rep.c_weighted is not None else rep.c_plain)]
    run.table("ultracontractivity", "heat", "sup S t^(d/2s)", ["t", "c_plain", "c_weighted"], rows)
    run.check("ultracontractivity", rep.passed, growth_plain=rep.growth_slope_plain,
              growth_weighted=rep.growth_slope_weighted, note=rep.note)
    sm = submarkov_check(eig, [0.01, 0.1, 1.0], seed=run.cfg.seed)
    run.check("submarkov", sm.passed, min_s1=sm.min_of_s1, max_s1=sm.max_of_s1,
              abs_violation=sm.abs_comparison_violation, l1_excess=sm.l1_excess)
    ck = chapman_kolmogorov_error(eig, 0.3, 0.2)
    tail = eig.tail_bound(0.2)
    run.check("chapman_kolmogorov", ck <= 1e-6 + tail, error=ck, tail=tail)
    for lam in (0.1, 1.0, 10.0):
        r = resolvent_check(eig, lam, seed=run.cfg.seed)
        run.check(f"resolvent_{lam:g}", r.passed, ratio=r.ratio, bound=r.bound)


def _data(run, eig, times, constant=False):
    rng = np.random.default_rng(run.cfg.seed)
    u0 = preset(run.cfg.u0, eig, rng)
    f = preset(run.cfg.f, eig, rng)
    h = preset(run.cfg.h, eig, rng, boundary=True)
    if constant:
        return TimeDependentData(u0, f, h)
    return TimeDependentData(u0, np.tile(f, (len(times), 1)), np.tile(h, (len(times), 1)), times)


def cmd_solve(run, eig):
    _gate(run, eig)
    times = run.cfg.times
    data = _data(run, eig, times)
    traj = solve_h(eig, eig.gamma, data, times)
    grid = eig.grid
    rows = [(t, i, grid.delta[i], v) for t, vals in zip(traj.times, traj.values)
            for i, v in enumerate(vals)]
    run.table("trajectory", "solve", "H[u0,f,h](t,x)", ["t", "node", "delta", "u"], rows)
    const = _data(run, eig, times, constant=True)
    tail = times[times >= 0.5 * times[-1]]
    rep = elliptic_limit_check(eig, eig.gamma, const.u0, const.f, const.h, tail)
    run.table("elliptic_limit", "solve", "||H(t)-G[f]-M[h]||", ["t", "error"], zip(rep.times, rep.errors))
    run.check("elliptic_limit", rep.passed, slope=rep.slope, lambda1=rep.lambda1)


def cmd_verify(run, eig):
    cmd_weyl(run, eig)
    cmd_heat(run, eig)
    grid = eig.grid
    times = np.linspace(0.0, 1.0, 201)
    rng = np.random.default_rng(run.cfg.seed)
    phi1 = eig.phi1
    from .evolution import duhamel
    err = max(np.abs(duhamel(eig, phi1, t) - (-np.expm1(-eig.lambda1 * t) / eig.lambda1) * phi1).max()
              for t in (0.1, 1.0, 10.0)) / np.abs(phi1).max()
    run.check("duhamel_exact", err <= 1e-10 * max(1.0, 1.0 / eig.lambda1), error=err)
    f = rng.random(grid.size)
    gf = green_apply(eig, f)
    traj = solve_h(eig, eig.gamma, TimeDependentData(gf, f), [0.1, 1.0, 10.0])
    dg = grid.delta ** eig.gamma
    stat = max(grid.l1(v - gf, dg) for v in traj.values) / grid.l1(gf, dg)
    run.check("stationarity", stat <= 1e-6, relative=stat)
    data = TimeDependentData(rng.random(grid.size), np.outer(1 + times, rng.random(grid.size)),
                             np.outer(2 - times, rng.random(len(grid.boundary_weights))), times)
    traj = solve_h(eig, eig.gamma, data, times)
    rows, worst = [], 0.0
    for name, phi in make_test_functions(eig, eig.gamma, seed=run.cfg.seed).items():
        r = weak_phi_residual(eig, eig.gamma, traj, data, phi, name)
        rows.append((name, r.lhs, r.rhs, r.relative))
        worst = max(worst, r.relative)
    run.table("weak_dual", "weak_phi", "lhs-rhs", ["test_function", "lhs", "rhs", "relative"], rows)
    run.check("weak_dual", worst <= _tol(run.cfg, "weak_dual", 1e-3), worst=worst)


def cmd_kernel_bounds(run, eig):
    if eig.kind is OperatorKind.SYNTHETIC:
        raise ConfigError("no published heat-kernel bound for synthetic kernels")
    t_grid = np.geomspace(0.05, 2.0, 16)
    rep = two_sided_report(eig, eig.kind, eig.s, t_grid, spread_max=_tol(run.cfg, "spread", 1e3))
    run.table("kernel_bounds", "kernel_bounds", "S/envelope", ["t", "min_ratio", "max_ratio"], rep.per_t)
    run.check("two_sided", rep.passed, informational=rep.informational, c_low=rep.c_low,
              c_up=rep.c_up, spread=rep.spread, T=rep.T, c2=rep.c2, note=rep.note)
    dt = dgamma_two_sided_report(eig, eig.kind, eig.s, t_grid, spread_max=_tol(run.cfg, "spread", 1e3))
    run.check("dgamma_two_sided", dt.passed, informational=dt.informational, c_low=dt.c_low,
              c_up=dt.c_up, spread=dt.spread, note=dt.note)
    hopf = hopf_report(eig, seed=run.cfg.seed)
    run.check("hopf", hopf.factor <= rep.spread, factor=hopf.factor)
    wd = weighted_diagonal_report(eig)
    run.table("weighted_diagonal", "kernel_bounds", "sup S/(delta^g delta^g) t^(+-d/2s)",
              ["t", "c_negative", "c_positive"], zip(wd.t, wd.c_negative, wd.c_positive))
    run.check("weighted_diagonal", wd.bounded_negative, informational=True,
              growth_negative=wd.growth_negative, growth_positive=wd.growth_positive)
    if eig.kind is OperatorKind.RFL:
        d = ondiagonal_slope(eig, eig.s)
        run.check("ondiagonal_slope", d.within(0.15), slope=d.slope, expected=d.expected,
                  window=list(d.window))


HANDLERS = {"eig": cmd_eig, "weyl": cmd_weyl, "green": cmd_green, "heat": cmd_heat,
            "solve": cmd_solve, "verify": cmd_verify, "kernel-bounds": cmd_kernel_bounds}


def execute(cfg, command):
    run = Run(cfg, command)
    eig = make_eig(cfg)
    HANDLERS[command](run, eig)
    return run


def _sweep_one(payload):
    cfg_dict, check = payload
    cfg = ExperimentConfig(**cfg_dict).validate()
    run = execute(cfg, check)
    return run


def cmd_sweep(cfg, param, values, check, jobs=1):
    if param not in ("n", "s", "modes", "seed", "t_stop"):
        raise ConfigError(f"cannot sweep {param!r}")
    if check not in HANDLERS:
        raise ConfigError(f"unknown check {check!r}")
    caster = float if param in ("s", "t_stop") else int
    if isinstance(values, str):
        values = [v for v in values.split(",") if v.strip()]
    try:
        values = [caster(v) for v in values]
    except ValueError:
        raise ConfigError(f"bad value list {values!r}")
    if not values:
        raise ConfigError("sweep needs a non-empty value list")
    payloads = []
    for v in values:
        d = asdict(cfg)
        d[param] = v
        try:
            ExperimentConfig(**d).validate()
        except ConfigError as exc:
            raise ConfigError(f"{param}={v}: {exc}")
        payloads.append((d, check))
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            runs = list(pool.map(_sweep_one, payloads))
    else:
        runs = [_sweep_one(p) for p in payloads]
    agg = Run(cfg, "sweep")
    rows = []
    for v, r in zip(values, runs):
        for name, c in sorted(r.selected().items()):
            for key, val in sorted(c.items()):
                if isinstance(val, (int, float)) and not isinstance(val, bool):
                    rows.append((v, name, key, val))
            agg.checks[f"{param}={v}:{name}"] = c
        agg.truncation_tripped |= r.truncation_tripped
    agg.table("sweep", "sweep", param, [param, "result", "quantity", "value"], rows)
    return agg


def _finish(result, out):
    result.write(out)
    return result.exit_code()


def run(cfg, command, out):
    """Run one subcommand for a validated config, write artifacts to ``out``, return the exit code."""
    return _finish(execute(cfg.validate(), command), out)


def sweep(cfg, param, values, check, out, jobs=1):
    """Repeat ``check`` over values of one config field and write the aggregated table."""
    return _finish(cmd_sweep(cfg.validate(), param, values, check, jobs), out)


def parser():
    p = argparse.ArgumentParser(prog="fracheat", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--op", choices=[k.value for k in OperatorKind])
        sp.add_argument("--s", type=float)
        sp.add_argument("--dim", type=int, choices=(1, 2))
        sp.add_argument("--n", type=int)
        sp.add_argument("--modes", type=int)
        sp.add_argument("--config")
        sp.add_argument("--out", default="fracheat-out")
        sp.add_argument("--seed", type=int)
        if name == "verify":
            sp.add_argument("--suite", default=None)
        if name == "sweep":
            sp.add_argument("--param", default="n")
            sp.add_argument("--values", default="")
            sp.add_argument("--check", default="eig")
            sp.add_argument("--jobs", type=int, default=1)
    return p


def main(argv=None):
    args = parser().parse_args(argv)
    try:
        cfg = build_config(args)
        if args.command == "sweep":
            result = cmd_sweep(cfg, args.param, args.values, args.check, args.jobs)
        else:
            result = execute(cfg, args.command)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code = _finish(result, args.out)
    for name, c in sorted(result.selected().items()):
        tag = "PASS" if c["passed"] else ("INFO" if c["informational"] else "FAIL")
        print(f"{tag} {name}")
    return code


if __name__ == "__main__":
    sys.exit(main())
