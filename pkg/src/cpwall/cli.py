"""Command-line interface: ``cpwall {density,force,verify,modes,enclosed,torque}``.

Every option can also come from a flat ``key = value`` file given with
``--config`` (or ``$CPWALL_CONFIG``); keys are the long flag names with
dashes or underscores. Flags win over the file.

Exit codes: 0 success, 1 failed verification, 2 configuration error,
3 numerical non-convergence, 4 mode budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, fields
from functools import partial
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from . import closedform as cf
from . import modesum as ms
from . import quadpath as qp
from .specfun import ConvergenceError
from .units import ConfigError, PhysicalSetup, UnitSystem, load_constants, read_config
from .verify import run_verification

CONFIG_ENV = "CPWALL_CONFIG"

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_BUDGET = 0, 1, 2, 3, 4

DENSITY_METHODS = ("closed_form", "quadrature", "mode_sum")


def fmt(v: float) -> str:
    """12 significant digits, scientific notation."""
    return f"{float(v):.11e}"


def _parse_schedule(text: str) -> tuple[ms.ScheduleStep, ...]:
    steps = []
    for item in text.split(","):
        parts = item.strip().split(":")
        if len(parts) not in (3, 4):
            raise ConfigError(f"schedule entry {item!r} is not n_max:L1:Lz[:kc]")
        try:
            n = int(parts[0])
            vals = [float(p) for p in parts[1:]]
        except ValueError:
            raise ConfigError(f"schedule entry {item!r} is not numeric") from None
        steps.append(ms.ScheduleStep(n, vals[0], vals[1], vals[2] if len(vals) == 3 else None))
    if not steps:
        raise ConfigError("empty schedule")
    return tuple(steps)


def _schedule_text(schedule: Sequence[ms.ScheduleStep]) -> str:
    out = []
    for s in schedule:
        item = f"{s.n_max}:{s.L1_over_d:g}:{s.Lz_over_d:g}"
        if s.k_c_d is not None:
            item += f":{s.k_c_d:g}"
        out.append(item)
    return ",".join(out)


@dataclass(frozen=True)
class RunConfig:
    """Resolved options of one invocation (flags over config file over defaults)."""

    alpha: float | None = None
    distance: float | None = None
    units: str = "natural"
    rho_min: float = 0.0
    rho_max: float = 3.0
    steps: int = 31
    method: str = "closed_form"
    tol: float | None = None
    format: str = "csv"
    jobs: int = 1
    schedule: str = _schedule_text(ms.DEFAULT_SCHEDULE)
    max_modes: int = ms.MAX_MODES
    rho: float = 0.0
    region: str = "half_plane"
    r_inner: float = 0.0
    r_outer: float = 1.0
    offset: float = 0.0
    axis_angle: float = math.pi / 2
    quick: bool = False

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if not (0 <= self.rho_min <= self.rho_max) or not math.isfinite(self.rho_max):
            raise ConfigError("need 0 <= rho_min <= rho_max < inf")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.tol is not None and not self.tol > 0:
            raise ConfigError("tol must be > 0")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.max_modes < 1:
            raise ConfigError("max_modes must be >= 1")
        if self.rho < 0:
            raise ConfigError("rho must be >= 0")
        UnitSystem.parse(self.units)
        _parse_schedule(self.schedule)
        try:
            cf.RegionKind(self.region)
        except ValueError:
            raise ConfigError(f"unknown region {self.region!r}") from None

    @property
    def unit_system(self) -> UnitSystem:
        return UnitSystem.parse(self.units)

    def grid(self) -> np.ndarray:
        if self.steps == 1:
            return np.array([self.rho_min])
        return np.linspace(self.rho_min, self.rho_max, self.steps)

    def setup(self, required: bool = True) -> PhysicalSetup | None:
        if self.alpha is None or self.distance is None:
            if required:
                raise ConfigError("--alpha and --distance are required (no default atom)")
            return None
        return PhysicalSetup(self.alpha, self.distance, self.unit_system)

    def echo(self) -> dict[str, Any]:
        """Config keys that reproduce this run when fed back through ``--config``."""
        return {f.name: getattr(self, f.name) for f in fields(self) if getattr(self, f.name) is not None}


def _coerce(name: str, raw: str) -> Any:
    kinds = {f.name: f.type for f in fields(RunConfig)}
    kind = kinds[name]
    try:
        if "bool" in kind:
            low = raw.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if "int" in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return raw.strip()


def resolve_config(args: argparse.Namespace) -> RunConfig:
    path = args.config or os.environ.get(CONFIG_ENV) or None
    values: dict[str, Any] = {}
    keys = {f.name for f in fields(RunConfig)}
    if path is not None:
        try:
            raw = read_config(path, keys)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        values.update({k: _coerce(k, v) for k, v in raw.items()})
    for key in keys:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return RunConfig(**values)


@dataclass
class Table:
    columns: list[str]
    rows: list[list[Any]]
    meta: dict[str, Any]


def _cell(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def _json_value(v: Any) -> Any:
    if isinstance(v, bool):
        return v
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return float(fmt(f)) if math.isfinite(f) else str(f)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return v


def render(table: Table, command: str, config: RunConfig) -> str:
    meta = {"version": __version__, "command": command, **table.meta}
    if config.format == "json":
        payload = {
            "metadata": {**{k: _json_value(v) for k, v in meta.items()},
                         "config": config.echo()},
            "columns": table.columns,
            "rows": [[_json_value(v) for v in row] for row in table.rows],
        }
        return json.dumps(payload, indent=2, sort_keys=False) + "\n"
    lines = [f"# {k} = {_cell(v)}" for k, v in meta.items()]
    # config echo keeps full precision so it reproduces the run exactly
    lines.append("# config = " + json.dumps(config.echo()))
    lines.append(",".join(table.columns))
    lines.extend(",".join(_cell(v) for v in row) for row in table.rows)
    return "\n".join(lines) + "\n"


@contextmanager
def _mapper(jobs: int):
    if jobs <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield pool.map


def _quad_spec(config: RunConfig):
    return qp.CROSS_PATH_SPEC if config.tol is None else qp.CROSS_PATH_SPEC.replace(rel_tol=config.tol)


def _torque_spec(config: RunConfig):
    return cf.DEFAULT_SPEC if config.tol is None else cf.DEFAULT_SPEC.replace(rel_tol=config.tol)


def _quad_point(u: float, spec) -> qp.IntegralBreakdown:
    return qp.sigma_quad(u, spec)


def cmd_density(config: RunConfig, density: Callable) -> Table:
    setup = config.setup()
    constants = load_constants(_constants_path[0])
    grid = config.grid()
    si = setup.unit_system is UnitSystem.SI
    method = config.method
    if method not in DENSITY_METHODS:
        raise ConfigError(f"unknown method {method!r}")
    cols = ["u", "sigma_hat"] + (["sigma_physical"] if si else []) + ["method"]
    extra: list[list[float]] = [[] for _ in grid]
    if method == "closed_form":
        values = [float(density(u)) for u in grid]
    elif method == "quadrature":
        with _mapper(config.jobs) as mapper:
            parts = list(mapper(partial(_quad_point, spec=_quad_spec(config)), map(float, grid)))
        values = [p.total for p in parts]
        names = [k.value for k in qp.KernelId]
        cols += [f"contrib_{n}" for n in names] + [f"error_{n}" for n in names] + ["error_estimate"]
        extra = [[p.contributions[n] for n in names] + [p.errors[n] for n in names] + [p.error_estimate]
                 for p in parts]
    else:
        step = _parse_schedule(config.schedule)[-1]
        box = step.box(1.0)
        if float(grid[-1]) > box.L1 / 2:
            raise ConfigError(f"mode_sum needs rho_max <= L1/2 = {box.L1 / 2:g} d for the box "
                              f"of the last schedule step")
        values =[ms.sigma_modesum(float(u), 0.0, box, PhysicalSetup(1.0, 1.0), step.cutoff(1.0),
                                   max_modes=config.max_modes) for u in grid]
    profile = cf.RadialProfile(tuple(map(float, grid)), tuple(values), method)
    rows = []
    for u, v, ex in zip(profile.grid, profile.values, extra):
        row: list[Any] = [u, v]
        if si:
            row.append(v * cf.density_scale(setup, constants))
        rows.append(row + [method] + ex)
    return Table(cols, rows, {"units": setup.unit_system.value})


def cmd_force(config: RunConfig, density: Callable) -> Table:
    setup = config.setup()
    constants = load_constants(_constants_path[0])
    scale = cf.density_scale(setup, constants) * setup.d**2
    atom = cf.atom_force(setup, constants)
    wall = cf.wall_force(setup, constants)
    closed_int = cf.plate_integral(density)
    rows: list[list[Any]] = [
        ["atom_force", atom, 0.0],
        ["wall_force_closed_form", wall, 0.0],
        ["wall_force_integrated_closed_form", closed_int.value * scale, closed_int.error_estimate * scale],
    ]
    values = {"closed": wall, "integrated": closed_int.value * scale}
    if config.method != "closed_form":
        with _mapper(config.jobs) as mapper:
            quad = qp.integrated_force(spec=_quad_spec(config), mapper=mapper)
        rows.append(["wall_force_integrated_quadrature", quad.value * scale, quad.error_estimate * scale])
        values["quadrature"] = quad.value * scale
    rows.append(["atom_plus_wall", atom + wall, 0.0])
    names = list(values)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            rows.append([f"deviation_{a}_vs_{b}", abs(values[a] - values[b]) / abs(values[b]), 0.0])
    return Table(["quantity", "value", "error_estimate"], rows, {"units": setup.unit_system.value})


def cmd_verify(config: RunConfig, density: Callable) -> Table:
    report = run_verification(density, quick=config.quick)
    rows = [[c.name, c.expected, c.computed, c.tolerance, c.passed, c.detail] for c in report.checks]
    return Table(["check", "expected", "computed", "tolerance", "passed", "detail"], rows,
                 {"passed": report.passed, "checks": len(report.checks)})


MODES_COLUMNS = ["n_max", "L1_over_d", "Lz_over_d", "k_c_d", "modes", "sigma_modesum",
                 "deviation", "cutoff_reference", "reference_deviation"]


def cmd_modes(config: RunConfig, density: Callable, rows: list) -> Table:
    # rows is filled in place so a budget failure still leaves partial output
    schedule = _parse_schedule(config.schedule)
    for r in ms.convergence_study(schedule, u=config.rho, max_modes=config.max_modes):
        rows.append([r.n_max, r.L1_over_d, r.Lz_over_d, r.k_c_d, r.modes, r.sigma_hat,
                     r.deviation, r.reference, r.reference_deviation])
    return Table(MODES_COLUMNS, rows, {"u": config.rho})


def cmd_enclosed(config: RunConfig, density: Callable) -> Table:
    rows = [[R, cf.enclosed_force_fraction(float(R))] for R in config.grid()]
    return Table(["R_over_d", "fraction"], rows, {"half_force_radius": cf.half_force_radius()})


def cmd_torque(config: RunConfig, density: Callable) -> Table:
    kind = cf.RegionKind(config.region)
    region = {
        cf.RegionKind.FULL_PLANE: lambda: cf.PlateRegion.full_plane(),
        cf.RegionKind.DISK: lambda: cf.PlateRegion.disk(config.r_outer),
        cf.RegionKind.ANNULUS: lambda: cf.PlateRegion.annulus(config.r_inner, config.r_outer),
        cf.RegionKind.HALF_PLANE: lambda: cf.PlateRegion.half_plane(config.offset),
    }[kind]()
    report = cf.torque_about_axis(region, config.axis_angle, _torque_spec(config),
                                  config.setup(required=False), load_constants(_constants_path[0]),
                                  density=density)
    return Table(["region", "axis_angle", "torque", "error_estimate", "units"],
                 [[kind.value, config.axis_angle, report.value, report.error_estimate, report.units]], {})


COMMANDS = {
    "density": cmd_density,
    "force": cmd_force,
    "verify": cmd_verify,
    "modes": cmd_modes,
    "enclosed": cmd_enclosed,
    "torque": cmd_torque,
}

# set per invocation from --constants (a module global keeps command signatures uniform)
_constants_path: list[str | None] = [None]


def _mode_options(p: argparse.ArgumentParser, with_rho: bool) -> None:
    p.add_argument("--schedule", help="comma list of n_max:L1:Lz[:kc] in units of d"
                   + ("" if with_rho else "; mode_sum uses the last step"))
    p.add_argument("--max-modes", dest="max_modes", type=int, help="mode budget")
    if with_rho:
        p.add_argument("--rho", type=float, help="plate point distance from P in units of d")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--config", help=f"key = value config file (default ${CONFIG_ENV})")
    g.add_argument("--alpha", type=float, help="static polarizability volume (length^3)")
    g.add_argument("--distance", type=float, help="atom-wall distance d")
    g.add_argument("--units", choices=["natural", "SI"], help="unit system (default natural)")
    g.add_argument("--rho-min", dest="rho_min", type=float, help="grid start in units of d")
    g.add_argument("--rho-max", dest="rho_max", type=float, help="grid end in units of d")
    g.add_argument("--steps", type=int, help="number of grid points")
    g.add_argument("--method", help="closed_form | quadrature | mode_sum")
    g.add_argument("--tol", type=float, help="relative tolerance per quadrature level")
    g.add_argument("--format", choices=["csv", "json"])
    g.add_argument("--output", "-o", help="write to file instead of stdout")
    g.add_argument("--constants", help="key = value file with hbar_c and c")
    g.add_argument("--jobs", type=int, help="worker processes for grid evaluation")
    g.add_argument("--inject-coefficient", dest="inject_coefficient", type=float,
                   help=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="cpwall", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("density", parents=[common], help="radial force-density profile")
    _mode_options(p, with_rho=False)
    sub.add_parser("force", parents=[common], help="total atom and wall forces")
    p = sub.add_parser("verify", parents=[common], help="run the verification suite")
    p.add_argument("--quick", action="store_const", const=True, help="reduced cross-path set")
    p = sub.add_parser("modes", parents=[common], help="mode-sum convergence study")
    _mode_options(p, with_rho=True)
    sub.add_parser("enclosed", parents=[common], help="enclosed force fraction over radii")
    p = sub.add_parser("torque", parents=[common], help="torque about an in-plane axis through P")
    p.add_argument("--region", choices=[k.value for k in cf.RegionKind])
    p.add_argument("--r-inner", dest="r_inner", type=float)
    p.add_argument("--r-outer", dest="r_outer", type=float)
    p.add_argument("--offset", type=float, help="half-plane is x > offset")
    p.add_argument("--axis-angle", dest="axis_angle", type=float, help="axis direction, radians")
    return parser


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _constants_path[0] = args.constants
    density = cf.sigma_hat
    if args.inject_coefficient is not None:
        density = partial(cf.reduced_density, near=args.inject_coefficient)
    try:
        config = resolve_config(args)
        load_constants(args.constants)
    except (ConfigError, ValueError) as exc:
        print(f"cpwall: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    command = args.command
    partial_rows: list = []
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ms.CutoffUnderflowWarning)
            if command == "modes":
                table = cmd_modes(config, density, partial_rows)
            else:
                table = COMMANDS[command](config, density)
        for w in caught:
            print(f"cpwall: warning: {w.message}", file=sys.stderr)
    except ConfigError as exc:
        print(f"cpwall: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"cpwall: no convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ms.ModeBudgetExceeded as exc:
        table = Table(MODES_COLUMNS, partial_rows, {"u": config.rho, "error": str(exc)})
        _emit(render(table, command, config), args.output)
        print(f"cpwall: mode budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as exc:
        print(f"cpwall: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    _emit(render(table, command, config), args.output)
    if command == "verify" and not table.meta["passed"]:
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
