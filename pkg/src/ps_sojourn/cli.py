"""Command-line interface: density, compare, regions, simulate, transform-check.

Exit codes: 0 success, 2 domain error, 3 convergence or bracketing failure.
"""

from __future__ import annotations

import argparse
import io
import itertools
import json
import math
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import asymptotics as asy
from . import heavytraffic as ht
from .core import BracketError, ConvergenceError, DomainError, QueueParams, parse_range
from .exact import pollaczek_table, unconditional_density
from .oracles import OdeConfig, laplace_transform, ode_table, simulate_sojourn, simulate_unconditional
from .transform import phat, phat_recurrence_residual

COMMANDS = ("density", "compare", "regions", "simulate", "transform-check")
RHO_METHODS = ("case1", "case2", "case3", "case4", "case5", "asymptotic")
HT_METHODS = ("ht-case1", "ht-case2", "ht-case3", "ht-case4", "ht-asymptotic")
METHODS = ("exact", "ode") + RHO_METHODS + HT_METHODS


@dataclass
class RunConfig:
    """Everything a run depends on; echoed into every output file."""

    command: str
    rho: float | None = None
    epsilon: float | None = None
    n: str = "0"
    t: str = "1"
    methods: list = field(default_factory=lambda: ["exact"])
    format: str = "csv"
    output: str | None = None
    figure: str | None = None
    seed: int = 0
    samples: int = 10_000
    bins: int = 100
    unconditional: bool = False
    heavy_traffic: bool = False
    rays: int = 12
    t_max: float = 1.0
    sigma_max: float = 10.0
    theta: str = "0.5,1,2"
    tol: float = 1e-8

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise DomainError(f"unknown command {self.command!r}")
        if (self.rho is None) == (self.epsilon is None):
            raise DomainError("give exactly one of --rho and --epsilon")
        if self.format not in ("csv", "json"):
            raise DomainError("format must be csv or json")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise DomainError(f"unknown method(s) {unknown}")
        if self.epsilon is not None and not 0.0 < self.epsilon < 1.0:
            raise DomainError("epsilon must lie in (0, 1)")
        self.params

    @property
    def params(self) -> QueueParams:
        rho = self.rho if self.rho is not None else 1.0 - self.epsilon
        return QueueParams(rho)

    @property
    def eps(self) -> float:
        return self.epsilon if self.epsilon is not None else 1.0 - self.rho

    @property
    def uses_ht(self) -> bool:
        return self.epsilon is not None or self.heavy_traffic


# ---------------------------------------------------------------- evaluation

def _pointwise(fn, n_arr, t_arr, strict: bool) -> np.ndarray:
    out = np.full((t_arr.size, n_arr.size), np.nan)
    for (i, t), (j, n) in itertools.product(enumerate(t_arr), enumerate(n_arr)):
        try:
            out[i, j] = fn(int(n), float(t))
        except DomainError:
            if strict:
                raise
    return out


def _ht_scalar(method: str, eps: float):
    if method == "ht-case1":
        return lambda n, t: ht.ht_case1_density(n, t)
    if method == "ht-case2":
        return lambda n, t: ht.ht_case2_density(eps, n, eps**3 * t)
    if method == "ht-case3":
        return lambda n, t: ht.ht_case3_density(eps, eps * n, eps * t)
    if method == "ht-case4":
        return lambda n, t: ht.ht_case4_density(eps, eps**2 * n, eps**3 * t)
    return lambda n, t: ht.ht_asymptotic_density(eps, n, t)


def evaluate(cfg: RunConfig, method: str, n_arr, t_arr, strict: bool = True) -> np.ndarray:
    """Values of p_n(t) with shape (len(t), len(n))."""
    n_arr = np.asarray(n_arr, dtype=int)
    t_arr = np.asarray(t_arr, dtype=float)
    if np.any(n_arr < 0) or np.any(t_arr < 0):
        raise DomainError("n and t must be nonnegative")
    if method == "exact":
        return pollaczek_table(cfg.params, t_arr, int(n_arr.max()))[:, n_arr]
    if method == "ode":
        order = np.argsort(t_arr)
        table = ode_table(cfg.params, int(n_arr.max()), t_arr[order], OdeConfig(tolerance=cfg.tol))
        out = np.empty((t_arr.size, n_arr.size))
        out[order] = table[:, n_arr]
        return out
    if method in HT_METHODS:
        return _pointwise(_ht_scalar(method, cfg.eps), n_arr, t_arr, strict)
    params = cfg.params
    fn = {
        "case1": asy.case1_density,
        "case2": lambda p, n, t: asy.case2_density(p, n, t, max_delta=math.inf),
        "case3": asy.case3_density,
        "case4": asy.case4_density,
        "case5": asy.case5_density,
        "asymptotic": asy.asymptotic_density,
    }[method]
    return _pointwise(lambda n, t: fn(params, n, t), n_arr, t_arr, strict)


def regime_label(cfg: RunConfig, n: int, t: float) -> str:
    if t <= 0:
        return "initial"
    try:
        if cfg.uses_ht:
            return str(ht.ht_regime_classify(cfg.eps, n, t))
        return str(asy.regime_classify(cfg.params, n, t))
    except DomainError:
        return "none"


# ---------------------------------------------------------------- output

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _json_float(x):
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def _config_dict(cfg: RunConfig) -> dict:
    # output paths are left out so identical runs give identical files
    skip = ("output", "figure")
    return {k: v for k, v in asdict(cfg).items() if v is not None and k not in skip}


def write_table(cfg: RunConfig, header: list[str], rows: list[tuple], extra=None) -> str:
    """Render rows as CSV with ``#`` config echo lines, or as a JSON object."""
    if cfg.format == "json":
        results = [{k: _json_float(v) for k, v in zip(header, row)} for row in rows]
        doc = {"config": _config_dict(cfg), "results": results}
        if extra:
            doc.update(extra)
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    for k, v in _config_dict(cfg).items():
        buf.write(f"# {k}={','.join(map(str, v)) if isinstance(v, list) else _fmt(v)}\n")
    for k, v in (extra or {}).items():
        buf.write(f"# {k}={_fmt(v)}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(x) for x in row) + "\n")
    return buf.getvalue()


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.output:
        with open(cfg.output, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands

def _grids(cfg: RunConfig):
    return parse_range(cfg.n, integer=True), parse_range(cfg.t)


def cmd_density(cfg: RunConfig) -> int:
    n_arr, t_arr = _grids(cfg)
    rows = []
    for method in cfg.methods:
        values = evaluate(cfg, method, n_arr, t_arr)
        for (j, n), (i, t) in itertools.product(enumerate(n_arr), enumerate(t_arr)):
            rows.append((int(n), float(t), float(values[i, j]), method))
    _emit(cfg, write_table(cfg, ["n", "t", "value", "method"], rows))
    if cfg.figure:
        from .plotting import plot_density_rows

        plot_density_rows(rows, cfg.figure)
    return 0


def cmd_compare(cfg: RunConfig) -> int:
    if len(cfg.methods) < 2:
        raise DomainError("compare needs at least two methods")
    n_arr, t_arr = _grids(cfg)
    values = {m: evaluate(cfg, m, n_arr, t_arr, strict=False) for m in cfg.methods}
    pairs = list(itertools.combinations(cfg.methods, 2))
    header = ["n", "t"] + list(cfg.methods)
    for a, b in pairs:
        header += [f"abs_diff_{a}_{b}", f"rel_diff_{a}_{b}"]
    header += ["max_abs_diff", "regime"]
    rows = []
    for (j, n), (i, t) in itertools.product(enumerate(n_arr), enumerate(t_arr)):
        vals = [float(values[m][i, j]) for m in cfg.methods]
        row = [int(n), float(t)] + vals
        diffs = []
        for a, b in pairs:
            va, vb = float(values[a][i, j]), float(values[b][i, j])
            d = abs(va - vb)
            diffs.append(d)
            row += [d, d / abs(vb) if vb != 0 else math.nan]
        row += [max(diffs) if not any(map(math.isnan, diffs)) else math.nan, regime_label(cfg, int(n), float(t))]
        rows.append(tuple(row))
    _emit(cfg, write_table(cfg, header, rows))
    if cfg.figure:
        from .plotting import plot_density_rows

        flat = [(r[0], r[1], r[2 + k], m) for r in rows for k, m in enumerate(cfg.methods)]
        plot_density_rows(flat, cfg.figure)
    return 0


def cmd_regions(cfg: RunConfig) -> int:
    polylines = {}
    if cfg.uses_ht:
        rays, curves = ht.trace_ht_rays(cfg.rays, sigma_max=cfg.sigma_max)
        for k, ray in enumerate(rays):
            polylines[f"ray{k}"] = (ray.eta, ray.sigma)
        xlabel, ylabel = "eta", "sigma"
    else:
        fan = asy.trace_rays(cfg.params, cfg.rays, t_max=cfg.t_max)
        curves = fan.curves
        for k, ray in enumerate(fan.rays):
            polylines[f"ray{k}"] = (ray.y, ray.t)
        xlabel, ylabel = "Y", "T"
    polylines = {**curves, **polylines}
    rows = [(key, float(x), float(y)) for key, (xs, ys) in polylines.items() for x, y in zip(xs, ys)]
    extra = {}
    if not cfg.uses_ht:
        extra = {"a_upper": asy.a_upper(cfg.params), "a_lower": asy.a_lower(cfg.params)}
    _emit(cfg, write_table(cfg, ["curve_id", "x", "y"], rows, extra))
    if cfg.figure:
        from .plotting import plot_polylines

        plot_polylines(polylines, cfg.figure, xlabel, ylabel)
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    params = cfg.params
    n = int(parse_range(cfg.n, integer=True)[0])
    if cfg.unconditional:
        est = simulate_unconditional(params, cfg.samples, cfg.seed, cfg.bins)
    else:
        est = simulate_sojourn(params, n, cfg.samples, cfg.seed, cfg.bins)
    if cfg.format == "json":
        text = json.dumps({"config": _config_dict(cfg), "results": est.to_dict()}, indent=1) + "\n"
    else:
        edges = est.bin_edges
        rows = [(float(edges[k]), float(edges[k + 1]), float(m)) for k, m in enumerate(est.masses)]
        meta = {"samples": est.samples, "seed": est.seed, "mean": est.mean, "stderr": est.stderr}
        text = write_table(cfg, ["bin_left", "bin_right", "mass"], rows, meta)
    _emit(cfg, text)
    if cfg.figure:
        from .plotting import plot_histogram

        centers = 0.5 * (est.bin_edges[1:] + est.bin_edges[:-1])
        if cfg.unconditional:
            ref = unconditional_density(params, centers)
        else:
            ref = ode_table(params, n, centers, OdeConfig(tolerance=cfg.tol))[:, n]
        plot_histogram(est.bin_edges, est.masses, cfg.figure, reference=(centers, ref))
    return 0


def cmd_transform_check(cfg: RunConfig) -> int:
    params = cfg.params
    n_arr = parse_range(cfg.n, integer=True)
    thetas = parse_range(cfg.theta)
    rows = []
    for theta, n in itertools.product(thetas, n_arr):
        closed = phat(params, float(theta), int(n))
        numeric = laplace_transform(params, int(n), float(theta), OdeConfig(tolerance=cfg.tol))
        d = abs(closed - numeric)
        res = phat_recurrence_residual(params, float(theta), int(n)) if n >= 1 else math.nan
        rows.append((int(n), float(theta), closed, numeric, d, d / abs(numeric), res))
    header = ["n", "theta", "phat", "ode_laplace", "abs_diff", "rel_diff", "recurrence_residual"]
    _emit(cfg, write_table(cfg, header, rows))
    return 0


HANDLERS = {
    "density": cmd_density,
    "compare": cmd_compare,
    "regions": cmd_regions,
    "simulate": cmd_simulate,
    "transform-check": cmd_transform_check,
}


# ---------------------------------------------------------------- parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ps-sojourn", description="M/M/1 processor-sharing sojourn-time densities")
    parser.add_argument("--config", help="JSON file with option defaults")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        load = p.add_mutually_exclusive_group()
        load.add_argument("--rho", type=float)
        load.add_argument("--epsilon", type=float)
        p.add_argument("--n", default=argparse.SUPPRESS, help="n, n1,n2,... or start:stop:step")
        p.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS)
        p.add_argument("--output", "-o", default=argparse.SUPPRESS)
        p.add_argument("--tol", type=float, default=argparse.SUPPRESS, help="ODE oracle tolerance")
        if name in ("density", "compare"):
            p.add_argument("--t", default=argparse.SUPPRESS, help="t, t1,t2,... or start:stop:step")
            p.add_argument("--heavy-traffic", action="store_true", default=argparse.SUPPRESS)
        if name == "density":
            p.add_argument("--method", "--methods", dest="methods", default=argparse.SUPPRESS,
                           help=f"comma-separated subset of {','.join(METHODS)}")
        if name == "compare":
            p.add_argument("--methods", "--method", dest="methods", default=argparse.SUPPRESS)
        if name in ("density", "compare", "regions", "simulate"):
            p.add_argument("--figure", default=argparse.SUPPRESS, help="also render a PNG/PDF figure")
        if name == "regions":
            p.add_argument("--rays", type=int, default=argparse.SUPPRESS)
            p.add_argument("--t-max", type=float, default=argparse.SUPPRESS)
            p.add_argument("--sigma-max", type=float, default=argparse.SUPPRESS)
            p.add_argument("--heavy-traffic", action="store_true", default=argparse.SUPPRESS)
        if name == "simulate":
            p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
            p.add_argument("--samples", type=int, default=argparse.SUPPRESS)
            p.add_argument("--bins", type=int, default=argparse.SUPPRESS)
            p.add_argument("--unconditional", action="store_true", default=argparse.SUPPRESS)
        if name == "transform-check":
            p.add_argument("--theta", default=argparse.SUPPRESS)
    return parser


def make_config(argv=None) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    values = {}
    path = ns.pop("config", None)
    if path:
        with open(path) as fh:
            values.update(json.load(fh))
    values.update({k: v for k, v in ns.items() if v is not None})
    if "rho" in ns and ns["rho"] is not None:
        values.pop("epsilon", None)
    if "epsilon" in ns and ns["epsilon"] is not None:
        values.pop("rho", None)
    values["command"] = ns["command"]
    if isinstance(values.get("methods"), str):
        values["methods"] = [m.strip() for m in values["methods"].split(",") if m.strip()]
    if "methods" not in values and values["command"] == "compare":
        values["methods"] = ["exact", "ode"]
    values.setdefault("format", "json" if values["command"] == "simulate" else "csv")
    for key in ("n", "t", "theta"):
        if key in values and not isinstance(values[key], str):
            values[key] = str(values[key])
    known = set(RunConfig.__dataclass_fields__)
    extra = set(values) - known
    if extra:
        raise DomainError(f"unknown config keys {sorted(extra)}")
    return RunConfig(**values)


def main(argv=None) -> int:
    try:
        cfg = make_config(argv)
        return HANDLERS[cfg.command](cfg)
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, BracketError) as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
