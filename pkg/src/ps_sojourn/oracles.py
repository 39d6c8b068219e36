"""Independent ground truth: a truncated ODE integrator and a Monte Carlo simulator.

The ODE oracle integrates the forward system

    p_n' = rho p_{n+1} - (1 + rho) p_n + n/(n+1) p_{n-1},   p_n(0) = 1/(n+1)

with classical RK4.  The survival functions S_n(t) = P(V > t | n) satisfy the
same system with S_n(0) = 1, which gives exact CDFs for goodness-of-fit tests.

The simulator follows the tagged customer through the embedded jump chain of
the queue-length process; exponential service makes remaining work irrelevant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ConvergenceError, DensityCurve, DomainError, Method, QueueParams

BLOCK_SIZE = 65_536
MAX_EVENTS = 10_000_000


@dataclass(frozen=True)
class OdeConfig:
    n_truncate: int | None = None
    dt_max: float = 0.01
    tolerance: float = 1e-10
    closure: str = "zero"

    def __post_init__(self) -> None:
        if self.closure not in ("zero", "copy"):
            raise DomainError(f"closure must be 'zero' or 'copy', got {self.closure!r}")
        if not self.dt_max > 0 or not self.tolerance > 0:
            raise DomainError("dt_max and tolerance must be positive")

    def truncation(self, n_max: int, t_end: float, rho: float) -> int:
        # p_n(t) only sees levels reached by Poisson(rho t) upward moves
        mean = rho * t_end
        auto = n_max + 40 + math.ceil(mean + 12.0 * math.sqrt(mean + 1.0))
        if self.n_truncate is None:
            return auto
        if self.n_truncate < n_max + 20:
            raise DomainError("n_truncate must exceed n_max by a safety margin of 20")
        return self.n_truncate


class _Stepper:
    """RK4 integrator of the truncated system, keeping its state between calls."""

    def __init__(self, params: QueueParams, size: int, initial: str, closure: str, shift: float = 0.0):
        self.rho = params.rho
        self.shift = shift
        self.closure = closure
        k = np.arange(size, dtype=float)
        self.down = k / (k + 1.0)
        self.t = 0.0
        self.y = 1.0 / (k + 1.0) if initial == "density" else np.ones(size)

    def _rhs(self, y: np.ndarray) -> np.ndarray:
        out = (self.shift - 1.0 - self.rho) * y
        out[:-1] += self.rho * y[1:]
        out[1:] += self.down[1:] * y[:-1]
        if self.closure == "copy":
            out[-1] += self.rho * y[-1]
        return out

    def advance(self, t_new: float, dt_max: float) -> None:
        span = t_new - self.t
        if span <= 0:
            return
        steps = math.ceil(span / dt_max - 1e-12)
        h = span / steps
        y = self.y
        f = self._rhs
        for _ in range(steps):
            k1 = f(y)
            k2 = f(y + 0.5 * h * k1)
            k3 = f(y + 0.5 * h * k2)
            k4 = f(y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        self.y = y
        self.t = t_new


def _check_dt(params: QueueParams, config: OdeConfig) -> None:
    if config.dt_max > 0.25 / (1.0 + params.rho):
        raise DomainError("dt_max must not exceed 0.25/(1+rho)")


def _integrate(params, n_max, t_sorted, size, config, initial, shift=0.0) -> np.ndarray:
    stepper = _Stepper(params, size, initial, config.closure, shift)
    out = np.empty((t_sorted.size, n_max + 1))
    for i, t in enumerate(t_sorted):
        stepper.advance(float(t), config.dt_max)
        out[i] = stepper.y[: n_max + 1]
    return out


def ode_table(
    params: QueueParams, n_max: int, t_grid, config: OdeConfig = OdeConfig(), initial: str = "density"
) -> np.ndarray:
    """Values for n = 0..n_max at every t of ``t_grid``; shape (len(t), n_max + 1).

    ``initial="survival"`` integrates S_n instead of p_n.  The truncation level
    is certified by a second run with twice as many equations; the check is
    absolute with ``config.tolerance``.
    """
    return _table(params, n_max, t_grid, config, initial, log_scale=False)


def ode_log_table(
    params: QueueParams, n_max: int, t_grid, config: OdeConfig = OdeConfig(), initial: str = "density"
) -> np.ndarray:
    """Natural log of :func:`ode_table`, computed without underflow at large t.

    The system is integrated for ``p_n(t) exp((1-sqrt rho)^2 t)`` and the
    doubling check is relative.
    """
    return _table(params, n_max, t_grid, config, initial, log_scale=True)


def _table(params, n_max, t_grid, config, initial, log_scale):
    params.require_stationary()
    if int(n_max) != n_max or n_max < 0:
        raise DomainError("n_max must be a nonnegative integer")
    if initial not in ("density", "survival"):
        raise DomainError(f"unknown initial condition {initial!r}")
    _check_dt(params, config)
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise DomainError("times must be finite and nonnegative")
    order = np.argsort(t, kind="stable")
    t_sorted = t[order]
    t_end = float(t_sorted[-1]) if t.size else 0.0
    size = config.truncation(int(n_max), t_end, params.rho) + 1
    shift = params.tail_rate if log_scale else 0.0
    base = _integrate(params, int(n_max), t_sorted, size, config, initial, shift)
    check = _integrate(params, int(n_max), t_sorted, 2 * size, config, initial, shift)
    diff = np.abs(base - check)
    if log_scale:
        diff = diff / np.maximum(np.abs(check), 1e-300)
    if np.max(diff, initial=0.0) > config.tolerance:
        raise ConvergenceError("ODE truncation level not certified by doubling")
    if log_scale:
        if np.any(check <= 0):
            raise ConvergenceError("nonpositive value on the log scale")
        check = np.log(check) - shift * t_sorted[:, None]
    out = np.empty_like(check)
    out[order] = check
    return out


def ode_density(params: QueueParams, n_max: int, t_grid, config: OdeConfig = OdeConfig()) -> list[DensityCurve]:
    """Curves p_0 .. p_{n_max} on ``t_grid`` from one integration of the truncated system."""
    t = np.asarray(t_grid, dtype=float)
    table = ode_table(params, n_max, t, config)
    table = np.where((table < 0) & (table > -config.tolerance), 0.0, table)
    return [DensityCurve(n, t, table[:, n], Method.ODE) for n in range(n_max + 1)]


def survival(params: QueueParams, n: int, t_grid, config: OdeConfig = OdeConfig()) -> np.ndarray:
    """P(V > t | N = n) on ``t_grid``."""
    return ode_table(params, n, t_grid, config, initial="survival")[:, n]


def moment(params: QueueParams, n: int, k: int, config: OdeConfig = OdeConfig()) -> float:
    """``int_0^inf t^k p_n(t) dt`` for k in {1, 2}.

    Uses ``E[V^k] = k int t^(k-1) S_n(t) dt`` on a Simpson grid out to a horizon
    where S_n is below 1e-13, then adds the tail of ``S_n(T) exp(-a (t - T))``
    with a = (1 - sqrt(rho))**2.
    """
    params.require_stationary()
    if k not in (1, 2):
        raise DomainError("only k = 1 and k = 2 are supported")
    if int(n) != n or n < 0:
        raise DomainError("n must be a nonnegative integer")
    rate = params.tail_rate
    horizon = 20.0 * (n + 1) / (1.0 - params.rho)
    for _ in range(8):
        h = min(config.dt_max, 0.05)
        m = 2 * math.ceil(horizon / (2 * h))
        grid = np.linspace(0.0, horizon, m + 1)
        s = survival(params, n, grid, OdeConfig(config.n_truncate, config.dt_max, 1e-9, config.closure))
        if s[-1] < 1e-13:
            break
        horizon *= 2.0
    else:
        raise ConvergenceError("survival function did not decay within the horizon")
    integrand = k * grid ** (k - 1) * s
    w = np.full(grid.size, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    body = float(np.dot(w, integrand)) * (grid[1] - grid[0]) / 3.0
    big_t, s_t = grid[-1], s[-1]
    tail = s_t / rate if k == 1 else 2.0 * s_t * (big_t / rate + 1.0 / rate**2)
    return body + tail


@dataclass(frozen=True)
class SimEstimate:
    samples: int
    seed: int
    mean: float
    stderr: float
    bin_edges: np.ndarray
    masses: np.ndarray
    times: np.ndarray = field(repr=False, compare=False)
    others: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if abs(float(np.sum(self.masses)) - 1.0) > 1e-12:
            raise DomainError("histogram masses must sum to 1")

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "seed": self.seed,
            "mean": self.mean,
            "stderr": self.stderr,
            "bin_edges": self.bin_edges.tolist(),
            "masses": self.masses.tolist(),
        }


def _simulate_block(rho: float, k0: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    k = k0.astype(np.int64).copy()
    times = np.zeros(k.size)
    active = np.arange(k.size)
    p_arrival = rho / (1.0 + rho)
    events = 0
    while active.size:
        events += 1
        if events > MAX_EVENTS:
            raise ConvergenceError("a sample path exceeded the event cap")
        times[active] += rng.exponential(1.0 / (1.0 + rho), active.size)
        u = rng.random(active.size)
        arrival = u < p_arrival
        # conditional on a departure, (u - p)/(1 - p) is uniform on [0, 1)
        w = (u - p_arrival) / (1.0 - p_arrival)
        ka = k[active]
        tagged = ~arrival & (w * ka < 1.0)
        k[active] = ka + np.where(arrival, 1, np.where(tagged, 0, -1))
        active = active[~tagged]
    return times


def _run(params: QueueParams, others: np.ndarray, seed: int, block_rngs) -> np.ndarray:
    out = np.empty(others.size)
    for b, rng in enumerate(block_rngs):
        sl = slice(b * BLOCK_SIZE, min((b + 1) * BLOCK_SIZE, others.size))
        out[sl] = _simulate_block(params.rho, others[sl] + 1, rng)
    return out


def _block_generators(seed: int, blocks: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(blocks + 1)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def _estimate(times: np.ndarray, samples: int, seed: int, bins: int, others=None) -> SimEstimate:
    edges = np.linspace(0.0, float(times.max()) * (1 + 1e-12), bins + 1)
    counts, _ = np.histogram(times, edges)
    masses = counts / counts.sum()
    stderr = float(times.std(ddof=1) / math.sqrt(samples)) if samples > 1 else float("nan")
    return SimEstimate(samples, seed, float(times.mean()), stderr, edges, masses, times, others)


def _check_sim_args(params: QueueParams, samples: int) -> None:
    if params.rho >= 1.0:
        raise DomainError("simulation needs rho < 1")
    if int(samples) != samples or samples < 1:
        raise DomainError("samples must be a positive integer")


def simulate_sojourn(params: QueueParams, n: int, samples: int, seed: int, bins: int = 100) -> SimEstimate:
    """Sojourn times of a tagged customer arriving to find ``n`` others.

    Random numbers come from Philox generators; block b (of 65536 samples)
    uses child b of ``SeedSequence(seed).spawn``, so results depend only on
    (seed, samples).
    """
    _check_sim_args(params, samples)
    if int(n) != n or n < 0:
        raise DomainError("n must be a nonnegative integer")
    blocks = math.ceil(samples / BLOCK_SIZE)
    rngs = _block_generators(seed, blocks)[1:]
    times = _run(params, np.full(samples, int(n)), seed, rngs)
    return _estimate(times, samples, seed, bins)


def simulate_unconditional(params: QueueParams, samples: int, seed: int, bins: int = 100) -> SimEstimate:
    """Sojourn times with N drawn from the stationary law P(N = n) = (1 - rho) rho^n."""
    _check_sim_args(params, samples)
    blocks = math.ceil(samples / BLOCK_SIZE)
    rngs = _block_generators(seed, blocks)
    others = rngs[0].geometric(1.0 - params.rho, samples) - 1
    times = _run(params, others, seed, rngs[1:])
    return _estimate(times, samples, seed, bins, others)


def _simpson(values: np.ndarray, h: float) -> float:
    w = np.full(values.size, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return float(np.dot(w, values)) * h / 3.0


def laplace_transform(params: QueueParams, n: int, theta: float, config: OdeConfig = OdeConfig()) -> float:
    """``int_0^inf exp(-theta t) p_n(t) dt`` by Simpson quadrature of the ODE solution.

    Since p_n <= 1 the integral beyond T is below exp(-theta T)/theta; T is
    chosen so that this bound is 1e-11.
    """
    params.require_stationary()
    if not theta > 0:
        raise DomainError("theta must be positive")
    horizon = math.log(1e11 / theta) / theta
    h = min(config.dt_max, 0.01)
    m = 2 * math.ceil(horizon / (2 * h))
    grid = np.linspace(0.0, horizon, m + 1)
    p = ode_table(params, n, grid, config)[:, n]
    return _simpson(np.exp(-theta * grid) * p, grid[1] - grid[0])
