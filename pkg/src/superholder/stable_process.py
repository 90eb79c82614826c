"""Spectrally positive stable process of index ``kappa`` in (1, 2).

The target law has Laplace transform ``E exp(-lam L_t) = exp(t lam**kappa)``,
equivalently Levy measure ``c_kappa r**(-1-kappa) dr`` on ``(0, inf)`` with
``c_kappa = kappa (kappa-1) / Gamma(2-kappa)`` and zero mean.

Sampling keeps jumps above a truncation level ``eps`` exactly (compound
Poisson, Pareto sizes ``eps * U**(-1/kappa)``), compensates them by the drift
``-c_kappa eps**(1-kappa) / (kappa-1)`` and replaces the jumps below ``eps``
by a Brownian component with variance rate ``c_kappa eps**(2-kappa) / (2-kappa)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np
from scipy.stats import beta as beta_dist

from .errors import InputError
from .parallel import map_ordered
from .seeding import replicate_rng

MODULE_ID = "stable_process"


def levy_constant(kappa: float) -> float:
    return kappa * (kappa - 1.0) / math.gamma(2.0 - kappa)


@dataclass(frozen=True)
class Truncation:
    """Rates of the truncated approximation at level ``eps``."""

    kappa: float
    eps: float

    @property
    def jump_rate(self) -> float:
        return levy_constant(self.kappa) * self.eps ** (-self.kappa) / self.kappa

    @property
    def drift(self) -> float:
        return -levy_constant(self.kappa) * self.eps ** (1.0 - self.kappa) / (self.kappa - 1.0)

    @property
    def small_jump_variance(self) -> float:
        return levy_constant(self.kappa) * self.eps ** (2.0 - self.kappa) / (2.0 - self.kappa)


def _check_kappa(kappa: float) -> None:
    if not (math.isfinite(kappa) and 1.0 < kappa < 2.0):
        raise InputError("kappa must be in (1,2)")


def _grid(horizon: float, mesh: float) -> tuple[int, float]:
    if not (horizon > 0.0 and math.isfinite(horizon)):
        raise InputError("horizon must be > 0")
    if not mesh > 0.0:
        raise InputError("mesh must be > 0")
    n_steps = max(1, int(round(horizon / mesh)))
    return n_steps, horizon / n_steps


def _check_resolution(kappa, horizon, truncation, n_steps):
    if not truncation > 0.0:
        raise InputError("truncation must be > 0")
    if horizon >= 1.0:
        expected = Truncation(kappa, truncation).jump_rate * horizon
        if expected < 10.0:
            raise InputError(f"truncation too coarse: {expected:.3g} expected jumps (< 10)")
        if n_steps < 100:
            raise InputError(f"mesh too coarse: {n_steps} grid steps (< 100)")


@dataclass
class SpectrallyPositivePath:
    """Path skeleton: values at the union of grid times and jump times.

    ``values[i]`` is the (right-continuous) value at ``times[i]``; the jump
    list holds every jump larger than ``truncation``.
    """

    kappa: float
    horizon: float
    truncation: float
    times: np.ndarray
    values: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray

    @property
    def jumps(self) -> list[tuple[float, float]]:
        return list(zip(self.jump_times.tolist(), self.jump_sizes.tolist()))

    def value_at(self, t: float) -> float:
        if not 0.0 <= t <= self.horizon * (1 + 1e-12):
            raise InputError("t outside [0, horizon]")
        return float(self.values[np.searchsorted(self.times, t, side="right") - 1])

    def to_csv_rows(self):
        return zip(self.times.tolist(), self.values.tolist())


def sample_path(
    kappa: float, horizon: float, truncation: float, mesh: float, rng_seed: int
) -> SpectrallyPositivePath:
    """One path of the truncated approximation with its large-jump list."""
    _check_kappa(kappa)
    n_steps, h = _grid(horizon, mesh)
    _check_resolution(kappa, horizon, truncation, n_steps)
    tr = Truncation(kappa, truncation)
    rng = replicate_rng(rng_seed, MODULE_ID + ".path", 0)
    n_jumps = rng.poisson(tr.jump_rate * horizon)
    jt = np.sort(rng.uniform(0.0, horizon, n_jumps))
    js = truncation * rng.random(n_jumps) ** (-1.0 / kappa)
    grid = np.linspace(0.0, horizon, n_steps + 1)
    times = np.concatenate([grid, jt])
    jump_part = np.concatenate([np.zeros(grid.size), js])
    order = np.argsort(times, kind="stable")
    times, jump_part = times[order], jump_part[order]
    dt = np.diff(times)
    cont = tr.drift * dt + math.sqrt(tr.small_jump_variance) * np.sqrt(dt) * rng.standard_normal(dt.size)
    values = np.concatenate([[0.0], np.cumsum(cont + jump_part[1:])])
    return SpectrallyPositivePath(kappa, horizon, truncation, times, values, jt, js)


@numba.njit(nogil=True, cache=True, fastmath=True)
def _grid_path(rng, n_steps, cell_rate, eps, inv_kappa, drift_step, sd_step, values):
    values[0] = 0.0
    for k in range(n_steps):
        n = rng.poisson(cell_rate)
        s = 0.0
        for _ in range(n):
            s += math.exp(rng.standard_exponential() * inv_kappa)
        values[k + 1] = values[k] + eps * s + drift_step + sd_step * rng.standard_normal()


@numba.njit(nogil=True, cache=True, fastmath=True)
def _sparse_path(rng, cols, cell_rate, eps, inv_kappa, drift_step, sd_step, out):
    # a block of m cells aggregates exactly: Poisson(m rate) jumps, N(m drift, m var)
    prev = 0
    x = 0.0
    for j in range(cols.size):
        m = cols[j] - prev
        if m > 0:
            n = rng.poisson(cell_rate * m)
            s = 0.0
            for _ in range(n):
                s += math.exp(rng.standard_exponential() * inv_kappa)
            x += eps * s + drift_step * m + sd_step * math.sqrt(m) * rng.standard_normal()
        out[j] = x
        prev = cols[j]


@numba.njit(nogil=True, cache=True, fastmath=True)
def _grid_path_max(rng, n_steps, cell_rate, eps, inv_kappa, drift_step, sd_step, values, max_jump):
    values[0] = 0.0
    for k in range(n_steps):
        n = rng.poisson(cell_rate)
        s = 0.0
        m = 1.0
        for _ in range(n):
            r = math.exp(rng.standard_exponential() * inv_kappa)
            s += r
            m = max(m, r)
        max_jump[k] = eps * m if n > 0 else 0.0
        values[k + 1] = values[k] + eps * s + drift_step + sd_step * rng.standard_normal()


@dataclass
class PathEnsemble:
    """Many independent paths recorded on a common grid.

    ``values[i, j]`` is path ``i`` at ``times[j]``; ``max_jump[i, k]`` (when
    kept) is the largest recorded jump of path ``i`` in grid cell ``k``.
    """

    kappa: float
    horizon: float
    truncation: float
    mesh: float
    times: np.ndarray
    values: np.ndarray
    max_jump: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return self.values.shape[0]

    def column(self, t: float) -> np.ndarray:
        if not -1e-12 <= t <= self.horizon * (1 + 1e-12):
            raise InputError("t outside [0, horizon]")
        j = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[j] - t) > 1e-9 * max(1.0, self.horizon):
            raise InputError(f"t={t} is not a recorded time")
        return self.values[:, j]


def sample_ensemble(
    kappa: float,
    horizon: float,
    truncation: float,
    mesh: float,
    n_paths: int,
    rng_seed: int,
    record_times: Sequence[float] | None = None,
    keep_max_jump: bool = False,
    workers: int | None = None,
) -> PathEnsemble:
    """Independent grid paths; path ``i`` uses the stream ``hash64(seed, module, i)``.

    ``record_times=None`` keeps the full grid; otherwise only the listed grid
    times (rounded to the mesh) are stored.  When those are sparse the cells
    between them are drawn in aggregate, which has the same law as the grid
    path at the stored times.
    """
    _check_kappa(kappa)
    n_steps, h = _grid(horizon, mesh)
    _check_resolution(kappa, horizon, truncation, n_steps)
    if n_paths < 1:
        raise InputError("n_paths must be >= 1")
    tr = Truncation(kappa, truncation)
    grid = np.linspace(0.0, horizon, n_steps + 1)
    if record_times is None:
        cols = np.arange(n_steps + 1)
    else:
        cols = np.unique(np.clip(np.rint(np.asarray(record_times) / h).astype(int), 0, n_steps))
    values = np.empty((n_paths, cols.size))
    max_jump = np.empty((n_paths, n_steps)) if keep_max_jump else None
    args = (n_steps, tr.jump_rate * h, truncation, 1.0 / kappa, tr.drift * h,
            math.sqrt(tr.small_jump_variance * h))

    sparse = not keep_max_jump and cols.size < (n_steps + 1) // 4

    def one(i):
        rng = replicate_rng(rng_seed, MODULE_ID, i)
        if sparse:
            _sparse_path(rng, cols, *args[1:], values[i])
            return
        path = np.empty(n_steps + 1)
        if keep_max_jump:
            _grid_path_max(rng, *args, path, max_jump[i])
        else:
            _grid_path(rng, *args, path)
        values[i] = path[cols]

    map_ordered(one, range(n_paths), workers)
    return PathEnsemble(kappa, horizon, truncation, h, grid[cols], values, max_jump)


@dataclass(frozen=True)
class StatReport:
    statistic: str
    estimate: float
    std_err: float
    target: float | None = None
    n: int = 0

    def within(self, n_se: float = 3.0) -> bool:
        return abs(self.estimate - self.target) <= n_se * self.std_err

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "estimate": self.estimate,
                "std_err": self.std_err, "target": self.target, "n": self.n}


def _values_at(paths, t: float) -> tuple[float, float, np.ndarray]:
    if isinstance(paths, PathEnsemble):
        if len(paths) == 0:
            raise InputError("empty path collection")
        return paths.kappa, paths.horizon, paths.column(t)
    paths = list(paths)
    if not paths:
        raise InputError("empty path collection")
    kappas = {p.kappa for p in paths}
    horizons = {p.horizon for p in paths}
    if len(kappas) != 1 or len(horizons) != 1:
        raise InputError("paths must share kappa and horizon")
    return paths[0].kappa, paths[0].horizon, np.array([p.value_at(t) for p in paths])


def empirical_laplace(paths, lam: float, t: float, min_paths: int = 100) -> StatReport:
    """Sample mean and standard error of ``exp(-lam L_t)``; target ``exp(t lam**kappa)``."""
    if lam < 0.0:
        raise InputError("lambda must be >= 0")
    kappa, _, vals = _values_at(paths, t)
    if vals.size < min_paths:
        raise InputError(f"need at least {min_paths} paths, got {vals.size}")
    w = np.exp(-lam * vals)
    se = float(np.std(w, ddof=1) / math.sqrt(w.size)) if lam > 0 else 0.0
    return StatReport(f"laplace(kappa={kappa:g},lambda={lam:g},t={t:g})",
                      float(np.mean(w)), se, math.exp(t * lam**kappa), int(w.size))


@dataclass(frozen=True)
class MartingaleReport:
    t_grid: np.ndarray
    residuals: np.ndarray
    std_errs: np.ndarray
    max_abs_residual: float

    def within(self, n_se: float = 3.0) -> bool:
        return bool(np.all(np.abs(self.residuals) <= n_se * self.std_errs))


def martingale_residual(paths, lam: float, t_grid: Sequence[float]) -> MartingaleReport:
    """Residual ``mean[exp(-lam L_t) - lam**kappa int_0^t exp(-lam L_s) ds] - 1`` per ``t``.

    The time integral is the trapezoid rule on the recorded times.
    """
    if not lam > 0.0:
        raise InputError("lambda must be > 0")
    t_grid = np.asarray(t_grid, dtype=float)
    if isinstance(paths, PathEnsemble):
        kappa, horizon = paths.kappa, paths.horizon
        times = paths.times
        w = np.exp(-lam * paths.values)
        if np.any(t_grid < 0) or np.any(t_grid > horizon * (1 + 1e-12)):
            raise InputError("t_grid outside [0, horizon]")
        dt = np.diff(times)
        cum = np.concatenate([np.zeros((w.shape[0], 1)),
                              np.cumsum(0.5 * (w[:, 1:] + w[:, :-1]) * dt, axis=1)], axis=1)
        cols = [int(np.argmin(np.abs(times - t))) for t in t_grid]
        m = w[:, cols] - lam**kappa * cum[:, cols]
    else:
        paths = list(paths)
        kappa, horizon, _ = _values_at(paths, 0.0)
        if np.any(t_grid < 0) or np.any(t_grid > horizon * (1 + 1e-12)):
            raise InputError("t_grid outside [0, horizon]")
        m = np.empty((len(paths), t_grid.size))
        for i, p in enumerate(paths):
            wp = np.exp(-lam * p.values)
            cum = np.concatenate([[0.0], np.cumsum(0.5 * (wp[1:] + wp[:-1]) * np.diff(p.times))])
            for j, t in enumerate(t_grid):
                k = np.searchsorted(p.times, t, side="right") - 1
                m[i, j] = wp[k] - lam**kappa * (cum[k] + wp[k] * (t - p.times[k]))
    res = m.mean(axis=0) - 1.0
    se = m.std(axis=0, ddof=1) / math.sqrt(m.shape[0]) if m.shape[0] > 1 else np.zeros(t_grid.size)
    return MartingaleReport(t_grid, res, se, float(np.max(np.abs(res))))


def sup_tail_bound(kappa: float, t: float, x: float, y: float, C: float) -> float:
    """``(C t / (x y**(kappa-1)))**(x/y)``."""
    return (C * t / (x * y ** (kappa - 1.0))) ** (x / y)


def implied_constant(kappa: float, t: float, x: float, y: float, prob: float) -> float:
    """Smallest ``C`` with ``prob <= sup_tail_bound(kappa, t, x, y, C)``."""
    return x * y ** (kappa - 1.0) / t * prob ** (y / x)


def calibrate_constant(ensemble: "PathEnsemble", cells: Sequence[tuple[float, float, float]],
                       confidence: float | None = 0.95) -> float:
    """Largest implied ``C`` over ``cells``.

    With ``confidence`` set, each cell contributes through the one-sided
    Clopper-Pearson upper limit of its probability rather than the raw
    frequency, so that sampling noise in the pilot does not understate ``C``.
    Cells with no hits impose nothing.
    """
    probs = sup_tail_table(ensemble, cells)
    n = len(ensemble)
    implied = []
    for (t, x, y), p in zip(cells, probs):
        hits = int(round(p * n))
        if hits == 0:
            continue
        if confidence is not None:
            p = 1.0 if hits == n else float(beta_dist.ppf(confidence, hits + 1, n - hits))
        implied.append(implied_constant(ensemble.kappa, t, x, y, p))
    if not implied:
        raise InputError("no pilot cell has a positive empirical probability")
    return float(max(implied))


def sup_tail_table(ensemble: PathEnsemble, cells: Sequence[tuple[float, float, float]]) -> np.ndarray:
    """Empirical ``P(sup_{u<=t} L_u 1{all jumps up to u <= y} >= x)`` per ``(t, x, y)``.

    The supremum is taken over grid times strictly before the grid cell that
    contains the first jump exceeding ``y``.
    """
    if ensemble.max_jump is None or ensemble.values.shape[1] != ensemble.max_jump.shape[1] + 1:
        raise InputError("ensemble must keep the full grid and per-cell max jumps")
    run_max = np.maximum.accumulate(ensemble.values, axis=1)
    n_steps = ensemble.max_jump.shape[1]
    out = np.empty(len(cells))
    first_big: dict[float, np.ndarray] = {}
    for i, (t, x, y) in enumerate(cells):
        if x <= 0.0 or y <= 0.0:
            raise InputError("x and y must be > 0")
        k_t = int(round(t / ensemble.mesh))
        if not 0 < k_t <= n_steps:
            raise InputError("t outside (0, horizon]")
        if y not in first_big:
            big = ensemble.max_jump > y
            first_big[y] = np.where(big.any(axis=1), big.argmax(axis=1), n_steps)
        stop = np.minimum(first_big[y], k_t)
        sup = run_max[np.arange(len(ensemble)), stop]
        out[i] = np.mean(sup >= x)
    return out


def truncated_sup_tail(
    kappa: float,
    t: float,
    x: float,
    y: float,
    reps: int,
    rng_seed: int,
    C: float | None = None,
    truncation: float = 1e-3,
    mesh: float = 1e-3,
) -> dict:
    """Empirical probability of the bounded-jump supremum event and its bound."""
    _check_kappa(kappa)
    if x <= 0.0 or y <= 0.0:
        raise InputError("x and y must be > 0")
    if reps < 1000:
        raise InputError("reps must be >= 1000")
    ens = sample_ensemble(kappa, max(t, 1.0), truncation, mesh, reps, rng_seed, keep_max_jump=True)
    prob = float(sup_tail_table(ens, [(t, x, y)])[0])
    bound = sup_tail_bound(kappa, t, x, y, C) if C is not None else None
    return {"empirical_prob": prob, "bound": bound}
