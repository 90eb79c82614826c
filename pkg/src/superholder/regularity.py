"""Hoelder exponent targets and oscillation-based exponent estimators."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .cloud import ParticleCloud
from .density import DensityGrid, kde_density
from .errors import InputError, InsufficientSampleError
from .params import CONTINUITY, OPTIMALITY, ModelParams

EXPONENT_CLAMP = (0.0, 1.5)
BOOTSTRAP_DRAWS = 400
MIN_RADII = 5
MIN_DECADES = 1.5


@dataclass(frozen=True)
class RegularityTargets:
    eta_c: float
    eta_bar_c: float
    optimality_applies: bool

    def to_dict(self) -> dict:
        return asdict(self)


def compute_targets(params: ModelParams) -> RegularityTargets:
    """Local exponent ``alpha/(1+beta) - 1`` and the pointwise exponent
    ``min((1+alpha)/(1+beta) - 1, 1)`` at a given point."""
    params.require(CONTINUITY)
    return RegularityTargets(params.eta_c, params.eta_bar_c, params.optimality_regime)


@dataclass
class HolderEstimate:
    location: float | tuple[float, float]
    exponent: float
    ci_low: float
    ci_high: float
    n_scales: int
    fit_r2: float
    raw_exponent: float
    clamped: bool = False
    degenerate: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(self.location, tuple):
            d["location"] = list(self.location)
        return d


def _check_radii(radii, bandwidth: float) -> np.ndarray:
    r = np.asarray(radii, dtype=float)
    if r.ndim != 1 or r.size < MIN_RADII:
        raise InputError(f"need at least {MIN_RADII} radii")
    if np.any(r <= 0) or np.any(np.diff(r) >= 0):
        raise InputError("radii must be positive and strictly decreasing")
    if math.log10(r[0] / r[-1]) < MIN_DECADES - 1e-12:
        raise InputError(f"radii must span at least {MIN_DECADES} decades")
    if r[-1] < 2.0 * bandwidth * (1 - 1e-12):
        raise InputError(f"smallest radius {r[-1]:g} is below twice the bandwidth {bandwidth:g}")
    return r


def _slope(logr: np.ndarray, logo: np.ndarray) -> tuple[float, float]:
    slope, icept = np.polyfit(logr, logo, 1)
    resid = logo - (slope * logr + icept)
    ss = float(np.sum((logo - logo.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    return float(slope), r2


def _fit(location, radii: np.ndarray, osc: np.ndarray, seed: int) -> HolderEstimate:
    lo, hi = EXPONENT_CLAMP
    if np.any(osc <= 0) or not np.all(np.isfinite(osc)):
        return HolderEstimate(location, hi, hi, hi, radii.size, float("nan"), float("nan"), True, True)
    logr, logo = np.log(radii), np.log(osc)
    raw, r2 = _slope(logr, logo)
    rng = np.random.default_rng(seed)
    boots = []
    for _ in range(BOOTSTRAP_DRAWS):
        pick = rng.integers(0, radii.size, radii.size)
        if np.unique(pick).size < 2:
            continue
        boots.append(_slope(logr[pick], logo[pick])[0])
    est = min(max(raw, lo), hi)
    q05, q95 = np.clip(np.percentile(boots, [5, 95]), lo, hi)
    return HolderEstimate(location, est, float(min(q05, est)), float(max(q95, est)), radii.size, r2,
                          raw, est != raw, False)


def _require_inside(density: DensityGrid, lo: float, hi: float):
    w0, w1 = density.window
    if lo < w0 - 1e-12 or hi > w1 + 1e-12:
        raise InputError(f"[{lo:g}, {hi:g}] does not fit inside the window [{w0:g}, {w1:g}]")


def pointwise_holder(density: DensityGrid, z: float, radii: Sequence[float], seed: int = 0) -> HolderEstimate:
    """Slope of ``log osc(r)`` against ``log r`` with
    ``osc(r) = max_{|x-z|<=r} |f(x) - f(z)|``; the band is a 90% bootstrap over
    radius subsets."""
    r = _check_radii(radii, density.bandwidth)
    _require_inside(density, z - r[0], z + r[0])
    x, f = density.grid, density.values
    fz = float(np.interp(z, x, f))
    dist = np.abs(x - z)
    dev = np.abs(f - fz)
    # fit against the farthest node actually inside each ball, so that the
    # node lattice does not bias the slope
    reach = np.array([dist[dist <= ri + 1e-12].max(initial=0.0) for ri in r])
    osc = np.array([dev[dist <= ri + 1e-12].max(initial=0.0) for ri in r])
    return _fit(float(z), np.where(reach > 0, reach, r), osc, seed)


def modulus_of_continuity(density: DensityGrid, interval: Sequence[float], radii: np.ndarray) -> np.ndarray:
    """``max_{z in interval} max_{|x-z|<=r} |f(x) - f(z)|`` for each radius (node resolution)."""
    x, f = density.grid, density.values
    inside = (x >= interval[0] - 1e-12) & (x <= interval[1] + 1e-12)
    out = np.empty(radii.size)
    for j, ri in enumerate(radii):
        k = int(math.floor(ri / density.spacing + 1e-9))
        size = 2 * k + 1
        up = maximum_filter1d(f, size, mode="nearest") - f
        down = f - minimum_filter1d(f, size, mode="nearest")
        out[j] = np.max(np.maximum(up, down)[inside])
    return out


def local_holder(density: DensityGrid, interval: Sequence[float], radii: Sequence[float],
                 seed: int = 0) -> HolderEstimate:
    """Exponent of the worst-case modulus of continuity over ``interval``."""
    a, b = float(interval[0]), float(interval[1])
    if not b > a:
        raise InputError("interval must satisfy lo < hi")
    r = _check_radii(radii, density.bandwidth)
    _require_inside(density, a - r[0], b + r[0])
    steps = np.floor(r / density.spacing + 1e-9)
    eff = np.where(steps > 0, steps * density.spacing, r)
    return _fit((a, b), eff, modulus_of_continuity(density, (a, b), r), seed)


def default_radii(bandwidth: float, r_max: float = 0.25, count: int = 8) -> np.ndarray:
    """Geometric radii from ``r_max`` down to ``2 * bandwidth``."""
    return np.geomspace(r_max, 2.0 * bandwidth, count)


@dataclass
class ExperimentReport:
    params: dict
    targets: dict
    z: float
    t: float
    scale_n: int
    bandwidth: float
    radii: list
    floor: float
    pointwise: dict
    local: dict
    n_retained: int
    n_run: int
    ordering: dict
    rows: list = field(default_factory=list)

    def to_dict(self, with_rows: bool = False) -> dict:
        d = asdict(self)
        if not with_rows:
            d.pop("rows")
        return d

    def csv_rows(self):
        yield ("replicate", "density_at_z", "retained", "pointwise", "pointwise_ci_low",
               "pointwise_ci_high", "local", "local_ci_low", "local_ci_high")
        yield from self.rows


def _median_iqr(v: np.ndarray) -> dict:
    q25, q50, q75 = np.percentile(v, [25, 50, 75])
    return {"median": float(q50), "iqr": float(q75 - q25), "q25": float(q25), "q75": float(q75)}


def ordering_test(pointwise: np.ndarray, local: np.ndarray, seed: int, draws: int = 4000,
                  level: float = 0.10) -> dict:
    """Paired bootstrap of ``median(pointwise) - median(local)``; one-sided
    p-value for the difference being <= 0."""
    rng = np.random.default_rng(seed)
    n = pointwise.size
    idx = rng.integers(0, n, (draws, n))
    diff = np.median(pointwise[idx], axis=1) - np.median(local[idx], axis=1)
    p = float(np.mean(diff <= 0.0))
    return {"median_difference": float(np.median(pointwise) - np.median(local)),
            "p_value": p, "level": level, "significant": p < level}


def exponent_experiment(
    params: ModelParams,
    t: float,
    z: float,
    scale_n: int,
    replicates: int,
    rng_seed: int,
    mu: ParticleCloud | None = None,
    bandwidth: float = 0.0025,
    window: Sequence[float] = (-1.0, 1.0),
    radii: Sequence[float] | None = None,
    floor_fraction: float = 0.1,
    half_width: float = 0.5,
    min_retained: int = 30,
    workers: int | None = None,
) -> ExperimentReport:
    """Simulate, estimate the density at ``bandwidth`` and compare pointwise
    exponents at ``z`` with local exponents on ``[z - half_width, z + half_width]``.

    Replicates whose density estimate at ``z`` falls below ``floor_fraction``
    times the replicate mean at ``z`` are dropped before taking medians.
    """
    from .superprocess import run_replicates

    params.require(CONTINUITY, OPTIMALITY)
    targets = compute_targets(params)
    spacing = bandwidth / 2.0
    n_nodes = int(round((window[1] - window[0]) / spacing)) + 1
    r = default_radii(bandwidth) if radii is None else np.asarray(radii, dtype=float)
    start = mu if mu is not None else ParticleCloud.point_mass(scale_n=scale_n)

    def analyse(res):
        if res.censored or res.cloud.count == 0 or not np.any(
                (res.cloud.positions >= window[0]) & (res.cloud.positions <= window[1])):
            return (res.replicate, 0.0, None, None)
        g = kde_density(res.cloud, window, n_nodes, bandwidth)
        fz = g.at(z)
        if fz <= 0.0:
            return (res.replicate, 0.0, None, None)
        pw = pointwise_holder(g, z, r, seed=res.replicate)
        lc = local_holder(g, (z - half_width, z + half_width), r, seed=res.replicate)
        return (res.replicate, fz, pw, lc)

    out = run_replicates(params, start, t, scale_n, replicates, rng_seed, reduce=analyse,
                         workers=workers, checkpoints=[t])
    dens = np.array([o[1] for o in out])
    floor = floor_fraction * float(dens.mean())
    keep = [o for o in out if o[2] is not None and o[1] >= floor and o[1] > 0]
    if len(keep) < min_retained:
        raise InsufficientSampleError(f"only {len(keep)} replicates above the density floor (need {min_retained})")
    pw = np.array([o[2].exponent for o in keep])
    lc = np.array([o[3].exponent for o in keep])
    rows = []
    for rep, fz, p_est, l_est in out:
        retained = p_est is not None and fz >= floor and fz > 0
        if p_est is None:
            rows.append((rep, fz, 0, "", "", "", "", "", ""))
        else:
            rows.append((rep, fz, int(retained), p_est.exponent, p_est.ci_low, p_est.ci_high,
                         l_est.exponent, l_est.ci_low, l_est.ci_high))
    return ExperimentReport(
        params=params.to_dict(), targets=targets.to_dict(), z=float(z), t=float(t), scale_n=int(scale_n),
        bandwidth=float(bandwidth), radii=[float(v) for v in r], floor=floor,
        pointwise=_median_iqr(pw), local=_median_iqr(lc), n_retained=len(keep), n_run=len(out),
        ordering=ordering_test(pw, lc, rng_seed), rows=rows)
