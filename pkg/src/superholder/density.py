"""Density estimation for particle clouds.

Kernel density estimates are exact Gaussian sums truncated at eight
bandwidths.  Every estimate is returned at the chosen bandwidth ``h`` and at
``h/2`` so that smoothing bias can be judged from the pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cloud import ParticleCloud
from .errors import EmptySupportError, InputError
from .params import DENSITY, ModelParams
from .stable_kernel import KernelConfig, semigroup_apply

AUTO = "auto"
TRUNCATE = 8.0


@dataclass
class DensityGrid:
    window: tuple[float, float]
    values: np.ndarray
    bandwidth: float
    n_particles: int
    total_mass: float
    values_half: np.ndarray | None = None

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.window[0], self.window[1], self.values.size)

    @property
    def spacing(self) -> float:
        return (self.window[1] - self.window[0]) / (self.values.size - 1)

    def integral(self) -> float:
        return float(np.trapezoid(self.values, dx=self.spacing))

    def at(self, z: float) -> float:
        return float(np.interp(z, self.grid, self.values))

    def max(self) -> float:
        return float(self.values.max())

    def csv_rows(self):
        yield ("x", "value", "value_half_bandwidth")
        half = self.values_half if self.values_half is not None else np.full(self.values.size, np.nan)
        for row in zip(self.grid.tolist(), self.values.tolist(), half.tolist()):
            yield row


def auto_bandwidth(positions: np.ndarray, spacing: float) -> float:
    """Silverman's rule ``1.06 * sigma * n**(-1/5)`` with the robust scale
    ``min(std, IQR/1.349)``, floored at twice the node spacing."""
    n = positions.size
    if n < 2:
        return 2.0 * spacing
    q75, q25 = np.percentile(positions, [75, 25])
    sigma = min(float(np.std(positions, ddof=1)), (q75 - q25) / 1.349)
    if not sigma > 0:
        sigma = float(np.std(positions, ddof=1))
    return max(1.06 * sigma * n ** (-0.2), 2.0 * spacing)


def _gaussian_sum(positions: np.ndarray, weight: float, lo: float, spacing: float,
                  n_nodes: int, h: float) -> np.ndarray:
    reach = int(math.ceil(TRUNCATE * h / spacing))
    near = positions[(positions >= lo - TRUNCATE * h) & (positions <= lo + (n_nodes - 1) * spacing + TRUNCATE * h)]
    out = np.zeros(n_nodes)
    if near.size == 0:
        return out
    base = np.rint((near - lo) / spacing).astype(np.int64)
    frac = (near - lo) / spacing - base
    scale = spacing / h
    for off in range(-reach, reach + 1):
        idx = base + off
        ok = (idx >= 0) & (idx < n_nodes)
        if not ok.any():
            continue
        z = (off - frac[ok]) * scale
        out += np.bincount(idx[ok], weights=np.exp(-0.5 * z * z), minlength=n_nodes)
    return out * (weight / (h * math.sqrt(2.0 * math.pi)))


def kde_density(cloud: ParticleCloud, window: Sequence[float], n_nodes: int,
                bandwidth: float | str = AUTO) -> DensityGrid:
    """Gaussian KDE of the atomic measure on ``n_nodes`` equispaced nodes."""
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise InputError("window must satisfy w0 < w1")
    if n_nodes < 3:
        raise InputError("n_nodes must be >= 3")
    if cloud.count == 0:
        raise EmptySupportError("cloud is empty")
    pos = np.asarray(cloud.positions, dtype=float)
    if not np.any((pos >= lo) & (pos <= hi)):
        raise EmptySupportError(f"window [{lo:g}, {hi:g}] contains no particles")
    spacing = (hi - lo) / (n_nodes - 1)
    if bandwidth == AUTO:
        h = auto_bandwidth(pos, spacing)
    else:
        h = float(bandwidth)
        if not h > 0:
            raise InputError("bandwidth must be > 0")
    vals = _gaussian_sum(pos, cloud.atom_mass, lo, spacing, n_nodes, h)
    half = _gaussian_sum(pos, cloud.atom_mass, lo, spacing, n_nodes, h / 2.0)
    return DensityGrid((lo, hi), vals, h, int(pos.size), cloud.total_mass, half)


def z1_component(mu: ParticleCloud, params: ModelParams, t: float, x):
    """Deterministic part ``sum_i m_i p_t(x - x_i)`` of the density."""
    return semigroup_apply(KernelConfig(params.alpha), mu, t, x)


@dataclass
class ScanRow:
    n: int
    median_max: float
    q25: float
    q75: float
    median_max_half: float
    bandwidth: float
    n_used: int


def scan_bandwidth(n: int, h_ref: float = 0.1, n_ref: int = 1000, exponent: float = 0.5) -> float:
    """Bandwidth attached to population scale ``n``: ``h_ref * (n/n_ref)**(-exponent)``."""
    return h_ref * (n / n_ref) ** (-exponent)


def refine_max_scan(
    params: ModelParams,
    t: float,
    window: Sequence[float],
    n_list: Sequence[int],
    replicates: int,
    rng_seed: int,
    mu: ParticleCloud | None = None,
    n_nodes: int = 801,
    h_ref: float = 0.1,
    h_exponent: float = 0.5,
    workers: int | None = None,
) -> list[ScanRow]:
    """Median (and quartiles) over replicates of the maximal KDE value on
    ``window`` for each population scale in ``n_list``.

    Replicate ``i`` at scale ``N`` uses stream ``hash64(seed, "superprocess", i)``
    with ``seed`` derived from ``(rng_seed, N)``.  Extinct or censored
    replicates are left out of the quantiles.
    """
    from .seeding import hash64
    from .superprocess import run_replicates

    params.require(DENSITY)
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise InputError("n_list must be strictly increasing")
    rows = []
    for n in n_list:
        h = scan_bandwidth(n, h_ref, 1000, h_exponent)
        start = mu if mu is not None else ParticleCloud.point_mass(scale_n=n)
        if start.scale_n != n:
            start = ParticleCloud(0.0, np.repeat(start.positions, int(round(start.atom_mass * n))), 1.0 / n)

        def peak(res, h=h):
            if res.censored or res.cloud.count == 0:
                return (np.nan, np.nan)
            pos = res.cloud.positions
            if not np.any((pos >= window[0]) & (pos <= window[1])):
                return (0.0, 0.0)
            g = kde_density(res.cloud, window, n_nodes, h)
            return (g.max(), float(g.values_half.max()))

        out = np.array(run_replicates(params, start, t, n, replicates, hash64(rng_seed, "scan", n),
                                      reduce=peak, workers=workers, checkpoints=[t]), dtype=float)
        ok = np.isfinite(out[:, 0])
        m = out[ok]
        rows.append(ScanRow(n, float(np.median(m[:, 0])), float(np.percentile(m[:, 0], 25)),
                            float(np.percentile(m[:, 0], 75)), float(np.median(m[:, 1])), h, int(ok.sum())))
    return rows


def scan_csv_rows(rows: Sequence[ScanRow]):
    yield ("N", "median_max", "q25", "q75", "median_max_half_bandwidth", "bandwidth", "n_used")
    for r in rows:
        yield (r.n, r.median_max, r.q25, r.q75, r.median_max_half, r.bandwidth, r.n_used)
