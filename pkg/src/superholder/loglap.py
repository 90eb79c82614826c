"""Log-Laplace equation ``du/dt = -(-Laplacian)**(alpha/2) u + a u - b u**(1+beta)``.

Periodic pseudo-spectral discretisation on ``[-L, L)`` with Strang splitting:
half a step of the exact linear flow (Fourier multiplier
``exp(h/2 (a - |xi|**alpha))``), a full exact step of ``u' = -b u**(1+beta)``
node by node, then the second linear half step.  The nonlinear flow has the
closed form ``u(h) = (u0**-beta + b beta h)**(-1/beta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import erfc

from .cloud import ParticleCloud
from .errors import CoverageError, InputError, RefinementError
from .params import DENSITY, ModelParams
from .stable_kernel import tail_constant

NEGATIVE_CLAMP = -1e-12
HALVING_TOL = 1e-5
WRAP_TOL = 1e-6


@dataclass
class FieldState:
    """Node values of a non-negative field on the periodic grid ``x_j = -L + j 2L/M``.

    ``func`` optionally keeps the exact function the values were sampled
    from, so that particle pairings need not interpolate.
    """

    half_width: float
    values: np.ndarray
    time: float = 0.0
    func: Callable | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        m = self.values.size
        if m < 2 or m & (m - 1):
            raise InputError("number of nodes must be a power of two")
        if not self.half_width > 0:
            raise InputError("half_width must be > 0")

    @property
    def n_nodes(self) -> int:
        return self.values.size

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.n_nodes

    @property
    def grid(self) -> np.ndarray:
        return -self.half_width + self.dx * np.arange(self.n_nodes)

    @classmethod
    def from_function(cls, func: Callable, half_width: float, n_nodes: int, time: float = 0.0):
        x = -half_width + (2.0 * half_width / n_nodes) * np.arange(n_nodes)
        return cls(half_width, func(x), time, func)

    def support_radius(self, rel: float = 1e-14) -> float:
        peak = np.max(np.abs(self.values))
        if peak == 0.0:
            return 0.0
        return float(np.max(np.abs(self.grid[np.abs(self.values) > rel * peak])))

    def evaluate(self, x) -> np.ndarray:
        """Trigonometric interpolant at arbitrary points (exact at the nodes)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        coef = np.fft.fft(self.values) / self.n_nodes
        k = np.fft.fftfreq(self.n_nodes, d=self.dx) * 2.0 * math.pi
        out = np.empty(x.size)
        for s in range(0, x.size, 64):
            xs = x[s : s + 64]
            out[s : s + 64] = np.real(np.exp(1j * np.outer(xs + self.half_width, k)) @ coef)
        return out

    def pairing(self, cloud: ParticleCloud) -> float:
        """``<mu, u>`` for an atomic measure."""
        uniq, counts = np.unique(cloud.positions, return_counts=True)
        on_grid = np.abs((uniq + self.half_width) / self.dx - np.rint((uniq + self.half_width) / self.dx)) < 1e-9
        vals = np.empty(uniq.size)
        idx = np.rint((uniq[on_grid] + self.half_width) / self.dx).astype(int) % self.n_nodes
        vals[on_grid] = self.values[idx]
        if np.any(~on_grid):
            vals[~on_grid] = self.evaluate(uniq[~on_grid])
        return float(np.sum(vals * counts) * cloud.atom_mass)

    def integral(self) -> float:
        return float(np.sum(self.values) * self.dx)


def kernel_tail_mass(alpha: float, t: float, distance: float) -> float:
    """Upper estimate of ``P(|S_t| > distance)`` for the stable motion."""
    if distance <= 0:
        return 1.0
    if alpha == 2.0:
        return float(erfc(distance / (2.0 * math.sqrt(t))))
    return min(1.0, 2.0 * tail_constant(alpha) / alpha * t * distance ** (-alpha))


def wrap_mass(params: ModelParams, phi: FieldState, t: float) -> float:
    """Mass that the linear flow can carry across the periodic boundary.

    A spatially constant field is periodic on every scale, so nothing wraps.
    """
    if np.ptp(phi.values) == 0.0:
        return 0.0
    l1 = float(np.sum(np.abs(phi.values)) * phi.dx)
    dist = phi.half_width - phi.support_radius()
    return math.exp(abs(params.a) * t) * l1 * kernel_tail_mass(params.alpha, t, dist)


def recommended_half_width(params: ModelParams, t: float, support: float, l1: float = 1.0) -> float:
    """Smallest ``L >= 20 t**(1/alpha) + support`` with wrap mass below 1e-6 (rounded up)."""
    lo = 20.0 * t ** (1.0 / params.alpha) + support
    need = WRAP_TOL / max(l1 * math.exp(abs(params.a) * t), 1e-300)
    dist = lo - support
    while kernel_tail_mass(params.alpha, t, dist) > need:
        dist *= 1.25
    return float(2.0 ** math.ceil(math.log2(dist + support)))


def _strang(params: ModelParams, u0: np.ndarray, dx: float, t: float, n_steps: int) -> np.ndarray:
    h = t / n_steps
    xi = 2.0 * math.pi * np.fft.rfftfreq(u0.size, d=dx)
    symbol = params.a - xi**params.alpha
    half = np.exp(0.5 * h * symbol)
    full = half * half
    beta, b = params.beta, params.b
    u = u0.copy()
    coef = np.fft.rfft(u) * half
    for step in range(n_steps):
        u = np.fft.irfft(coef, n=u.size)
        low = u.min()
        if low < NEGATIVE_CLAMP * max(1.0, float(np.max(u))):
            raise RefinementError(f"negative undershoot {low:.3e} in spectral step")
        np.maximum(u, 0.0, out=u)
        if b > 0.0:
            u = u * (1.0 + b * beta * h * u**beta) ** (-1.0 / beta)
        coef = np.fft.rfft(u) * (full if step < n_steps - 1 else half)
    u = np.fft.irfft(coef, n=u.size)
    low = u.min()
    if low < NEGATIVE_CLAMP * max(1.0, float(np.max(u))):
        raise RefinementError(f"negative undershoot {low:.3e} in spectral step")
    return np.maximum(u, 0.0)


def solve_loglap(
    params: ModelParams,
    phi: FieldState,
    t: float,
    dt: float,
    check_refinement: bool = True,
    check_wrap: bool = True,
) -> FieldState:
    """``u(t, .)`` started from ``phi``.

    With ``check_refinement`` the run is repeated at ``dt/2``; a sup-norm
    discrepancy above 1e-5 raises :class:`RefinementError`.  The returned
    state carries ``step_halving`` (that discrepancy) as an attribute.
    """
    if not (t > 0 and math.isfinite(t)):
        raise InputError("t must be > 0")
    if not dt > 0:
        raise InputError("dt must be > 0")
    if np.any(phi.values < 0):
        raise InputError("phi must be non-negative")
    if check_wrap:
        wm = wrap_mass(params, phi, t)
        if wm > WRAP_TOL:
            raise CoverageError(f"periodic wrap mass {wm:.2e} > {WRAP_TOL:g}; enlarge L")
    n_steps = max(1, int(math.ceil(t / dt - 1e-12)))
    u = _strang(params, phi.values, phi.dx, t, n_steps)
    discrepancy = None
    if check_refinement:
        fine = _strang(params, phi.values, phi.dx, t, 2 * n_steps)
        discrepancy = float(np.max(np.abs(fine - u)))
        if discrepancy > HALVING_TOL:
            raise RefinementError(f"step-halving discrepancy {discrepancy:.2e} > {HALVING_TOL:g}; reduce dt")
    out = FieldState(phi.half_width, u, phi.time + t)
    out.step_halving = discrepancy
    return out


def resolution_gap(params: ModelParams, func: Callable, half_width: float, n_nodes: int,
                   t: float, dt: float, check_wrap: bool = True) -> float:
    """Sup-norm change of ``u(t)`` on the coarse nodes when ``dt`` is halved and ``M`` doubled."""
    coarse = solve_loglap(params, FieldState.from_function(func, half_width, n_nodes), t, dt,
                          check_refinement=False, check_wrap=check_wrap)
    fine = solve_loglap(params, FieldState.from_function(func, half_width, 2 * n_nodes), t, dt / 2,
                        check_refinement=False, check_wrap=check_wrap)
    return float(np.max(np.abs(fine.values[::2] - coarse.values)))


def smooth_bump(x, center: float = 0.0, radius: float = 1.0, height: float = 1.0):
    """``height * exp(1 - 1/(1 - ((x-center)/radius)**2))`` inside the ball, 0 outside."""
    z = (np.asarray(x, dtype=float) - center) / radius
    out = np.zeros_like(z)
    inside = np.abs(z) < 1.0
    out[inside] = height * np.exp(1.0 - 1.0 / (1.0 - z[inside] ** 2))
    return out


def laplace_functional_compare(
    params: ModelParams,
    mu: ParticleCloud,
    phi: FieldState,
    t: float,
    sim_replicates: int,
    rng_seed: int,
    scale_n: int = 10_000,
    dt: float = 5e-3,
    workers: int | None = None,
) -> dict:
    """Monte Carlo ``E exp(-<X_t, phi>)`` from the particle system against
    ``exp(-<mu, u_t>)`` from the PDE (with its step-halving discrepancy)."""
    from .superprocess import run_replicates

    params.require(DENSITY)
    if sim_replicates < 200:
        raise InputError("sim_replicates must be >= 200")
    reach = phi.half_width - 1e-9
    if mu.count == 0 or np.max(np.abs(mu.positions)) >= reach:
        raise CoverageError("PDE grid does not cover the support of mu")
    u = solve_loglap(params, phi, t, dt)
    pde_target = math.exp(-u.pairing(mu))
    if phi.func is not None:
        test_fn = phi.func
    else:
        grid, vals = phi.grid, phi.values
        test_fn = lambda x: np.interp(x, grid, vals, left=0.0, right=0.0)  # noqa: E731

    def laplace_sample(res):
        if res.censored:
            return np.nan
        return math.exp(-res.cloud.pairing(test_fn))

    samples = np.asarray(run_replicates(params, mu, t, scale_n, sim_replicates, rng_seed,
                                        reduce=laplace_sample, workers=workers,
                                        checkpoints=[t]), dtype=float)
    kept = samples[np.isfinite(samples)]
    return {
        "mc_mean": float(kept.mean()),
        "mc_se": float(kept.std(ddof=1) / math.sqrt(kept.size)),
        "pde_target": pde_target,
        "pde_step_halving": u.step_halving,
        "n_replicates": int(kept.size),
        "n_censored": int(samples.size - kept.size),
    }
