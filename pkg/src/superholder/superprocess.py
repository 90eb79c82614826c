"""Branching-particle approximation of the (alpha, 1, beta)-superprocess.

Particles of mass ``1/N`` move as independent symmetric alpha-stable
processes (kernel convention of :mod:`superholder.stable_kernel`).  Each
particle carries three exponential clocks:

* stable branching at rate ``q_N = b (1+beta) N**beta``, offspring law with
  generating function ``f(s) = s + (1-s)**(1+beta) / (1+beta)``;
* binary birth at rate ``max(a, 0)``;
* death at rate ``max(-a, 0)``.

Since ``q_N N [f(1 - v/N) - (1 - v/N)] = b v**(1+beta)`` exactly, the
rescaled system solves the same log-Laplace equation as the superprocess,
up to the ``O(1/N)`` discrepancy between ``N(1 - exp(-phi/N))`` and ``phi``.

Motion is applied lazily: a particle is only moved (by an exact stable
increment over the time since its last update) when it reproduces, and all
survivors are moved to the final time at the end.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple, Sequence

import numba
import numpy as np

from .cloud import ParticleCloud
from .errors import InputError, ResolutionError, ResourceError
from .params import CONTINUITY, ModelParams
from .parallel import map_ordered
from .seeding import hash64, replicate_rng

MODULE_ID = "superprocess"
POPULATION_CAP = 10_000_000
_TABLE_SIZE = 4096


# ---------------------------------------------------------------------------
# offspring law


def offspring_pmf(beta: float, kmax: int) -> np.ndarray:
    """``p_k`` for ``k = 0..kmax``: ``p_0 = 1/(1+beta)``, ``p_1 = 0`` and
    ``p_k = |binom(1+beta, k)| / (1+beta)`` for ``k >= 2``."""
    p = np.zeros(kmax + 1)
    p[0] = 1.0 / (1.0 + beta)
    if kmax >= 2:
        # |binom(1+beta, k+1)| = |binom(1+beta, k)| (k-1-beta)/(k+1)
        p[2] = (1.0 + beta) * beta / 2.0 / (1.0 + beta)
        for k in range(2, kmax):
            p[k + 1] = p[k] * (k - 1.0 - beta) / (k + 1.0)
    return p


def offspring_survival(beta: float, k) -> np.ndarray:
    """``P(K >= k)`` for ``k >= 2``, in closed form:
    ``Gamma(k-1-beta) / ((1+beta)**2 Gamma(-1-beta) Gamma(k))``."""
    from scipy.special import gammaln

    k = np.asarray(k, dtype=float)
    return np.exp(gammaln(k - 1.0 - beta) - gammaln(k)) / ((1.0 + beta) ** 2 * math.gamma(-1.0 - beta))


def branching_rate(params: ModelParams, scale_n: int) -> float:
    return params.b * (1.0 + params.beta) * scale_n**params.beta


@numba.njit(nogil=True, cache=True)
def _survival(k, beta, log_norm):
    a = -1.0 - beta
    z = float(k)
    if z < 1.0e4:
        lr = math.lgamma(z + a) - math.lgamma(z)
    else:
        # log Gamma(z+a) - log Gamma(z), Bernoulli-polynomial expansion; lgamma cancels badly here
        lr = (a * math.log(z) + (a * a - a) / (2.0 * z)
              - (a**3 - 1.5 * a * a + 0.5 * a) / (6.0 * z * z)
              + (a**4 - 2.0 * a**3 + a * a) / (12.0 * z**3))
    return math.exp(lr - log_norm)


@numba.njit(nogil=True, cache=True)
def _sample_offspring(u, beta, table, log_norm):
    """Inverse transform: largest ``k`` with ``P(K >= k) >= v``, ``v = 1 - u``."""
    v = 1.0 - u
    if v > table[2]:
        return 0
    kt = table.size - 1
    if v >= table[kt]:
        lo = 2
        hi = kt
        # invariant: table[lo] >= v, table[hi + 1] < v (or hi == kt)
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if table[mid] >= v:
                lo = mid
            else:
                hi = mid - 1
        return lo
    # Pareto initial guess from P(K >= k) ~ k**(-1-beta) exp(-log_norm), then exact correction
    guess = math.exp(-(math.log(v) + log_norm) / (1.0 + beta))
    if guess > 9.0e15:
        return np.int64(9_000_000_000_000_000)
    k = max(kt, np.int64(guess))
    while k > kt and _survival(k, beta, log_norm) < v:
        k -= 1
    while _survival(k + 1, beta, log_norm) >= v:
        k += 1
    return k


@numba.njit(nogil=True, cache=True, fastmath=True)
def _stable_increment(rng, alpha, dt):
    """Symmetric stable step with characteristic function ``exp(-dt |xi|**alpha)``
    (Chambers-Mallows-Stuck)."""
    if dt <= 0.0:
        return 0.0
    v = math.pi * (rng.random() - 0.5)
    w = rng.standard_exponential()
    if alpha == 2.0:
        return 2.0 * math.sin(v) * math.sqrt(w * dt)
    if alpha == 1.0:
        return math.tan(v) * dt
    ia = 1.0 / alpha
    return math.sin(alpha * v) * math.exp(
        (1.0 - alpha) * ia * (math.log(math.cos(v - alpha * v)) - math.log(w))
        + ia * (math.log(dt) - math.log(math.cos(v))))


_DONE, _GROW_POP, _GROW_LOG = 0, 1, 2


@numba.njit(nogil=True, cache=True)
def _advance(rng, pos, last, js, jx, jk, counts, checkpoints, n, nj, ick, time, integral,
             n_events, t_end, alpha, beta, q_branch, a_birth, a_death, table, log_norm,
             kmin_record):
    """Event loop; never reallocates, returns to the caller when an array is full.

    On ``_GROW_POP``/``_GROW_LOG`` the event at ``time`` has been decided but not
    applied: particle ``i`` already sits at ``x`` and still needs ``k - 1`` copies
    (and a log entry when ``record``).
    """
    rate_per = q_branch + a_birth + a_death
    cap = pos.size
    jcap = js.size
    if rate_per == 0.0 and n > 0:
        # nothing ever happens: pure motion, applied when the caller finalises
        while ick < checkpoints.size and checkpoints[ick] <= t_end:
            counts[ick] = n
            ick += 1
        integral += n * (t_end - time)
        return _DONE, n, nj, ick, t_end, integral, n_events, -1, 0, False
    while n > 0:
        tn = time + rng.standard_exponential() / (n * rate_per)
        while ick < checkpoints.size and checkpoints[ick] < tn and checkpoints[ick] <= t_end:
            counts[ick] = n
            ick += 1
        if tn >= t_end:
            integral += n * (t_end - time)
            time = t_end
            break
        integral += n * (tn - time)
        time = tn
        n_events += 1
        # one uniform picks both the particle and the clock that rang
        w = rng.random() * n
        i = min(int(w), n - 1)
        u = (w - i) * rate_per
        record = False
        if u < q_branch:
            k = _sample_offspring(rng.random(), beta, table, log_norm)
            record = k >= kmin_record
        elif u < q_branch + a_birth:
            k = 2
        else:
            k = 0
        if k == 0:
            n -= 1
            pos[i] = pos[n]
            last[i] = last[n]
            continue
        x = pos[i] + _stable_increment(rng, alpha, time - last[i])
        pos[i] = x
        last[i] = time
        if n + k - 1 > cap:
            return _GROW_POP, n, nj, ick, time, integral, n_events, i, k, record
        if record and nj == jcap:
            return _GROW_LOG, n, nj, ick, time, integral, n_events, i, k, record
        for j in range(n, n + k - 1):
            pos[j] = x
            last[j] = time
        n += k - 1
        if record:
            js[nj] = time
            jx[nj] = x
            jk[nj] = k
            nj += 1
    return _DONE, n, nj, ick, time, integral, n_events, -1, 0, False


@numba.njit(nogil=True, cache=True)
def _evolve_kernel(rng, pos_init, t_end, alpha, beta, q_branch, a_birth, a_death,
                   table, log_norm, kmin_record, checkpoints, cap_limit):
    n = pos_init.size
    cap = max(1024, 2 * n)
    pos = np.empty(cap)
    last = np.zeros(cap)
    pos[:n] = pos_init
    js = np.empty(256)
    jx = np.empty(256)
    jk = np.empty(256, dtype=np.int64)
    counts = np.zeros(checkpoints.size, dtype=np.int64)
    nj = 0
    ick = 0
    time = 0.0
    integral = 0.0
    n_events = 0
    censored = False
    while True:
        status, n, nj, ick, time, integral, n_events, i, k, record = _advance(
            rng, pos, last, js, jx, jk, counts, checkpoints, n, nj, ick, time, integral,
            n_events, t_end, alpha, beta, q_branch, a_birth, a_death, table, log_norm,
            kmin_record)
        if status == _DONE:
            break
        if status == _GROW_POP:
            if n + k - 1 > cap_limit:
                censored = True
                break
            new_cap = max(2 * pos.size, n + k - 1)
            p2 = np.empty(new_cap)
            l2 = np.empty(new_cap)
            p2[:n] = pos[:n]
            l2[:n] = last[:n]
            pos = p2
            last = l2
        if record and nj == js.size:
            m = 2 * js.size
            js2 = np.empty(m)
            jx2 = np.empty(m)
            jk2 = np.empty(m, dtype=np.int64)
            js2[:nj] = js[:nj]
            jx2[:nj] = jx[:nj]
            jk2[:nj] = jk[:nj]
            js = js2
            jx = jx2
            jk = jk2
        x = pos[i]
        for j in range(n, n + k - 1):
            pos[j] = x
            last[j] = time
        n += k - 1
        if record:
            js[nj] = time
            jx[nj] = x
            jk[nj] = k
            nj += 1
    if censored:
        while ick < checkpoints.size:
            counts[ick] = -1
            ick += 1
    else:
        while ick < checkpoints.size:
            counts[ick] = n
            ick += 1
        for j in range(n):
            pos[j] += _stable_increment(rng, alpha, t_end - last[j])
    return (pos[:n].copy(), js[:nj].copy(), jx[:nj].copy(), jk[:nj].copy(),
            counts, integral, censored, n_events)


# ---------------------------------------------------------------------------
# public types


class JumpEvent(NamedTuple):
    s: float
    x: float
    r: float


@dataclass
class JumpLog:
    """Recorded branching bursts ``(s, x, r)``; ``r = (offspring - 1) * atom_mass``
    is the mass the burst adds to the measure."""

    s: np.ndarray
    x: np.ndarray
    r: np.ndarray
    atom_mass: float
    threshold: float

    def __len__(self) -> int:
        return int(self.s.size)

    def __iter__(self) -> Iterator[JumpEvent]:
        for row in zip(self.s.tolist(), self.x.tolist(), self.r.tolist()):
            yield JumpEvent(*row)


@dataclass
class EvolveResult:
    cloud: ParticleCloud | None
    jumps: JumpLog
    mass_times: np.ndarray
    mass_series: np.ndarray
    mass_integral: float
    censored: bool = False
    n_events: int = 0
    replicate: int = 0
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def total_mass(self) -> float:
        return float(self.mass_series[-1])

    def record(self) -> dict:
        return {"replicate": self.replicate, "t": float(self.mass_times[-1]),
                "total_mass": self.total_mass, "n_jumps": len(self.jumps)}


def _initial_positions(mu: ParticleCloud, scale_n: int) -> np.ndarray:
    if mu.count == 0:
        raise InputError("initial cloud is empty")
    ratio = mu.atom_mass * scale_n
    copies = int(round(ratio))
    if copies < 1 or abs(ratio - copies) > 1e-9 * max(1.0, ratio):
        raise InputError("initial atom mass must be a positive multiple of 1/scale_N")
    return np.repeat(mu.positions, copies)


def evolve(
    params: ModelParams,
    mu: ParticleCloud,
    t: float,
    scale_n: int,
    rng_seed: int,
    replicate: int = 0,
    jump_record_threshold: float | None = None,
    checkpoints: Sequence[float] | None = None,
    population_cap: int = POPULATION_CAP,
    require: Sequence[str] = (),
    on_cap: str = "raise",
    keep_cloud: bool = True,
) -> EvolveResult:
    """Run one replicate from ``mu`` up to time ``t``.

    The replicate stream is seeded with ``hash64(rng_seed, "superprocess",
    replicate)``.  ``mass_series`` holds the total mass at ``checkpoints``
    (default: 11 equispaced times including 0 and ``t``); ``mass_integral``
    is the exact time integral of the total mass over ``[0, t]``.
    """
    params.require(*require)
    if not (t > 0.0 and math.isfinite(t)):
        raise InputError("t must be > 0")
    if int(scale_n) != scale_n or scale_n < 1000:
        raise InputError("scale_N must be an integer >= 1000")
    pos0 = _initial_positions(mu, scale_n)
    atom = 1.0 / scale_n
    threshold = 5.0 * atom if jump_record_threshold is None else float(jump_record_threshold)
    kmin = max(2, int(math.ceil(threshold * scale_n - 1e-9)) + 1)
    ck = np.linspace(0.0, t, 11) if checkpoints is None else np.asarray(checkpoints, dtype=float)
    if ck.size and (np.any(np.diff(ck) < 0) or ck[0] < 0 or ck[-1] > t):
        raise InputError("checkpoints must be increasing within [0, t]")
    beta = params.beta
    table = np.zeros(_TABLE_SIZE + 1)
    table[2:] = offspring_survival(beta, np.arange(2, _TABLE_SIZE + 1))
    log_norm = math.log((1.0 + beta) ** 2 * math.gamma(-1.0 - beta))
    seed = hash64(rng_seed, MODULE_ID, replicate)
    rng = np.random.default_rng(seed)
    pos, js, jx, jk, counts, integral, censored, n_events = _evolve_kernel(
        rng, pos0, float(t), float(params.alpha), beta, branching_rate(params, scale_n),
        max(params.a, 0.0), max(-params.a, 0.0), table, log_norm, kmin, ck, int(population_cap))
    if censored and on_cap == "raise":
        raise ResourceError(f"population exceeded cap {population_cap} (replicate {replicate})")
    jumps = JumpLog(js, jx, (jk - 1) * atom, atom, threshold)
    cloud = ParticleCloud(t, pos, atom) if keep_cloud and not censored else None
    series = np.where(counts >= 0, counts * atom, np.nan)
    return EvolveResult(cloud, jumps, ck, series, integral * atom, bool(censored), int(n_events),
                        replicate, seed)


def run_replicates(
    params: ModelParams,
    mu: ParticleCloud,
    t: float,
    scale_n: int,
    replicates: int,
    rng_seed: int,
    reduce: Callable[[EvolveResult], object] | None = None,
    workers: int | None = None,
    start: int = 0,
    **kwargs,
) -> list:
    """Replicates ``start .. start+replicates-1`` in replicate order.

    Replicates that hit the population cap are kept with ``censored=True``
    (and no cloud).  ``reduce`` maps each result to whatever the caller
    needs, so large clouds need not be held in memory.
    """
    kwargs.setdefault("on_cap", "censor")

    def one(i):
        res = evolve(params, mu, t, scale_n, rng_seed, replicate=i, **kwargs)
        return reduce(res) if reduce is not None else res

    return map_ordered(one, range(start, start + replicates), workers)


# ---------------------------------------------------------------------------
# jump statistics


def predicted_jump_count(params: ModelParams, mass_integral: float, r0: float) -> float:
    """Compensator mass of ``{r >= r0}``: ``rho * int mass ds * r0**(-1-beta) / (1+beta)``."""
    b1 = 1.0 + params.beta
    return params.rho_const * mass_integral * r0 ** (-b1) / b1


def compensator_tail_check(
    jumps: JumpLog | Sequence[JumpLog],
    mass_integral: float,
    params: ModelParams,
    r0: float,
) -> dict:
    """Observed number of recorded jumps with ``r >= r0`` against the
    compensator prediction; pooled when several logs are passed, in which
    case ``mass_integral`` is the sum of the per-replicate integrals."""
    logs = [jumps] if isinstance(jumps, JumpLog) else list(jumps)
    if not logs:
        raise InputError("no jump logs")
    atom = max(j.atom_mass for j in logs)
    if r0 < 10.0 * atom:
        raise ResolutionError(f"r0={r0:g} below 10 atom masses ({10 * atom:g})")
    if r0 < max(j.threshold for j in logs):
        raise ResolutionError("r0 below the jump recording threshold")
    observed = int(sum(int(np.count_nonzero(j.r >= r0 - 1e-12 * r0)) for j in logs))
    predicted = predicted_jump_count(params, mass_integral, r0)
    return {"r0": r0, "observed": observed, "predicted": predicted,
            "z": (observed - predicted) / math.sqrt(predicted) if predicted > 0 else 0.0}


def jump_exponent(params: ModelParams, gamma: float) -> float:
    """``1/(1+beta) - gamma``; requires ``0 < gamma < 1/(1+beta)``."""
    top = 1.0 / (1.0 + params.beta)
    if not 0.0 < gamma < top:
        raise InputError(f"gamma must be in (0, {top:g})")
    return top - gamma


def jump_mass_events(logs: Sequence[JumpLog], t: float, lam: float, thresholds: Sequence[float],
                     radius: float = 2.0, center: float = 0.0) -> np.ndarray:
    """Per replicate and threshold ``c``: does a jump with ``|x - center| < radius``
    and ``r > c ((t-s)|x - center|)**lam`` exist?  Shape ``(len(logs), len(thresholds))``."""
    th = np.asarray(thresholds, dtype=float)
    out = np.zeros((len(logs), th.size), dtype=bool)
    for i, log in enumerate(logs):
        dx = np.abs(log.x - center)
        sel = dx < radius
        if not np.any(sel):
            continue
        # smallest threshold the worst jump of this replicate exceeds
        scale = ((t - log.s[sel]) * dx[sel]) ** lam
        with np.errstate(divide="ignore"):
            crit = np.max(np.where(scale > 0, log.r[sel] / scale, np.inf))
        out[i] = crit > th
    return out


def jump_mass_event_probability(
    params: ModelParams,
    t: float,
    gamma: float,
    c_threshold: float | Sequence[float],
    replicates: int,
    rng_seed: int,
    scale_n: int = 10_000,
    mu: ParticleCloud | None = None,
    workers: int | None = None,
):
    """Fraction of replicates with a jump above ``c ((t-s)|x|)**lambda`` in ``B_2(0)``.

    Thresholds share the same replicates, so the result is non-increasing in ``c``.
    """
    params.require(CONTINUITY)
    lam = jump_exponent(params, gamma)
    mu = mu if mu is not None else ParticleCloud.point_mass(0.0, 1.0, scale_n)
    logs = run_replicates(params, mu, t, scale_n, replicates, rng_seed,
                          reduce=lambda r: r.jumps, workers=workers, keep_cloud=False)
    scalar = np.ndim(c_threshold) == 0
    probs = jump_mass_events(logs, t, lam, np.atleast_1d(c_threshold)).mean(axis=0)
    return float(probs[0]) if scalar else probs
