"""Command-line entry point: ``superholder <experiment> [flags]``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import EXPERIMENTS, ExperimentConfig, build_config, read_config_file
from .errors import ConfigParseError, ConfigurationError, ToolkitError
from .seeding import SCHEME, hash64

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG = 0, 1, 2
MARTINGALE_PATHS = 20_000


@dataclass
class Outcome:
    files: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    seeds: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def check(self, name: str, passed: bool, detail: str) -> None:
        self.checks.append((name, bool(passed), detail))


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.bool_):
        return bool(v)
    raise TypeError(f"not JSON serialisable: {type(v)}")


def _seed_list(master: int, module: str, count: int) -> list:
    return [hash64(master, module, i) for i in range(count)]


# ---------------------------------------------------------------------------
# experiments


def run_kernel_table(cfg: ExperimentConfig) -> Outcome:
    from .stable_kernel import KernelConfig, kernel_table

    kc = KernelConfig(cfg.alpha)
    xs = np.linspace(-10.0, 10.0, 401)
    table = kernel_table(kc, xs)
    out = Outcome()
    out.files["kernel_table.csv"] = _csv([("x", "p1")] + table.tolist())
    closed = None
    if cfg.alpha == 2.0:
        closed = np.exp(-xs**2 / 4.0) / math.sqrt(4.0 * math.pi)
    elif cfg.alpha == 1.0:
        closed = 1.0 / (math.pi * (1.0 + xs**2))
    if closed is not None:
        err = float(np.max(np.abs(table[:, 1] - closed)))
        out.check("closed form sup-error <= 1e-8", err <= 1e-8, f"{err:.3e}")
    return out


def run_stable_check(cfg: ExperimentConfig) -> Outcome:
    from .stable_process import MODULE_ID, empirical_laplace, martingale_residual, sample_ensemble

    t = cfg.t
    grid = [t / 4.0, t / 2.0, t]
    ens = sample_ensemble(cfg.kappa, t, 1e-3, 1e-3, cfg.replicates, cfg.seed, record_times=[t],
                          workers=cfg.workers)
    out = Outcome(seeds={MODULE_ID: _seed_list(cfg.seed, MODULE_ID, cfg.replicates)})
    rows = [("kappa", "t", "lambda", "estimate", "std_err", "target", "z")]
    for lam in (0.5, 1.0, 2.0):
        rep = empirical_laplace(ens, lam, t)
        z = (rep.estimate - rep.target) / rep.std_err
        rows.append((cfg.kappa, t, lam, rep.estimate, rep.std_err, rep.target, z))
        out.check(f"Laplace transform lambda={lam:g} within 3 SE", rep.within(3.0), f"z={z:+.2f}")
    out.files["laplace.csv"] = _csv(rows)
    # the time integral needs the full mesh, so a smaller ensemble carries it
    fine = sample_ensemble(cfg.kappa, t, 1e-3, 1e-3, min(cfg.replicates, MARTINGALE_PATHS), cfg.seed,
                           record_times=np.linspace(0.0, t, int(round(t / 1e-3)) + 1), workers=cfg.workers)
    mart = martingale_residual(fine, 1.0, grid)
    mrows = [("t", "residual", "std_err")]
    for ti, r, se in zip(grid, mart.residuals, mart.std_errs):
        mrows.append((ti, r, se))
        out.check(f"martingale residual t={ti:g} within 3 SE", abs(r) <= 3 * se, f"{r:+.4f} (SE {se:.4f})")
    out.files["martingale.csv"] = _csv(mrows)
    return out


def run_laplace_duality(cfg: ExperimentConfig) -> Outcome:
    from .cloud import ParticleCloud
    from .loglap import FieldState, laplace_functional_compare, recommended_half_width, smooth_bump, solve_loglap

    params = cfg.params
    l1 = 1.2069  # integral of the unit bump on [-1, 1]
    half = recommended_half_width(params, cfg.t, 1.0, l1)
    n_nodes = 1 << int(math.ceil(math.log2(2.0 * half / 0.0157)))
    phi = FieldState.from_function(smooth_bump, half, n_nodes)
    mu = ParticleCloud.point_mass(scale_n=cfg.n_particles)
    res = laplace_functional_compare(params, mu, phi, cfg.t, cfg.replicates, cfg.seed,
                                     scale_n=cfg.n_particles, workers=cfg.workers)
    res.update(half_width=half, n_nodes=n_nodes, dt=5e-3)
    out = Outcome(files={"duality.json": _json(res)},
                  seeds={"superprocess": _seed_list(cfg.seed, "superprocess", cfg.replicates)})
    u = solve_loglap(params, phi, cfg.t, 5e-3, check_refinement=False)
    near = np.abs(u.grid) <= 5.0
    out.files["field.csv"] = _csv([("x", "u")] + np.column_stack([u.grid[near], u.values[near]]).tolist())
    gap = abs(res["mc_mean"] - res["pde_target"])
    out.check("|MC - PDE| <= 3 SE", gap <= 3 * res["mc_se"], f"{gap:.4f} vs 3 SE {3 * res['mc_se']:.4f}")
    return out


def run_compensator(cfg: ExperimentConfig) -> Outcome:
    from .cloud import ParticleCloud
    from .superprocess import compensator_tail_check, run_replicates

    params = cfg.params
    mu = ParticleCloud.point_mass(scale_n=cfg.n_particles)
    results = run_replicates(params, mu, cfg.t, cfg.n_particles, cfg.replicates, cfg.seed,
                             keep_cloud=False, workers=cfg.workers)
    kept = [r for r in results if not r.censored]
    logs = [r.jumps for r in kept]
    integral = float(sum(r.mass_integral for r in kept))
    r_lo = max(0.01, 10.0 / cfg.n_particles)
    r0s = np.geomspace(r_lo, 10 * r_lo, 6)
    outcome = Outcome(seeds={"superprocess": _seed_list(cfg.seed, "superprocess", cfg.replicates)})
    rows = [("r0", "observed", "predicted", "z")]
    obs = []
    for r0 in r0s:
        c = compensator_tail_check(logs, integral, params, float(r0))
        rows.append((c["r0"], c["observed"], c["predicted"], c["z"]))
        obs.append(c["observed"])
        outcome.check(f"count r0={r0:.4g} within 3 sqrt(predicted)",
                      abs(c["observed"] - c["predicted"]) <= 3 * math.sqrt(c["predicted"]),
                      f"observed {c['observed']} predicted {c['predicted']:.1f}")
    obs = np.asarray(obs, dtype=float)
    if np.all(obs > 0):
        slope = float(np.polyfit(np.log(r0s), np.log(obs), 1)[0])
        outcome.check("log-log slope within -(1+beta) +/- 0.15", abs(slope + 1 + cfg.beta) <= 0.15,
                      f"slope {slope:.4f}")
    else:
        slope = None
        outcome.check("log-log slope within -(1+beta) +/- 0.15", False, "zero counts")
    outcome.files["compensator.csv"] = _csv(rows)
    outcome.files["compensator.json"] = _json({"slope": slope, "target_slope": -(1 + cfg.beta),
                                               "mass_integral": integral, "n_replicates": len(kept),
                                               "n_censored": len(results) - len(kept)})
    jrows = [("replicate", "s", "x", "r")]
    for r in kept:
        jrows.extend((r.replicate, s, x, m) for s, x, m in r.jumps)
    outcome.files["jumps.csv"] = _csv(jrows)
    outcome.files["replicates.ndjson"] = "".join(json.dumps(r.record(), sort_keys=True) + "\n" for r in results)
    return outcome


JUMP_TAIL_THRESHOLDS = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0)


def run_jump_tail(cfg: ExperimentConfig) -> Outcome:
    from .superprocess import jump_mass_event_probability

    gamma = 1.0 / (2.0 * (1.0 + cfg.beta))
    probs = jump_mass_event_probability(cfg.params, cfg.t, gamma, JUMP_TAIL_THRESHOLDS, cfg.replicates,
                                        cfg.seed, scale_n=cfg.n_particles, workers=cfg.workers)
    out = Outcome(seeds={"superprocess": _seed_list(cfg.seed, "superprocess", cfg.replicates)})
    out.files["jump_tail.csv"] = _csv([("c_threshold", "probability")] + list(zip(JUMP_TAIL_THRESHOLDS, probs)))
    out.check("non-increasing in c", bool(np.all(np.diff(probs) <= 0)), " ".join(f"{p:.3f}" for p in probs))
    out.check("probability < 0.05 at largest c", probs[-1] < 0.05, f"{probs[-1]:.3f}")
    return out


def run_dichotomy(cfg: ExperimentConfig) -> Outcome:
    from .density import refine_max_scan, scan_csv_rows

    n_list = [cfg.n_particles // 100, cfg.n_particles // 10, cfg.n_particles]
    if n_list[0] < 1000:
        raise ConfigParseError("dichotomy needs n_particles >= 100000 (scan over N/100, N/10, N)")
    rows = refine_max_scan(cfg.params, cfg.t, (-2.0, 2.0), n_list, cfg.replicates, cfg.seed,
                           n_nodes=1601, workers=cfg.workers)
    out = Outcome(files={"dichotomy.csv": _csv(scan_csv_rows(rows))},
                  seeds={f"superprocess[N={n}]": _seed_list(hash64(cfg.seed, "scan", n), "superprocess", cfg.replicates)
                         for n in n_list})
    med = [r.median_max for r in rows]
    if cfg.params.continuity_regime:
        ratio = med[-1] / med[0]
        out.check("median max stabilises (last/first < 2)", ratio < 2.0, f"ratio {ratio:.3f}")
    else:
        out.check("median max strictly increasing", all(b > a for a, b in zip(med, med[1:])),
                  " ".join(f"{m:.4g}" for m in med))
    return out


def run_exponents(cfg: ExperimentConfig) -> Outcome:
    from .regularity import exponent_experiment

    rep = exponent_experiment(cfg.params, cfg.t, cfg.z, cfg.n_particles, cfg.replicates, cfg.seed,
                              workers=cfg.workers)
    out = Outcome(files={"exponents.json": _json(rep.to_dict()), "exponents.csv": _csv(rep.csv_rows())},
                  seeds={"superprocess": _seed_list(cfg.seed, "superprocess", cfg.replicates)})
    eta = rep.targets["eta_c"]
    loc, pw = rep.local["median"], rep.pointwise["median"]
    out.check(f"local median in [{eta - 0.15:.3g}, {eta + 0.25:.3g}]", eta - 0.15 <= loc <= eta + 0.25, f"{loc:.4f}")
    out.check("pointwise median > local median (10% bootstrap)", rep.ordering["significant"],
              f"p={rep.ordering['p_value']:.4f}")
    out.check(f"pointwise median >= {eta + 0.2:.3g}", pw >= eta + 0.2, f"{pw:.4f}")
    return out


RUNNERS = {
    "kernel-table": run_kernel_table,
    "stable-check": run_stable_check,
    "laplace-duality": run_laplace_duality,
    "compensator": run_compensator,
    "jump-tail": run_jump_tail,
    "dichotomy": run_dichotomy,
    "exponents": run_exponents,
}


# ---------------------------------------------------------------------------
# orchestration


def run(cfg: ExperimentConfig) -> int:
    """Validate, compute and write every artifact into ``cfg.out``."""
    cfg.validate()
    outcome = RUNNERS[cfg.experiment](cfg)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(outcome.files.items()):
        (out_dir / name).write_text(text)
    manifest = {
        "toolkit": "superholder",
        "version": __version__,
        "config": cfg.to_dict(),
        "seeding_scheme": SCHEME,
        "replicate_seeds": outcome.seeds,
        "files": sorted(outcome.files),
    }
    (out_dir / "manifest.json").write_text(_json(manifest))
    lines = [f"experiment: {cfg.experiment}", f"parameters: alpha={cfg.alpha:g} beta={cfg.beta:g} "
             f"a={cfg.a:g} b={cfg.b:g} t={cfg.t:g} N={cfg.n_particles} replicates={cfg.replicates} seed={cfg.seed}"]
    for name, ok, detail in outcome.checks:
        lines.append(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    lines.extend(outcome.notes)
    (out_dir / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if all(ok for _, ok, _ in outcome.checks) else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="superholder", description=__doc__)
    p.add_argument("experiment", nargs="?", choices=EXPERIMENTS)
    p.add_argument("--config", help="key=value configuration file (flags take precedence)")
    for name, kind in (("alpha", float), ("beta", float), ("a", float), ("b", float), ("t", float),
                       ("n-particles", int), ("replicates", int), ("seed", int), ("out", str),
                       ("workers", int), ("kappa", float), ("z", float)):
        p.add_argument(f"--{name}", type=kind, default=None)
    return p


def parse_config(argv=None) -> ExperimentConfig:
    args = vars(build_parser().parse_args(argv))
    path = args.pop("config")
    file_values = read_config_file(path) if path else {}
    return build_config(file_values, args)


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
        return run(cfg)
    except (ConfigParseError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ToolkitError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
