"""Reproducible experiment suites with machine-readable reports.

Every suite is addressed by an experiment id, consumes a flat key=value
configuration plus a master seed, and emits CSV tables (17 significant
digit floats, schema-versioned header comment) together with a JSON
report carrying one pass/fail entry per asserted criterion.  Identical
configuration and seed reproduce the CSV byte-for-byte.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bases import sphere_basis, torus_theta_basis
from .geometry import make_sphere, make_torus, quadrature_grid, sphere_embed
from .kernels import (
    fit_decay,
    global_kernel,
    local_reproduce_error,
    mobius_map,
    model_weight,
    psi,
    relation_residuals,
    torus_bergman_sup_error,
    torus_decay_oracle,
)
from .mcstats import (
    batch_statistics,
    clt_check,
    concentration_bound,
    empirical_tail,
    tail_not_exceeding,
)
from .presets import EXPERIMENT_DESCRIPTIONS, make_phi
from .sampling import (
    Configuration,
    log_joint_density_product,
    log_joint_density_slater,
    sample_batch,
    z_n,
)
from .toeplitz import (
    dirichlet_norm_sq,
    fluctuation_log_mgf,
    log_expectation,
    szego_defect,
    mt_gap,
    variance_exact,
)

CSV_SCHEMA = "surface-dpp-csv/1"


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict[str, str] = field(default_factory=dict)
    seed: int = 0

    def get_int(self, key: str, default: int) -> int:
        try:
            return int(self.params.get(key, default))
        except ValueError as exc:
            raise ConfigError(f"{key} must be an integer") from exc

    def get_float(self, key: str, default: float) -> float:
        try:
            return float(self.params.get(key, default))
        except ValueError as exc:
            raise ConfigError(f"{key} must be a number") from exc

    def get_str(self, key: str, default: str) -> str:
        return str(self.params.get(key, default))

    def get_int_list(self, key: str, default: list[int]) -> list[int]:
        raw = self.params.get(key)
        if raw is None:
            return list(default)
        try:
            return [int(tok) for tok in str(raw).split(",") if tok.strip()]
        except ValueError as exc:
            raise ConfigError(f"{key} must be a comma list of integers") from exc

    def get_float_list(self, key: str, default: list[float]) -> list[float]:
        raw = self.params.get(key)
        if raw is None:
            return list(default)
        try:
            return [float(tok) for tok in str(raw).split(",") if tok.strip()]
        except ValueError as exc:
            raise ConfigError(f"{key} must be a comma list of numbers") from exc


@dataclass
class CriterionResult:
    name: str
    passed: bool
    value: float
    threshold: str

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed),
                "value": float(self.value), "threshold": self.threshold}


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    seed: int
    criteria: list[CriterionResult]
    rows: dict[str, list[dict]]
    wall_clock_s: float
    version: str = __version__

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def as_dict(self) -> dict:
        return _jsonify({
            "experiment": self.experiment,
            "config": self.config,
            "seed": self.seed,
            "passed": self.passed,
            "criteria": [c.as_dict() for c in self.criteria],
            "rows": self.rows,
            "wall_clock_s": self.wall_clock_s,
            "version": self.version,
        })


def _jsonify(obj):
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def rows_to_csv(experiment: str, table: str, rows: list[dict]) -> str:
    header = f"# schema={CSV_SCHEMA} experiment={experiment} table={table}\n"
    if not rows:
        return header
    cols = list(rows[0].keys())
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in cols))
    return header + "\n".join(lines) + "\n"


def report_files(report: ExperimentReport) -> dict[str, str]:
    return {
        f"{report.experiment}-{table}.csv": rows_to_csv(report.experiment, table, rows)
        for table, rows in report.rows.items()
    }


# ---------------------------------------------------------------------------
# suites

def _run_bergman_decay(cfg: ExperimentConfig) -> tuple[list[CriterionResult], dict]:
    variant = cfg.get_str("variant", "all")
    criteria: list[CriterionResult] = []
    rows: dict[str, list[dict]] = {}

    if variant in ("all", "sphere"):
        sphere = make_sphere(cfg.get_float("volume", 1.0))
        ks = cfg.get_int_list("sphere_k", [1, 2, 4, 8, 16, 32, 64])
        grid = quadrature_grid(sphere, 24)
        table = []
        worst = 0.0
        for k in ks:
            B = global_kernel(sphere_basis(sphere, k)).bergman(grid.points)
            dev = float(np.max(np.abs(B - (k + 1))))
            worst = max(worst, dev)
            table.append({"k": k, "sup_deviation": dev})
        rows["sphere-constancy"] = table
        criteria.append(CriterionResult("sphere-bergman-constant", worst < 1e-9, worst, "< 1e-9"))

        dims = []
        dim_ok = True
        for k in range(1, 65):
            N = sphere_basis(sphere, k).N
            dim_ok &= N == k + 1
            dims.append({"model": "sphere", "k": k, "N": N, "expected": k + 1})
        torus = make_torus(1j)
        for k in range(2, 33):
            N = torus_theta_basis(torus, k).N
            dim_ok &= N == k
            dims.append({"model": "torus", "k": k, "N": N, "expected": k})
        rows["dimension-law"] = dims
        criteria.append(CriterionResult("dimension-law", dim_ok, float(dim_ok), "exact"))

    if variant in ("all", "torus"):
        torus = make_torus(complex(cfg.get_float("tau_re", 0.0), cfg.get_float("tau_im", 1.0)))
        ks = cfg.get_int_list("torus_k", list(range(8, 41, 4)))
        errs = [torus_bergman_sup_error(torus, k) for k in ks]
        fit = fit_decay(ks, errs)
        oracle = torus_decay_oracle(torus)
        rows["torus-decay"] = [
            {"k": k, "error": e, "model": "flat-torus", "parameters": f"tau={torus.tau}"}
            for k, e in zip(ks, errs)
        ]
        rows["torus-fit"] = [{
            "rate": fit.rate, "oracle": oracle, "ratio": fit.rate / oracle,
            "fit_residual": fit.residual,
        }]
        ok = abs(fit.rate / oracle - 1.0) <= 0.15 and all(np.diff(errs) < 0)
        criteria.append(CriterionResult("torus-decay-rate", ok, fit.rate / oracle,
                                        "rate/oracle in [0.85, 1.15], errors decreasing"))

    if variant in ("all", "local"):
        R = cfg.get_float("local_R", -2.0)
        eps = cfg.get_float("local_eps", 0.3)
        ks = cfg.get_int_list("local_k", list(range(20, 121, 10)))
        errs = [local_reproduce_error([1.0], k, eps, R) for k in ks]
        fit = fit_decay(ks, errs)
        ref = float(np.real(model_weight(R, eps)))
        rows["local-decay"] = [
            {"k": k, "error": e, "model": "local-chart", "parameters": f"R={R:g},eps={eps:g}"}
            for k, e in zip(ks, errs)
        ]
        rows["local-fit"] = [{"rate": fit.rate, "reference": ref, "ratio": fit.rate / ref}]
        ok = abs(fit.rate / ref - 1.0) <= 0.15
        criteria.append(CriterionResult("local-decay-rate", ok, fit.rate / ref,
                                        "rate/Phi(eps^2) in [0.85, 1.15]"))
    return criteria, rows


def _run_mobius(cfg: ExperimentConfig) -> tuple[list[CriterionResult], dict]:
    n = cfg.get_int("samples", 1000)
    curvatures = cfg.get_float_list("curvatures", [-2.0, -0.5, 2.0])
    rng = np.random.default_rng(cfg.seed)
    rows = []
    criteria = []
    for R in curvatures:
        # radius keeps z, w and the Moebius image zeta principal-branch
        # admissible for either curvature sign
        radius = 0.45 / math.sqrt(abs(R))
        zs = radius * np.sqrt(rng.uniform(0, 1, n)) * np.exp(2j * np.pi * rng.uniform(0, 1, n))
        ws = radius * np.sqrt(rng.uniform(0, 1, n)) * np.exp(2j * np.pi * rng.uniform(0, 1, n))
        inv = float(np.max(np.abs(mobius_map(zs, mobius_map(zs, ws, R), R) - ws)))
        pol = float(np.max(np.abs(psi(np.conj(zs), zs, R) - model_weight(R, zs))))
        r1, r2 = relation_residuals(zs, ws, R)
        rows.append({"R": R, "involution": inv, "polarization": pol,
                     "relation_1": r1, "relation_2": r2})
        worst = max(inv, pol, r1, r2)
        criteria.append(CriterionResult(f"identities-R={R:g}", worst < 1e-12, worst, "< 1e-12"))
    return criteria, {"residuals": rows}


def _run_mt_check(cfg: ExperimentConfig) -> tuple[list[CriterionResult], dict]:
    sphere = make_sphere(1.0)
    criteria = []
    rows: dict[str, list[dict]] = {}

    # determinant scaling under constant shifts
    rng = np.random.default_rng(cfg.seed)
    scal_rows = []
    worst = 0.0
    for trial in range(cfg.get_int("scaling_trials", 5)):
        N = int(rng.choice([2, 5, 9]))
        basis = sphere_basis(sphere, N - 1)
        grid = quadrature_grid(sphere, max(N + 1, 48))
        phi = make_phi(f"harmonic:3,{cfg.seed + trial}")
        c = float(rng.uniform(-1.5, 1.5))
        base = log_expectation(basis, phi, grid)
        vals = phi.values_chart(grid.points, 1.0)
        shifted = log_expectation(basis, vals + c, grid)
        resid = abs(shifted - (base - basis.N * c))
        worst = max(worst, resid)
        scal_rows.append({"trial": trial, "N": basis.N, "shift": c, "residual": resid})
    rows["scaling"] = scal_rows
    criteria.append(CriterionResult("scaling-identity", worst <= 1e-12, worst, "<= 1e-12"))

    # inequality over the function family
    n_funcs = cfg.get_int("family_size", 20)
    amps = cfg.get_float_list("amplitudes", [0.5, 1.0, 2.0, 4.0])
    n_values = cfg.get_int_list("n_values", [2, 4, 8, 16, 32])
    bandlimit = cfg.get_int("bandlimit", 4)
    fam_rows = []
    min_gap = math.inf
    for N in n_values:
        basis = sphere_basis(sphere, N - 1)
        grid = quadrature_grid(sphere, max(N + 1, 48))
        for f_idx in range(n_funcs):
            phi0 = make_phi(f"harmonic:{bandlimit},{cfg.seed + 100 + f_idx}")
            for amp in amps:
                gap = mt_gap(basis, phi0.scaled(amp), grid)
                min_gap = min(min_gap, gap)
                fam_rows.append({"N": N, "function": f_idx, "amplitude": amp, "gap": gap})
    rows["mt-gaps"] = fam_rows
    criteria.append(CriterionResult("mt-inequality", min_gap >= -1e-8, min_gap, ">= -1e-8"))
    return criteria, rows


def _run_szego(cfg: ExperimentConfig) -> tuple[list[CriterionResult], dict]:
    sphere = make_sphere(1.0)
    phi = make_phi(cfg.get_str("phi", "cos-theta"))
    n_values = cfg.get_int_list("n_values", [8, 16, 32, 64])
    table = []
    defects = []
    for N in n_values:
        basis = sphere_basis(sphere, N - 1)
        grid = quadrature_grid(sphere, max(N + 1, 48))
        d = float(szego_defect(basis, phi, grid))
        dn2 = float(np.real(dirichlet_norm_sq(phi)))
        defects.append(abs(d))
        table.append({"N": N, "defect": d, "abs_defect": abs(d), "half_dirichlet": 0.5 * dn2})
    criteria = [
        CriterionResult("szego-shrinks", defects[-1] < defects[0], defects[-1] / defects[0],
                        "|defect(N_max)| < |defect(N_min)|"),
        CriterionResult("szego-small-at-max", defects[-1] < 0.05, defects[-1], "< 0.05"),
    ]
    return criteria, {"defects": table}


def _run_variance(cfg: ExperimentConfig) -> tuple[list[CriterionResult], dict]:
    sphere = make_sphere(1.0)
    phi = make_phi(cfg.get_str("phi", "cos-theta"))
    n_values = cfg.get_int_list("n_values", [8, 16, 32, 64])
    dn2 = float(np.real(dirichlet_norm_sq(phi)))
    table = []
    ratios = []
    for N in n_values:
        basis = sphere_basis(sphere, N - 1)
        grid = quadrature_grid(sphere, max(N + 1, 48))
        var = variance_exact(basis, phi, grid)
        ratios.append(var / dn2)
        table.append({"N": N, "variance": var, "dirichlet_sq": dn2, "ratio": var / dn2})
    increasing = bool(np.all(np.diff(ratios) > 0))
    final = ratios[-1]
    criteria = [
        CriterionResult("variance-ratio-window", 0.9 <= final <= 1.01, final, "in [0.9, 1.01]"),
        CriterionResult("variance-ratio-increasing", increasing, float(increasing), "monotone"),
    ]
    return criteria, {"variance": table}


def _run_clt(cfg: ExperimentConfig) -> tuple[list[CriterionResult], dict]:
    sphere = make_sphere(1.0)
    phi = make_phi(cfg.get_str("phi", "cos-theta"))
    N = cfg.get_int("n_points", 32)
    replicas = cfg.get_int("replicas", 2000)
    sampler = cfg.get_str("sampler", "ChainRule")
    basis = sphere_basis(sphere, N - 1)
    grid = quadrature_grid(sphere, max(N + 1, 48))
    var = variance_exact(basis, phi, grid)
    dn2 = float(np.real(dirichlet_norm_sq(phi)))
    mean = float(np.real(np.sum(phi.values_chart(grid.points, 1.0) * grid.nu_weights)))
    batch = sample_batch(basis if sampler == "ChainRule" else N, sampler, replicas, cfg.seed)
    report = clt_check(batch, phi, var, dn2, centering=mean)
    rows = {
        "clt-report": [report.as_dict()],
        "statistics": [
            {"replica": c.replica, "value": float(v)}
            for c, v in zip(batch.configurations, batch_statistics(batch, phi))
        ],
    }
    rel_var = abs(report.empirical_variance / var - 1.0)
    criteria = [
        CriterionResult("clt-variance-10pct", rel_var <= 0.10, rel_var, "<= 0.10"),
        CriterionResult("clt-ks-pvalue", report.ks_pvalue > 0.01, report.ks_pvalue, "> 0.01"),
    ]
    return criteria, rows


def _run_sampler_agreement(cfg: ExperimentConfig) -> tuple[list[CriterionResult], dict]:
    from scipy import stats

    sphere = make_sphere(1.0)
    phi = make_phi(cfg.get_str("phi", "cos-theta"))
    N = cfg.get_int("n_points", 8)
    replicas = cfg.get_int("replicas", 5000)
    basis = sphere_basis(sphere, N - 1)
    chain = sample_batch(basis, "ChainRule", replicas, cfg.seed)
    eig = sample_batch(N, "EigenvalueModel", replicas, cfg.seed + 1)
    s_chain = batch_statistics(chain, phi)
    s_eig = batch_statistics(eig, phi)
    ks = stats.ks_2samp(s_chain, s_eig)
    criteria = [
        CriterionResult("two-sampler-ks", ks.pvalue > 0.01, float(ks.pvalue), "> 0.01"),
    ]
    rows: dict[str, list[dict]] = {
        "agreement": [{
            "N": N, "replicas": replicas, "ks_statistic": float(ks.statistic),
            "ks_pvalue": float(ks.pvalue),
            "chain_mean": float(s_chain.mean()), "eig_mean": float(s_eig.mean()),
            "chain_var": float(s_chain.var(ddof=1)), "eig_var": float(s_eig.var(ddof=1)),
        }],
    }

    # joint-density cross checks
    grid = quadrature_grid(sphere, cfg.get_int("density_resolution", 24))
    w = grid.nu_weights
    x = sphere_embed(grid.points)
    d2 = np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=-1)
    norm2 = float(np.einsum("a,b,ab->", w, w, d2 / 4.0) / z_n(2))
    rng = np.random.default_rng(cfg.seed + 2)
    mc_n = cfg.get_int("z3_samples", 400_000)
    z3_est, z3_se = _z3_monte_carlo(rng, mc_n)
    z3 = z_n(3)
    slater_dev = _slater_product_agreement(basis_n4=sphere_basis(sphere, 3), rng=rng,
                                           trials=cfg.get_int("density_trials", 50))
    rows["density"] = [{
        "pair_normalization": norm2, "z3_mc": z3_est, "z3_mc_se": z3_se,
        "z3_exact": z3, "slater_vs_product_max_reldev": slater_dev,
    }]
    criteria += [
        CriterionResult("pair-density-normalized", abs(norm2 - 1.0) < 1e-8,
                        abs(norm2 - 1.0), "|int rho2 - 1| < 1e-8"),
        CriterionResult("z3-normalization-2pct", abs(z3_est / z3 - 1.0) < 0.02,
                        abs(z3_est / z3 - 1.0), "within 2%"),
        CriterionResult("slater-vs-product", slater_dev < 1e-10, slater_dev, "< 1e-10"),
    ]
    return criteria, rows


def _z3_monte_carlo(rng: np.random.Generator, n: int) -> tuple[float, float]:
    """E over nu^3 of prod (|x_i - x_j|/2)^2, estimating Z_3."""
    u = rng.uniform(-1, 1, (n, 3))
    ang = rng.uniform(0, 2 * np.pi, (n, 3))
    st = np.sqrt(1 - u * u)
    x = np.stack([st * np.cos(ang), st * np.sin(ang), u], axis=-1)
    d01 = np.sum((x[:, 0] - x[:, 1]) ** 2, axis=-1) / 4
    d02 = np.sum((x[:, 0] - x[:, 2]) ** 2, axis=-1) / 4
    d12 = np.sum((x[:, 1] - x[:, 2]) ** 2, axis=-1) / 4
    vals = d01 * d02 * d12
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n))


def _slater_product_agreement(basis_n4, rng: np.random.Generator, trials: int) -> float:
    worst = 0.0
    model = basis_n4.model
    for _ in range(trials):
        z = rng.normal(size=4) + 1j * rng.normal(size=4)
        config = Configuration(z, basis_n4.k, model)
        a = log_joint_density_slater(config, basis_n4)
        b = log_joint_density_product(config)
        worst = max(worst, abs(a - b) / max(abs(b), 1.0))
    return worst


def _run_tail_check(cfg: ExperimentConfig) -> tuple[list[CriterionResult], dict]:
    sphere = make_sphere(1.0)
    phi = make_phi(cfg.get_str("phi", "cos-theta"))
    n_values = cfg.get_int_list("n_values", [8, 16, 32])
    t_grid = np.linspace(-4.0, 4.0, cfg.get_int("t_points", 33))
    dn2 = float(np.real(dirichlet_norm_sq(phi)))
    criteria = []
    det_rows = []
    worst_margin = -math.inf
    for N in n_values:
        basis = sphere_basis(sphere, N - 1)
        grid = quadrature_grid(sphere, max(N + 1, 64))
        for t in t_grid:
            lhs = float(np.real(fluctuation_log_mgf(basis, phi, -t, grid)))
            rhs = (N / (N + 1.0)) * t * t * dn2 / 2.0
            margin = lhs - rhs
            worst_margin = max(worst_margin, margin)
            det_rows.append({"N": N, "t": float(t), "log_mgf": lhs, "bound": rhs,
                             "margin": margin})
    criteria.append(CriterionResult("chernoff-domination", worst_margin <= 1e-8,
                                    worst_margin, "log-MGF <= quadratic bound + 1e-8"))

    lams = cfg.get_float_list("lambdas", [0.02, 0.05, 0.1])
    replicas = cfg.get_int("replicas", 2000)
    mc_rows = []
    all_ok = True
    for N in n_values:
        basis = sphere_basis(sphere, N - 1)
        batch = sample_batch(basis, "ChainRule", replicas, cfg.seed + N)
        for lam in lams:
            est = empirical_tail(batch, phi, lam)
            bound = concentration_bound(N, lam, dn2, genus=0)
            ok = tail_not_exceeding(est, bound)
            all_ok &= ok
            mc_rows.append({"N": N, "lambda": lam, "fraction": est.fraction,
                            "ci99_high": est.ci99_high, "bound": bound, "ok": ok})
    criteria.append(CriterionResult("tail-bound-not-exceeded", all_ok, float(all_ok),
                                    "empirical <= bound at 99% binomial level"))
    return criteria, {"chernoff": det_rows, "tail-mc": mc_rows}


_RUNNERS = {
    "bergman-decay": _run_bergman_decay,
    "clt-check": _run_clt,
    "mobius-identities": _run_mobius,
    "mt-check": _run_mt_check,
    "sampler-agreement": _run_sampler_agreement,
    "szego-table": _run_szego,
    "tail-check": _run_tail_check,
    "variance-table": _run_variance,
}

assert set(_RUNNERS) == set(EXPERIMENT_DESCRIPTIONS)


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    if cfg.experiment not in _RUNNERS:
        raise ConfigError(
            f"unknown experiment {cfg.experiment!r}; valid ids: {', '.join(sorted(_RUNNERS))}"
        )
    start = time.perf_counter()
    criteria, rows = _RUNNERS[cfg.experiment](cfg)
    elapsed = time.perf_counter() - start
    return ExperimentReport(
        experiment=cfg.experiment,
        config={"experiment": cfg.experiment, **cfg.params},
        seed=cfg.seed,
        criteria=criteria,
        rows=rows,
        wall_clock_s=elapsed,
    )
