"""Acceptance suite: every release criterion at its stated tolerance.

Each test prints one PASS/FAIL line (run with ``pytest -s`` to see them
inline).  Monte Carlo criteria use fixed seeds, so the suite is
deterministic end to end.
"""

import math

import numpy as np
import pytest
from scipy import stats

from surface_dpp.bases import min_resolution, sphere_basis, torus_theta_basis
from surface_dpp.geometry import make_sphere, make_torus, quadrature_grid, sphere_embed
from surface_dpp.kernels import (
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
from surface_dpp.mcstats import (
    batch_statistics,
    clt_check,
    concentration_bound,
    empirical_tail,
    tail_not_exceeding,
)
from surface_dpp.presets import make_phi
from surface_dpp.sampling import (
    Configuration,
    log_joint_density_product,
    log_joint_density_slater,
    sample_batch,
    z_n,
)
from surface_dpp.toeplitz import (
    dirichlet_norm_sq,
    fluctuation_log_mgf,
    log_expectation,
    mt_gap,
    szego_defect,
    variance_exact,
)

SPHERE = make_sphere(1.0)
TORUS = make_torus(1j, 1.0)
COS = make_phi("cos-theta")
DN2 = 2.0 / 3.0


def _report(num: int, name: str, passed: bool, detail: str) -> None:
    print(f"ACCEPTANCE {num:02d} {name}: {'PASS' if passed else 'FAIL'} ({detail})")
    assert passed, f"criterion {num} ({name}): {detail}"


@pytest.fixture(scope="module")
def clt_batch():
    basis = sphere_basis(SPHERE, 31)
    return sample_batch(basis, "ChainRule", 2000, 123456)


@pytest.fixture(scope="module")
def tail_batches():
    out = {}
    for N in [8, 16, 32]:
        basis = sphere_basis(SPHERE, N - 1)
        out[N] = sample_batch(basis, "ChainRule", 2000, 5000 + N)
    return out


def test_01_dimension_law():
    ok = all(sphere_basis(SPHERE, k).N == k + 1 for k in range(1, 65))
    ok &= all(torus_theta_basis(TORUS, k).N == k for k in range(2, 33))
    _report(1, "dimension-law", ok, "N = kV - (g-1), sphere k=1..64, torus k=2..32")


def test_02_sphere_bergman_constant():
    grid = quadrature_grid(SPHERE, 24)
    worst = 0.0
    for k in [1, 2, 4, 8, 16, 32, 64]:
        B = global_kernel(sphere_basis(SPHERE, k)).bergman(grid.points)
        worst = max(worst, float(np.abs(B - (k + 1)).max()))
    _report(2, "sphere-bergman-constant", worst < 1e-9, f"sup deviation {worst:.3e} < 1e-9")


def test_03_torus_bergman_decay():
    ks = list(range(8, 41, 4))
    errs = [torus_bergman_sup_error(TORUS, k) for k in ks]
    fit = fit_decay(ks, errs)
    oracle = torus_decay_oracle(TORUS)
    ratio = fit.rate / oracle
    ok = abs(ratio - 1.0) <= 0.15 and bool(np.all(np.diff(errs) < 0))
    _report(3, "torus-bergman-decay", ok,
            f"rate {fit.rate:.6f} vs lattice oracle {oracle:.6f}, ratio {ratio:.4f}")


def test_04_local_model_decay():
    R, eps = -2.0, 0.3
    ks = list(range(20, 121, 10))
    errs = [local_reproduce_error([1.0], k, eps, R) for k in ks]
    fit = fit_decay(ks, errs)
    ref = float(model_weight(R, np.array([eps]))[0].real)
    ratio = fit.rate / ref
    _report(4, "local-model-decay", abs(ratio - 1.0) <= 0.15,
            f"rate {fit.rate:.6f} vs weight-at-eps^2 {ref:.6f}, ratio {ratio:.4f}")


def test_05_mobius_identities():
    rng = np.random.default_rng(77)
    worst = 0.0
    for R in [-2.0, -0.5, 2.0]:
        rad = 0.45 / math.sqrt(abs(R))
        z = rad * np.sqrt(rng.uniform(0, 1, 1000)) * np.exp(2j * np.pi * rng.uniform(0, 1, 1000))
        w = rad * np.sqrt(rng.uniform(0, 1, 1000)) * np.exp(2j * np.pi * rng.uniform(0, 1, 1000))
        inv = float(np.abs(mobius_map(z, mobius_map(z, w, R), R) - w).max())
        pol = float(np.abs(psi(np.conj(z), z, R) - model_weight(R, z)).max())
        r1, r2 = relation_residuals(z, w, R)
        worst = max(worst, inv, pol, r1, r2)
    _report(5, "mobius-identities", worst < 1e-12, f"max residual {worst:.3e} < 1e-12")


def test_06_scaling_identity():
    rng = np.random.default_rng(11)
    basis = sphere_basis(SPHERE, 7)
    grid = quadrature_grid(SPHERE, 48)
    worst = 0.0
    for trial in range(5):
        phi = make_phi(f"harmonic:3,{trial}")
        c = float(rng.uniform(-2, 2))
        vals = phi.values_chart(grid.points)
        resid = abs(log_expectation(basis, vals + c, grid)
                    - (log_expectation(basis, vals, grid) - basis.N * c))
        worst = max(worst, resid)
    _report(6, "scaling-identity", worst <= 1e-12, f"max residual {worst:.3e} <= 1e-12")


def test_07_moser_trudinger():
    min_gap = math.inf
    for N in [2, 4, 8, 16, 32]:
        basis = sphere_basis(SPHERE, N - 1)
        grid = quadrature_grid(SPHERE, max(min_resolution(SPHERE, N - 1), 48))
        for f_idx in range(20):
            phi0 = make_phi(f"harmonic:4,{100 + f_idx}")
            for amp in [0.5, 1.0, 2.0, 4.0]:
                min_gap = min(min_gap, mt_gap(basis, phi0.scaled(amp), grid))
    _report(7, "moser-trudinger", min_gap >= -1e-8,
            f"min gap {min_gap:.3e} >= -1e-8 over 20 functions x 4 amplitudes x 5 N")


def test_08_strong_szego():
    defects = {}
    for N in [8, 64]:
        basis = sphere_basis(SPHERE, N - 1)
        grid = quadrature_grid(SPHERE, max(N + 1, 48))
        defects[N] = abs(szego_defect(basis, COS, grid))
    ok = defects[64] < defects[8] and defects[64] < 0.05
    _report(8, "strong-szego", ok,
            f"|defect| {defects[8]:.4f} -> {defects[64]:.4f}; reference value 1/3")


def test_09_variance_convergence():
    ratios = []
    for N in [8, 16, 32, 64]:
        basis = sphere_basis(SPHERE, N - 1)
        grid = quadrature_grid(SPHERE, max(N + 1, 48))
        ratios.append(variance_exact(basis, COS, grid) / DN2)
    ok = 0.9 <= ratios[-1] <= 1.01 and bool(np.all(np.diff(ratios) > 0))
    _report(9, "variance-convergence", ok,
            f"ratios {[f'{r:.4f}' for r in ratios]}, final in [0.9, 1.01], increasing")


def test_10_clt_monte_carlo(clt_batch):
    basis = sphere_basis(SPHERE, 31)
    grid = quadrature_grid(SPHERE, 48)
    var = variance_exact(basis, COS, grid)
    rep = clt_check(clt_batch, COS, var, DN2)
    ok = abs(rep.empirical_variance / var - 1.0) <= 0.10 and rep.ks_pvalue > 0.01
    _report(10, "clt-monte-carlo", ok,
            f"N=32, 2000 replicas: var ratio {rep.empirical_variance / var:.4f} "
            f"(within 10%), KS p = {rep.ks_pvalue:.4f} > 0.01")


def test_11_sampler_agreement():
    basis = sphere_basis(SPHERE, 7)
    chain = sample_batch(basis, "ChainRule", 5000, 424242)
    eig = sample_batch(8, "EigenvalueModel", 5000, 424243)
    ks = stats.ks_2samp(batch_statistics(chain, COS), batch_statistics(eig, COS))
    _report(11, "sampler-agreement", ks.pvalue > 0.01,
            f"N=8, 5000 vs 5000, two-sample KS p = {ks.pvalue:.4f} > 0.01")


def test_12_tail_bound(tail_batches):
    # deterministic side: quadratic domination of the fluctuation log-MGF
    worst_margin = -math.inf
    for N in [8, 16, 32]:
        basis = sphere_basis(SPHERE, N - 1)
        grid = quadrature_grid(SPHERE, max(N + 1, 64))
        for t in np.linspace(-4.0, 4.0, 33):
            lhs = float(np.real(fluctuation_log_mgf(basis, COS, -t, grid)))
            rhs = (N / (N + 1.0)) * t * t * DN2 / 2.0
            worst_margin = max(worst_margin, lhs - rhs)
    det_ok = worst_margin <= 1e-8
    # Monte Carlo side: empirical tails never significantly exceed the bound
    mc_ok = True
    for N, batch in tail_batches.items():
        for lam in [0.02, 0.05, 0.1]:
            est = empirical_tail(batch, COS, lam)
            mc_ok &= tail_not_exceeding(est, concentration_bound(N, lam, DN2))
    _report(12, "tail-bound", det_ok and mc_ok,
            f"max MGF margin {worst_margin:.3e} <= 1e-8; "
            f"MC non-exceedance at 99% for lambda in {{0.02,0.05,0.1}}, N in {{8,16,32}}")


def test_13_density_normalization():
    grid = quadrature_grid(SPHERE, 24)
    x = sphere_embed(grid.points)
    d2 = np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=-1)
    pair = float(np.einsum("a,b,ab->", grid.nu_weights, grid.nu_weights, d2 / 4.0) / z_n(2))
    pair_ok = abs(pair - 1.0) < 1e-8

    rng = np.random.default_rng(999)
    u = rng.uniform(-1, 1, (400_000, 3))
    ang = rng.uniform(0, 2 * np.pi, (400_000, 3))
    st = np.sqrt(1 - u * u)
    pts = np.stack([st * np.cos(ang), st * np.sin(ang), u], axis=-1)
    prods = (np.sum((pts[:, 0] - pts[:, 1]) ** 2, -1) / 4
             * np.sum((pts[:, 0] - pts[:, 2]) ** 2, -1) / 4
             * np.sum((pts[:, 1] - pts[:, 2]) ** 2, -1) / 4)
    z3_ok = abs(float(prods.mean()) / z_n(3) - 1.0) < 0.02

    basis = sphere_basis(SPHERE, 3)
    worst = 0.0
    for _ in range(50):
        z = rng.normal(size=4) + 1j * rng.normal(size=4)
        cfg = Configuration(z, 3, SPHERE)
        a = log_joint_density_slater(cfg, basis)
        b = log_joint_density_product(cfg)
        worst = max(worst, abs(a - b) / max(1.0, abs(b)))
    slater_ok = worst < 1e-10
    _report(13, "density-normalization", pair_ok and z3_ok and slater_ok,
            f"int rho2 = {pair:.12f}; Z3 MC ratio {float(prods.mean()) / z_n(3):.4f}; "
            f"Slater vs product max rel dev {worst:.2e}")
