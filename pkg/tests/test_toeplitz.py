import math

import numpy as np
import pytest
from scipy.integrate import quad

from surface_dpp.bases import sphere_basis
from surface_dpp.geometry import make_sphere, quadrature_grid
from surface_dpp.presets import make_phi
from surface_dpp.toeplitz import (
    PositivityError,
    TestFunction,
    dirichlet_norm_sq,
    energy,
    fluctuation_log_mgf,
    harmonic_test_function,
    log_expectation,
    mt_gap,
    process_mean,
    szego_defect,
    toeplitz_matrix,
    variance_exact,
)

COS = make_phi("cos-theta")


def test_test_function_representations_agree(sphere_grid):
    for name in ["cos-theta", "cos-theta-squared"]:
        phi = make_phi(name)
        closed = phi.values_chart(sphere_grid.points)
        synth = TestFunction(name, sh_coeffs=phi.sh_coeffs).values_chart(sphere_grid.points)
        assert np.abs(closed - synth).max() < 1e-10


def test_dirichlet_norm_values(sphere_grid):
    assert dirichlet_norm_sq(COS) == pytest.approx(2.0 / 3.0, rel=1e-14)
    # quadrature oracle: (1/4pi) int sin^2(theta) dA = (1/4pi)(8pi/3)
    assert dirichlet_norm_sq(COS, sphere_grid, method="quadrature") == pytest.approx(
        2.0 / 3.0, abs=1e-12
    )
    const = TestFunction("const", eval_xyz=lambda x: np.full(x.shape[:-1], 2.5),
                         sh_coeffs={(0, 0): 2.5 * math.sqrt(4 * math.pi)})
    assert dirichlet_norm_sq(const) == 0.0


def test_dirichlet_spectral_vs_quadrature(sphere_grid):
    for seed in range(3):
        phi = harmonic_test_function(8, seed)
        spec = dirichlet_norm_sq(phi)
        quadr = dirichlet_norm_sq(phi, sphere_grid, method="quadrature")
        assert abs(spec - quadr) < 1e-9


def test_energy_values(sphere_grid):
    assert energy(COS, sphere_grid) == pytest.approx(-1.0 / 3.0, abs=1e-12)
    c = 1.37
    const = TestFunction("c", eval_xyz=lambda x: np.full(x.shape[:-1], c),
                         sh_coeffs={(0, 0): c * math.sqrt(4 * math.pi)})
    assert energy(const, sphere_grid) == pytest.approx(c, abs=1e-12)
    # affine in constants: E(phi + c) - E(phi) = c
    shifted = TestFunction("cos+c", eval_xyz=lambda x: x[..., 2] + c,
                           sh_coeffs={(1, 0): math.sqrt(4 * math.pi / 3),
                                      (0, 0): c * math.sqrt(4 * math.pi)})
    assert energy(shifted, sphere_grid) - energy(COS, sphere_grid) == pytest.approx(c, abs=1e-12)


def test_log_expectation_zero_and_constant(sphere, sphere_grid):
    basis = sphere_basis(sphere, 7)
    assert abs(log_expectation(basis, 0.0, sphere_grid)) < 1e-12
    c = 0.4321
    assert log_expectation(basis, c, sphere_grid) == pytest.approx(-basis.N * c, abs=1e-12)


def test_scaling_identity(sphere, sphere_grid, rng):
    basis = sphere_basis(sphere, 5)
    vals = 0.3 * sphere_grid.u + 0.1 * np.cos(np.angle(sphere_grid.points))
    base = log_expectation(basis, vals, sphere_grid)
    for _ in range(5):
        c = rng.uniform(-2, 2)
        shifted = log_expectation(basis, vals + c, sphere_grid)
        assert abs(shifted - (base - basis.N * c)) < 1e-12


def test_log_expectation_k1_oracle(sphere, sphere_grid):
    basis = sphere_basis(sphere, 1)
    for t in [0.5, 1.0, 1.7]:
        a_plus = quad(lambda u: math.exp(-t * u) * (1 + u), -1, 1)[0]
        a_minus = quad(lambda u: math.exp(-t * u) * (1 - u), -1, 1)[0]
        got = log_expectation(basis, lambda z, t=t: t * (np.abs(z) ** 2 - 1) / (np.abs(z) ** 2 + 1),
                              sphere_grid)
        assert got == pytest.approx(math.log(0.25 * a_plus * a_minus), abs=1e-12)


def test_positivity_guard(sphere):
    from surface_dpp.geometry import sphere_embed

    basis = sphere_basis(sphere, 24)
    grid = quadrature_grid(sphere, 26)
    # a symbol with huge dynamic range at minimal resolution loses
    # positivity in floating point; this must raise, not silently pass
    with pytest.raises(PositivityError):
        log_expectation(basis, lambda z: 60.0 * sphere_embed(z)[..., 0], grid)


def test_convexity_in_t(sphere, sphere_grid):
    basis = sphere_basis(sphere, 6)
    vals = COS.values_chart(sphere_grid.points)
    f = lambda t: log_expectation(basis, t * vals, sphere_grid)
    for t0 in [-1.0, 0.0, 0.8]:
        h = 0.05
        second = f(t0 + h) - 2 * f(t0) + f(t0 - h)
        assert second >= -1e-9


def test_fluctuation_log_mgf_basics(sphere, sphere_grid):
    basis = sphere_basis(sphere, 9)
    assert abs(fluctuation_log_mgf(basis, COS, 0.0, sphere_grid)) < 1e-12
    # centered statistic: derivative at t = 0 vanishes
    h = 1e-4
    d = (fluctuation_log_mgf(basis, COS, h, sphere_grid, "mean-process")
         - fluctuation_log_mgf(basis, COS, -h, sphere_grid, "mean-process")) / (2 * h)
    assert abs(d) < 1e-6
    # the two centerings agree on the sphere (constant intensity)
    for t in [0.5, 1.0]:
        a = fluctuation_log_mgf(basis, COS, t, sphere_grid, "mean-omega")
        b = fluctuation_log_mgf(basis, COS, t, sphere_grid, "mean-process")
        assert abs(a - b) < 1e-10


def test_process_mean_is_intensity_integral(sphere, sphere_grid):
    basis = sphere_basis(sphere, 4)
    # constant intensity: E sum phi = N * area average
    mean = process_mean(basis, COS, sphere_grid)
    assert abs(mean) < 1e-12
    one = process_mean(basis, lambda z: np.ones_like(z, dtype=float), sphere_grid)
    assert one == pytest.approx(basis.N, abs=1e-10)


def test_variance_exact_values(sphere, sphere_grid):
    # single-point process: Var = int phi^2 - (int phi)^2 = 1/3 for the height
    basis0 = sphere_basis(sphere, 0)
    assert variance_exact(basis0, COS, sphere_grid) == pytest.approx(1.0 / 3.0, abs=1e-10)
    const = np.full(sphere_grid.points.shape, 3.3)
    assert variance_exact(basis0, const, sphere_grid) == pytest.approx(0.0, abs=1e-12)
    # finite-difference cross-check of the trace formula
    basis = sphere_basis(sphere, 8)
    var = variance_exact(basis, COS, sphere_grid)
    h = 1e-3
    f = lambda t: fluctuation_log_mgf(basis, COS, t, sphere_grid)
    fd = (f(h) - 2 * f(0.0) + f(-h)) / (h * h)
    assert abs(var - fd) < 1e-6


def test_variance_ratio_matches_exact_formula(sphere, sphere_grid):
    # for the height function the trace variance is exactly (N/(N+1)) ||d phi||^2
    for N in [2, 8, 32]:
        basis = sphere_basis(sphere, N - 1)
        var = variance_exact(basis, COS, sphere_grid)
        assert var == pytest.approx(N / (N + 1) * 2.0 / 3.0, abs=1e-10)


def test_mt_gap_examples(sphere, sphere_grid):
    basis8 = sphere_basis(sphere, 7)
    zero = TestFunction("zero", eval_xyz=lambda x: np.zeros(x.shape[:-1]),
                        sh_coeffs={(1, 0): 0.0})
    assert abs(mt_gap(basis8, zero, sphere_grid)) < 1e-12
    # N = 1: the coefficient in front of ||d phi||^2 / 2 is 1/2
    basis1 = sphere_basis(sphere, 0)
    phi = COS.scaled(2.0)
    gap1 = mt_gap(basis1, phi, sphere_grid)
    lmgf = fluctuation_log_mgf(basis1, phi, 1.0, sphere_grid)
    assert gap1 == pytest.approx(0.25 * dirichlet_norm_sq(phi) - lmgf, abs=1e-12)
    for N in [2, 8, 32]:
        basis = sphere_basis(sphere, N - 1)
        assert mt_gap(basis, phi, sphere_grid) >= -1e-8


def test_szego_defect_decreases(sphere):
    defects = []
    for N in [8, 16, 32, 64]:
        basis = sphere_basis(sphere, N - 1)
        grid = quadrature_grid(sphere, max(N + 1, 48))
        defects.append(abs(szego_defect(basis, COS, grid)))
    assert defects[-1] < defects[0]
    assert defects[-1] < 0.05
    assert all(np.diff(defects) < 0)


def test_szego_monotone_over_family(sphere):
    # every member of the band-limited family approaches the limit
    basis8 = sphere_basis(sphere, 7)
    basis64 = sphere_basis(sphere, 63)
    grid8 = quadrature_grid(sphere, 48)
    grid64 = quadrature_grid(sphere, 65)
    for f_idx in range(20):
        phi = make_phi(f"harmonic:4,{100 + f_idx}").scaled(0.5)
        d8 = abs(szego_defect(basis8, phi, grid8))
        d64 = abs(szego_defect(basis64, phi, grid64))
        assert d64 < d8


def test_szego_defect_zero_function(sphere, sphere_grid):
    basis = sphere_basis(sphere, 7)
    zero = TestFunction("zero", eval_xyz=lambda x: np.zeros(x.shape[:-1]),
                        sh_coeffs={(1, 0): 0.0})
    assert abs(szego_defect(basis, zero, sphere_grid)) < 1e-12


def test_complex_symbol_branch(sphere, sphere_grid):
    # imaginary test function: the log-MGF converges to -s^2 ||d phi||^2 / 2
    # by the bilinear extension; check the trend and the bilinear value
    s = 1.0
    phi = TestFunction("i*s*cos", eval_xyz=lambda x: 1j * s * x[..., 2],
                       sh_coeffs={(1, 0): 1j * s * math.sqrt(4 * math.pi / 3)},
                       is_real=False)
    dn2 = dirichlet_norm_sq(phi)
    assert dn2 == pytest.approx(-s * s * 2.0 / 3.0, abs=1e-14)
    vals = []
    for N in [8, 24, 48]:
        basis = sphere_basis(sphere, N - 1)
        grid = quadrature_grid(sphere, max(N + 1, 48))
        lm = fluctuation_log_mgf(basis, phi, 1.0, grid)
        vals.append(lm)
    # limit of Re log E(e^{-phi~}) is -s^2/3; imaginary part tends to 0
    assert abs(vals[-1].real - (-s * s / 3.0)) < 0.02
    assert abs(vals[-1].imag) < 0.02
    assert abs(vals[-1].real - (-s * s / 3.0)) < abs(vals[0].real - (-s * s / 3.0))


def test_complex_branch_matches_real_case(sphere, sphere_grid):
    # a complex symbol with vanishing imaginary part reduces to the real path
    basis = sphere_basis(sphere, 5)
    vals = COS.values_chart(sphere_grid.points)
    real_ld = log_expectation(basis, vals, sphere_grid)
    complex_ld = log_expectation(basis, vals + 0j * vals + 1e-30j, sphere_grid)
    assert abs(complex_ld.real - real_ld) < 1e-9
    assert abs(complex_ld.imag) < 1e-9


def test_toeplitz_matrix_caches_logdet(sphere, sphere_grid):
    basis = sphere_basis(sphere, 3)
    tm = toeplitz_matrix(basis, COS, sphere_grid)
    assert tm.matrix.shape == (4, 4)
    assert tm.log_det == pytest.approx(log_expectation(basis, COS, sphere_grid))
