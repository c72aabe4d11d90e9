"""Toeplitz determinants, Dirichlet energy, and fluctuation functionals.

The moment generating function of a linear statistic ``sum phi(x_i)`` of
the canonical point process equals a Toeplitz determinant,

    E exp(-sum phi(x_i)) = det <exp(-phi) Psi_i, Psi_j>,

so every deterministic quantity here reduces to stable log-determinants of
Gram matrices.  The normalized Dirichlet norm is the conformally invariant

    ||d phi||^2 = (1/4pi) int |grad phi|^2 dA
               = (1/4pi) sum_{l,m} l (l+1) a_{l,m}^2

for the real orthonormal spherical harmonic coefficients ``a_{l,m}``
(squares, not moduli: complex-valued test functions use the bilinear
extension of the quadratic form throughout).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla
from scipy.special import lpmv

from .bases import SectionBasis, assemble_symbol, gram
from .geometry import Kind, QuadGrid, sphere_embed


# ---------------------------------------------------------------------------
# real spherical harmonics (orthonormal for the solid-angle measure dA)

def _real_sh(l: int, m: int, u: np.ndarray, ang: np.ndarray) -> np.ndarray:
    norm = math.sqrt((2 * l + 1) / (4.0 * math.pi))
    if m == 0:
        return norm * lpmv(0, l, u)
    am = abs(m)
    norm *= math.sqrt(2.0) * math.exp(
        0.5 * (math.lgamma(l - am + 1) - math.lgamma(l + am + 1))
    )
    trig = np.cos(am * ang) if m > 0 else np.sin(am * ang)
    return norm * lpmv(am, l, u) * trig


def _real_sh_grad(l: int, m: int, u: np.ndarray, ang: np.ndarray):
    """(d/du, d/dphi) of the real harmonic; d/du via the Legendre recurrence
    (1-u^2) dP_l^m/du = (l+m) P_{l-1}^m - l u P_l^m."""
    norm = math.sqrt((2 * l + 1) / (4.0 * math.pi))
    am = abs(m)
    if m != 0:
        norm *= math.sqrt(2.0) * math.exp(
            0.5 * (math.lgamma(l - am + 1) - math.lgamma(l + am + 1))
        )
    p = lpmv(am, l, u)
    p_prev = lpmv(am, l - 1, u) if l - 1 >= am else np.zeros_like(u)
    dp_du = ((l + am) * p_prev - l * u * p) / (1.0 - u * u)
    if m == 0:
        return norm * dp_du, np.zeros_like(u)
    trig = np.cos(am * ang) if m > 0 else np.sin(am * ang)
    dtrig = -am * np.sin(am * ang) if m > 0 else am * np.cos(am * ang)
    return norm * dp_du * trig, norm * p * dtrig


@dataclass
class TestFunction:
    """A test function on the sphere.

    Either or both representations may be present: a closed-form evaluator
    on embedded points (n, 3) -> (n,), and a real-spherical-harmonic
    coefficient table {(l, m): a}.  When both exist they must agree; the
    invariant is exercised in the test-suite.
    """

    name: str
    eval_xyz: Callable[[np.ndarray], np.ndarray] | None = None
    sh_coeffs: dict[tuple[int, int], complex] | None = None
    grad2_xyz: Callable[[np.ndarray], np.ndarray] | None = None
    is_real: bool = True

    __test__ = False        # "test function" in the analysis sense

    def values_xyz(self, xyz: np.ndarray) -> np.ndarray:
        if self.eval_xyz is not None:
            return np.asarray(self.eval_xyz(xyz))
        u = xyz[..., 2]
        ang = np.arctan2(xyz[..., 1], xyz[..., 0])
        out = np.zeros(u.shape, dtype=complex)
        for (l, m), a in self.sh_coeffs.items():
            out = out + a * _real_sh(l, m, u, ang)
        return out.real if self.is_real else out

    def values_chart(self, z, volume: float = 1.0) -> np.ndarray:
        return self.values_xyz(sphere_embed(z, volume))

    def bandlimit(self) -> int:
        if not self.sh_coeffs:
            raise ValueError(f"{self.name} has no spectral representation")
        return max(l for (l, m) in self.sh_coeffs)

    def scaled(self, factor: float) -> "TestFunction":
        coeffs = (
            {lm: factor * a for lm, a in self.sh_coeffs.items()}
            if self.sh_coeffs is not None else None
        )
        ev = (lambda xyz, f=self.eval_xyz: factor * f(xyz)) if self.eval_xyz else None
        g2 = (lambda xyz, g=self.grad2_xyz: factor**2 * g(xyz)) if self.grad2_xyz else None
        return TestFunction(f"{factor:g}*{self.name}", ev, coeffs, g2, self.is_real)


def harmonic_test_function(bandlimit: int, seed: int) -> TestFunction:
    """Random band-limited function: iid standard normal coefficients."""
    rng = np.random.default_rng(seed)
    coeffs = {}
    for l in range(1, bandlimit + 1):
        for m in range(-l, l + 1):
            coeffs[(l, m)] = float(rng.standard_normal())
    return TestFunction(f"harmonic:{bandlimit},{seed}", sh_coeffs=coeffs)


# ---------------------------------------------------------------------------
# Dirichlet norm and energy

def dirichlet_norm_sq(phi: TestFunction, grid: QuadGrid | None = None,
                      method: str = "spectral") -> complex | float:
    """Bilinear Dirichlet form (1/4pi) int (grad phi . grad phi) dA.

    ``spectral`` requires harmonic coefficients; ``quadrature`` evaluates
    the gradient on the sphere grid (from coefficients, or from a supplied
    closed-form |grad|^2 for real functions).
    """
    if method == "spectral":
        if phi.sh_coeffs is None:
            raise ValueError("spectral path needs harmonic coefficients")
        val = sum(l * (l + 1) * a * a for (l, m), a in phi.sh_coeffs.items())
        val = val / (4.0 * math.pi)
        return complex(val) if isinstance(val, complex) and val.imag != 0.0 else float(np.real(val))
    if method != "quadrature":
        raise ValueError("method must be 'spectral' or 'quadrature'")
    if grid is None or grid.model.kind is not Kind.SPHERE:
        raise ValueError("quadrature path needs a sphere grid")
    if phi.sh_coeffs is not None:
        u = grid.u
        ang = np.angle(grid.points)
        du = np.zeros(u.shape, dtype=complex)
        dphi = np.zeros(u.shape, dtype=complex)
        for (l, m), a in phi.sh_coeffs.items():
            gu, gp = _real_sh_grad(l, m, u, ang)
            du += a * gu
            dphi += a * gp
        g2 = (1.0 - u * u) * du * du + dphi * dphi / (1.0 - u * u)
        val = np.sum(g2 * grid.nu_weights)
        return float(val.real) if phi.is_real else complex(val)
    if phi.grad2_xyz is None:
        raise ValueError(f"{phi.name}: no gradient available for quadrature path")
    g2 = phi.grad2_xyz(sphere_embed(grid.points, grid.model.volume))
    return float(np.sum(np.asarray(g2) * grid.nu_weights).real)


def energy(phi: TestFunction, grid: QuadGrid) -> float:
    """Mabuchi-type energy: (  -||d phi||^2 / 2 + int phi omega ) / V."""
    dn2 = dirichlet_norm_sq(phi, grid, method="spectral" if phi.sh_coeffs else "quadrature")
    mean = np.sum(phi.values_chart(grid.points, grid.model.volume) * grid.nu_weights)
    return float((-0.5 * dn2 / grid.model.volume + mean).real)


# ---------------------------------------------------------------------------
# log-determinants

@dataclass
class ToeplitzMatrix:
    """Gram matrix of a symbol with its cached log-determinant."""

    matrix: np.ndarray
    symbol: str
    log_det: complex


class PositivityError(ValueError):
    """Real symbol produced a non-positive-definite matrix: quadrature failed."""


def _logdet_hermitian(G: np.ndarray) -> float:
    try:
        L = sla.cholesky(G, lower=True)
    except sla.LinAlgError as exc:
        raise PositivityError("Toeplitz matrix lost positive definiteness") from exc
    return float(2.0 * np.sum(np.log(np.diag(L).real)))


class _BranchStepTooLarge(Exception):
    pass


def _logdet_tracked(assemble: Callable[[float], np.ndarray], steps: int = 8,
                    tol: float = 1e-10, max_steps: int = 4096) -> complex:
    """log det along the homotopy t in [0, 1], branch tracked continuously.

    The imaginary part is accumulated from per-step principal arguments;
    steps double until the accumulated branch is stable and every step
    rotates by less than pi/2.
    """

    def walk(n: int) -> complex:
        arg = 0.0
        prev_sign = 1.0 + 0.0j
        logabs = 0.0
        for i in range(1, n + 1):
            sign, logabs = np.linalg.slogdet(assemble(i / n))
            step = np.angle(sign / prev_sign)
            if abs(step) > 0.5 * math.pi:
                raise _BranchStepTooLarge
            arg += step
            prev_sign = sign
        return complex(logabs, arg)

    prev = None
    n = steps
    while n <= max_steps:
        try:
            cur = walk(n)
        except _BranchStepTooLarge:
            n *= 2
            continue
        if prev is not None and abs(cur - prev) < tol:
            return cur
        prev = cur
        n *= 2
    raise ValueError("branch tracking did not stabilize")


def log_expectation(basis: SectionBasis, phi, grid: QuadGrid) -> complex | float:
    """log E exp(-sum phi(x_i)) = log det T[exp(-phi)].

    ``phi`` may be a TestFunction, a callable on chart points, an array of
    node values, or a scalar.  Real symbols use Cholesky pivots; complex
    symbols are continued along t exp(-t phi) from t = 0 with the branch
    tracked, so the imaginary part is the continuous winding.
    """
    vals = _node_values(basis, phi, grid)
    if not np.iscomplexobj(vals) or np.allclose(vals.imag, 0.0, atol=0.0):
        G = gram(basis, vals.real if np.iscomplexobj(vals) else vals, grid)
        return _logdet_hermitian(G.matrix)
    return _logdet_tracked(lambda t: assemble_symbol(basis, np.exp(-t * vals), grid))


def _node_values(basis: SectionBasis, phi, grid: QuadGrid) -> np.ndarray:
    if isinstance(phi, TestFunction):
        return np.asarray(phi.values_chart(grid.points, basis.model.volume))
    if np.isscalar(phi):
        return np.full(grid.points.shape, phi)
    if callable(phi):
        return np.asarray(phi(grid.points))
    return np.asarray(phi)


def toeplitz_matrix(basis: SectionBasis, phi, grid: QuadGrid) -> ToeplitzMatrix:
    vals = _node_values(basis, phi, grid)
    G = assemble_symbol(basis, np.exp(-vals), grid)
    ld = log_expectation(basis, phi, grid)
    return ToeplitzMatrix(G, "exp(-phi)", ld)


def process_mean(basis: SectionBasis, phi, grid: QuadGrid) -> float | complex:
    """E sum phi(x_i) = int phi B_k d nu (the one-point intensity average)."""
    vals = _node_values(basis, phi, grid)
    B = basis.pointwise_norms(grid.points).sum(axis=0)
    out = np.sum(vals * B * grid.nu_weights)
    return out if np.iscomplexobj(vals) else float(out.real)


def fluctuation_log_mgf(basis: SectionBasis, phi, t, grid: QuadGrid,
                        centering: str = "mean-omega") -> complex | float:
    """log E exp(-t (sum phi(x_i) - centering)).

    ``mean-omega`` centers each point at int phi d nu; ``mean-process``
    at E phi(x_i) (they coincide on the sphere, where the intensity is
    constant).
    """
    vals = _node_values(basis, phi, grid)
    if centering == "mean-omega":
        total = basis.N * np.sum(vals * grid.nu_weights)
    elif centering == "mean-process":
        total = process_mean(basis, vals, grid)
    else:
        raise ValueError("centering must be 'mean-omega' or 'mean-process'")
    ld = log_expectation(basis, t * vals, grid)
    out = ld + t * total
    if np.iscomplexobj(vals) or isinstance(t, complex):
        return complex(out)
    return float(np.real(out))


def variance_exact(basis: SectionBasis, phi, grid: QuadGrid) -> float:
    """Var sum phi(x_i) = Tr T[phi^2] - Tr(T[phi]^2), real phi."""
    vals = _node_values(basis, phi, grid)
    if np.iscomplexobj(vals) and not np.allclose(vals.imag, 0.0):
        raise ValueError("variance_exact requires a real test function")
    vals = vals.real if np.iscomplexobj(vals) else vals
    A = assemble_symbol(basis, vals, grid)
    B = assemble_symbol(basis, vals * vals, grid)
    var = float(np.trace(B).real - np.trace(A @ A).real)
    if var < -1e-10:
        raise ValueError(f"negative variance {var}: assembly error")
    return max(var, 0.0)


def mt_gap(basis: SectionBasis, phi: TestFunction, grid: QuadGrid) -> float:
    """Slack of the determinantal Moser-Trudinger inequality (sphere).

    gap = (N/(N+1)) ||d phi||^2 / 2 - log E exp(-(sum phi - N int phi d nu));
    the inequality asserts gap >= 0, with equality cases approached along
    near-harmonic directions.
    """
    if basis.model.kind is not Kind.SPHERE:
        raise ValueError("the sharp inequality is implemented on the sphere only")
    N = basis.N
    dn2 = dirichlet_norm_sq(phi, grid, method="spectral" if phi.sh_coeffs else "quadrature")
    lmgf = fluctuation_log_mgf(basis, phi, 1.0, grid, centering="mean-omega")
    coeff = 1.0 / (1.0 + (1.0 - basis.model.genus) / N)
    return float(coeff * 0.5 * float(np.real(dn2)) - np.real(lmgf))


def szego_defect(basis: SectionBasis, phi: TestFunction, grid: QuadGrid) -> complex | float:
    """Distance from the strong-limit value:  ||d phi||^2 / 2 - log-MGF at t=1.

    For complex phi the bilinear extension of the Dirichlet form is used,
    matching the analytic continuation of the limit.
    """
    method = "spectral" if phi.sh_coeffs else "quadrature"
    dn2 = dirichlet_norm_sq(phi, grid, method=method)
    lmgf = fluctuation_log_mgf(basis, phi, 1.0, grid, centering="mean-omega")
    out = 0.5 * dn2 - lmgf
    return complex(out) if not phi.is_real else float(np.real(out))
