"""Orthonormal section bases and Gram matrices.

A basis object evaluates the ``N`` holomorphic sections of the level-``k``
space in the chart trivialization.  The workhorse is ``features``: the
half-weighted values ``f_j(z) exp(-k Phi(z)/2)`` whose pairwise products
give point-wise norms, kernels and Gram integrands without overflow.

Sphere (area V, degree m = kV): monomials ``c_j z^j`` with the closed-form
normalizers ``c_j^2 = (m+1) binom(m, j) / V^j``.  Torus: level-``kV`` theta
series with characteristics ``j/(kV)``, exactly orthogonal with norm
``(2 k V Im tau)^{-1/4}`` each; normalization is numerical, refined by an
orthonormalization pass against a quadrature Gram.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .geometry import Kind, QuadGrid, SurfaceModel, quadrature_grid


class GridResolutionError(ValueError):
    """Grid too coarse for the requested level; refusing silent inaccuracy."""


class TruncationError(ValueError):
    """Lattice-sum truncation would drop terms above tolerance."""


def dimension(model: SurfaceModel, k: int) -> int:
    """Section-space dimension N = kV - (g - 1) for global models."""
    if model.kind is Kind.HYPERBOLIC_CHART:
        raise ValueError("no global section space on a local chart model")
    m = k * model.volume
    if abs(m - round(m)) > 1e-9:
        raise ValueError("k * volume must be an integer")
    return int(round(m)) - (model.genus - 1)


def sphere_min_resolution(k: int) -> int:
    """Grid resolution at which level-k section products integrate exactly."""
    return k + 2


def torus_min_resolution(k: int) -> int:
    """Uniform-grid resolution resolving the section-product bandwidth."""
    return max(24, 3 * k + 8)


def min_resolution(model: SurfaceModel, k: int) -> int:
    if model.kind is Kind.SPHERE:
        return sphere_min_resolution(k)
    if model.kind is Kind.FLAT_TORUS:
        return torus_min_resolution(k)
    raise ValueError("no global basis on a local chart model")


class SectionBasis:
    """Orthonormal basis of the level-k section space."""

    model: SurfaceModel
    k: int
    N: int

    def values(self, z) -> np.ndarray:
        """Unweighted section values f_j(z); shape (N, npoints)."""
        raise NotImplementedError

    def features(self, z) -> np.ndarray:
        """Half-weighted values f_j(z) exp(-k Phi(z)/2); shape (N, npoints).

        Torus points are reduced to the fundamental domain first, so the
        result is genuinely periodic.
        """
        z = self.model.reduce(np.atleast_1d(np.asarray(z, dtype=complex)))
        return self.values(z) * np.exp(-0.5 * self.k * self.model.weight(z))[None, :]

    def pointwise_norms(self, z) -> np.ndarray:
        """|Psi_j|^2(z) = |f_j(z)|^2 exp(-k Phi(z)); shape (N, npoints)."""
        f = self.features(z)
        return (f * f.conj()).real


class SphereBasis(SectionBasis):
    def __init__(self, model: SurfaceModel, k: int):
        if model.kind is not Kind.SPHERE:
            raise ValueError("sphere model required")
        if k < 0:
            raise ValueError("k must be >= 0")
        self.model = model
        self.k = int(k)
        self.N = dimension(model, k)
        m = self.N - 1                      # polynomial degree kV
        V = model.volume
        self._degree = m
        # log c_j, c_j^2 = (m+1) binom(m, j) / V^j
        j = np.arange(m + 1)
        self._log_c = 0.5 * (
            math.log(m + 1)
            + np.array(
                [math.lgamma(m + 1) - math.lgamma(i + 1) - math.lgamma(m - i + 1) for i in j]
            )
            - j * math.log(V)
        )

    def values(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        j = np.arange(self._degree + 1)[:, None]
        s = np.abs(z) ** 2
        ang = np.angle(z)
        with np.errstate(divide="ignore"):
            log_r = np.where(s > 0, 0.5 * np.log(s, where=s > 0), -np.inf)
        out = np.exp(self._log_c[:, None] + j * log_r[None, :]) * np.exp(1j * j * ang[None, :])
        if np.any(s == 0):
            at0 = s == 0
            out[:, at0] = 0.0
            out[0, at0] = math.exp(self._log_c[0])
        return out

    def features(self, z) -> np.ndarray:
        # fused log-space evaluation keeps z^j e^{-k Phi/2} finite for any |z|
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        j = np.arange(self._degree + 1)[:, None]
        s = np.abs(z) ** 2
        ang = np.angle(z)
        half_w = 0.5 * self.k * self.model.weight(z)
        with np.errstate(divide="ignore"):
            log_r = np.where(s > 0, 0.5 * np.log(s, where=s > 0), -np.inf)
        out = np.exp(self._log_c[:, None] + j * log_r[None, :] - half_w[None, :]) * np.exp(
            1j * j * ang[None, :]
        )
        if np.any(s == 0):
            at0 = s == 0
            out[:, at0] = 0.0
            out[0, at0] = math.exp(self._log_c[0])
        return out


class TorusThetaBasis(SectionBasis):
    """Theta sections at level m = kV with characteristics j/m.

    f_j(z) = norm_j * sum_n exp(pi i tau m (n + j/m)^2 + 2 pi i m (n + j/m) z),
    truncated where the Gaussian factor falls below ``tail_rel`` of its peak.
    """

    def __init__(self, model: SurfaceModel, k: int, truncation: int | None = None,
                 tail_rel: float = 1e-18):
        if model.kind is not Kind.FLAT_TORUS:
            raise ValueError("flat torus model required")
        if k < 1:
            raise ValueError("k must be >= 1")
        self.model = model
        self.k = int(k)
        self.N = dimension(model, k)
        self._m = self.N                    # theta level kV (genus 1)
        tau2 = model.tau.imag
        # peak-relative Gaussian cut: exp(-pi m tau2 d^2) >= tail_rel
        need = math.sqrt(-math.log(tail_rel) / (math.pi * self._m * tau2)) + 2.0
        self._nmax = int(math.ceil(need)) if truncation is None else int(truncation)
        if self._nmax < need:
            raise TruncationError(
                f"truncation {self._nmax} drops terms above {tail_rel:g} of peak; need >= {math.ceil(need)}"
            )
        # exact norm of the untransformed series; refined by orthonormalize()
        self._norm = (2.0 * self._m * tau2) ** 0.25
        self._coeff = None                  # optional change of basis (N x N)

    def raw_values(self, z) -> np.ndarray:
        z = self.model.reduce(np.atleast_1d(np.asarray(z, dtype=complex)))
        m, tau = self._m, self.model.tau
        n = np.arange(-self._nmax, self._nmax + 1)
        out = np.empty((self.N, z.size), dtype=complex)
        for j in range(self.N):
            a = n + j / m
            out[j] = np.exp(
                1j * math.pi * tau * m * a[:, None] ** 2
                + 2j * math.pi * m * a[:, None] * z[None, :]
            ).sum(axis=0)
        return out * self._norm

    def values(self, z) -> np.ndarray:
        raw = self.raw_values(z)
        if self._coeff is not None:
            raw = self._coeff @ raw
        return raw


def sphere_basis(model: SurfaceModel, k: int) -> SphereBasis:
    return SphereBasis(model, k)


def torus_theta_basis(model: SurfaceModel, k: int, truncation: int | None = None) -> TorusThetaBasis:
    return TorusThetaBasis(model, k, truncation)


@dataclass
class GramMatrix:
    """Hermitian (for real symbols) Gram matrix <e^{-phi} Psi_i, Psi_j>."""

    matrix: np.ndarray
    symbol: str

    @property
    def is_hermitian(self) -> bool:
        return bool(np.allclose(self.matrix, self.matrix.conj().T, atol=1e-12))


def _check_resolution(basis: SectionBasis, grid: QuadGrid) -> None:
    need = min_resolution(basis.model, basis.k)
    if grid.resolution < need:
        raise GridResolutionError(
            f"grid resolution {grid.resolution} below the level-{basis.k} "
            f"sufficiency bound {need}"
        )


def assemble_symbol(basis: SectionBasis, symbol_values: np.ndarray, grid: QuadGrid) -> np.ndarray:
    """Matrix of the symbol against the basis: S_ij = <g Psi_i, Psi_j>.

    Summation order inside every entry is the fixed node order of the grid.
    """
    _check_resolution(basis, grid)
    F = basis.features(grid.points)
    return (F * (symbol_values * grid.nu_weights)[None, :]) @ F.conj().T


def phi_node_values(phi, grid: QuadGrid) -> np.ndarray:
    """Evaluate a symbol spec (scalar, array of node values, or callable)."""
    if np.isscalar(phi):
        return np.full(grid.points.shape, complex(phi) if np.iscomplexobj(np.asarray(phi)) else float(phi))
    if callable(phi):
        return np.asarray(phi(grid.points))
    arr = np.asarray(phi)
    if arr.shape != grid.points.shape:
        raise ValueError("phi array must match grid nodes")
    return arr


def gram(basis: SectionBasis, phi, grid: QuadGrid) -> GramMatrix:
    """Gram matrix under the multiplicatively perturbed weight e^{-phi}."""
    vals = phi_node_values(phi, grid)
    G = assemble_symbol(basis, np.exp(-vals), grid)
    if not np.iscomplexobj(vals) or np.allclose(vals.imag, 0.0):
        G = 0.5 * (G + G.conj().T)      # symmetrize away quadrature roundoff
    return GramMatrix(G, symbol="exp(-phi)")


def orthonormalize(basis: SectionBasis, grid: QuadGrid) -> SectionBasis:
    """Return a basis whose Gram under phi = 0 is the identity.

    Uses the Cholesky factor of the current Gram; the change of basis is
    lower triangular with positive diagonal, so its determinant is > 0.
    """
    G = gram(basis, 0.0, grid).matrix
    try:
        L = sla.cholesky(G, lower=True)
    except sla.LinAlgError as exc:
        raise ValueError("Gram matrix is numerically singular") from exc
    C = sla.solve_triangular(L, np.eye(basis.N), lower=True)
    if isinstance(basis, TorusThetaBasis):
        out = TorusThetaBasis(basis.model, basis.k, basis._nmax)
        out._coeff = C if basis._coeff is None else C @ basis._coeff
        return out
    out = _LinearCombinationBasis(basis, C)
    return out


class _LinearCombinationBasis(SectionBasis):
    """Sections C @ (original sections); used by orthonormalize."""

    def __init__(self, base: SectionBasis, coeff: np.ndarray):
        self.model = base.model
        self.k = base.k
        self.N = base.N
        self._base = base
        self._coeff = coeff

    def values(self, z) -> np.ndarray:
        return self._coeff @ self._base.values(z)

    def features(self, z) -> np.ndarray:
        return self._coeff @ self._base.features(z)


def default_grid(basis: SectionBasis, margin: int = 0) -> QuadGrid:
    """Convenience grid at the documented sufficiency bound (plus margin)."""
    res = min_resolution(basis.model, basis.k) + margin
    return quadrature_grid(basis.model, res)
