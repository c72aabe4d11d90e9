"""Constant-curvature surface models and quadrature.

Three models are supported, each described by a Kaehler potential ("weight")
``Phi`` on a complex chart whose curvature form ``dd^c Phi`` (with the
convention ``dd^c = (i/2pi) d dbar``) is the area form of the surface:

* round sphere of total area ``V``:   ``Phi(z) = V log(1 + |z|^2 / V)``
  on the affine chart, scalar curvature ``R = 2/V``;
* flat torus ``C / (Z + tau Z)``:      ``Phi(z) = 2 pi V (Im z)^2 / Im tau``,
  ``R = 0``, mass ``V`` on the fundamental domain;
* hyperbolic disc chart (local only):  ``Phi(w) = (2/R) log(1 + R |w|^2)``
  for a user-set ``R < 0``, valid on ``|w| < 1/sqrt(-R)``.

Scalar curvature follows the Gauss-Bonnet normalisation ``R V = 2 - 2g``
for the global models.  All quadrature grids integrate the area form to
the model volume; sphere grids are Gauss-Legendre in ``u = cos(theta)``
times a uniform azimuth and are exact for the section products that
appear in Gram matrices.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss


class Kind(enum.Enum):
    SPHERE = "sphere"
    FLAT_TORUS = "flat_torus"
    HYPERBOLIC_CHART = "hyperbolic_chart"


class ChartError(ValueError):
    """Point or parameter outside the valid chart."""


@dataclass(frozen=True)
class SurfaceModel:
    """Immutable geometry of one constant-curvature model.

    ``volume`` is the mass of the curvature form: the line-bundle degree for
    the global models, the (derived) chart mass for the hyperbolic chart.
    """

    kind: Kind
    genus: int
    curvature: float
    volume: float
    tau: complex | None = None        # torus modulus, Im tau > 0
    r_max: float | None = None        # hyperbolic chart radius

    def weight(self, z: np.ndarray | complex) -> np.ndarray:
        """Kaehler potential Phi at chart points ``z``."""
        z = np.asarray(z, dtype=complex)
        s = np.abs(z) ** 2
        if self.kind is Kind.SPHERE:
            return self.volume * np.log1p(s / self.volume)
        if self.kind is Kind.FLAT_TORUS:
            return 2.0 * np.pi * self.volume * z.imag**2 / self.tau.imag
        R = self.curvature
        if np.any(1.0 + R * s <= 0.0):
            raise ChartError("point outside hyperbolic chart")
        return (2.0 / R) * np.log1p(R * s)

    def weight_at_radius_sq(self, s: float) -> float:
        """Phi as a function of the squared chart radius (radial models only)."""
        if self.kind is Kind.SPHERE:
            return self.volume * math.log1p(s / self.volume)
        if self.kind is Kind.HYPERBOLIC_CHART:
            R = self.curvature
            if 1.0 + R * s <= 0.0:
                raise ChartError("radius outside hyperbolic chart")
            return (2.0 / R) * math.log1p(R * s)
        raise ChartError("weight is not radial on this model")

    def reduce(self, z: np.ndarray | complex) -> np.ndarray:
        """Reduce torus points to the fundamental domain [0,1) + [0,1) tau."""
        if self.kind is not Kind.FLAT_TORUS:
            return np.asarray(z, dtype=complex)
        z = np.asarray(z, dtype=complex)
        b = z.imag / self.tau.imag
        a = z.real - b * self.tau.real
        a -= np.floor(a)
        b -= np.floor(b)
        return a + b * self.tau


def make_sphere(volume: float = 1.0) -> SurfaceModel:
    """Round sphere of area ``volume``; genus 0, curvature 2/volume."""
    if volume <= 0:
        raise ValueError("volume must be positive")
    return SurfaceModel(Kind.SPHERE, genus=0, curvature=2.0 / volume, volume=float(volume))


def make_torus(tau: complex, volume: float = 1.0) -> SurfaceModel:
    """Flat torus C/(Z + tau Z); genus 1, curvature 0."""
    tau = complex(tau)
    if tau.imag <= 0:
        raise ValueError("Im tau must be positive")
    if volume <= 0:
        raise ValueError("volume must be positive")
    return SurfaceModel(Kind.FLAT_TORUS, genus=1, curvature=0.0, volume=float(volume), tau=tau)


def make_hyperbolic_chart(curvature: float, r_max: float) -> SurfaceModel:
    """Local negatively curved disc chart |w| <= r_max < 1/sqrt(-R).

    Only local operations are available (no global section basis).  The
    stored volume is the chart mass 2 r_max^2 / (1 + R r_max^2).
    """
    R = float(curvature)
    if R >= 0:
        raise ValueError("curvature must be negative")
    if r_max <= 0 or r_max >= 1.0 / math.sqrt(-R):
        raise ChartError("need 0 < r_max < 1/sqrt(-R)")
    mass = 2.0 * r_max**2 / (1.0 + R * r_max**2)
    return SurfaceModel(
        Kind.HYPERBOLIC_CHART, genus=-1, curvature=R, volume=mass, r_max=float(r_max)
    )


@dataclass(frozen=True)
class QuadGrid:
    """Quadrature nodes in the chart with weights for the area form.

    ``weights`` integrate ``dd^c Phi``; they sum to the model volume.
    ``exact_degree`` is the maximal polynomial degree (in the radial
    variable; trigonometric degree for the torus) integrated exactly.
    """

    model: SurfaceModel
    points: np.ndarray            # complex chart coordinates
    weights: np.ndarray           # positive, sum = model.volume
    resolution: int
    exact_degree: int
    u: np.ndarray | None = None   # sphere: cos-theta coordinate of each node

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")

    @property
    def nu_weights(self) -> np.ndarray:
        """Weights of the probability measure nu = omega / V."""
        return self.weights / self.model.volume

    def integrate(self, values: np.ndarray) -> complex | float:
        """Integral against nu of node values."""
        return np.sum(values * self.nu_weights)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("re_z,im_z,weight\n")
        for z, w in zip(self.points, self.weights):
            buf.write(f"{z.real:.17g},{z.imag:.17g},{w:.17g}\n")
        return buf.getvalue()


def quadrature_grid(model: SurfaceModel, resolution: int) -> QuadGrid:
    """Quadrature for the area form of ``model``.

    Sphere: Gauss-Legendre with ``resolution`` nodes in u = cos(theta) times
    2*resolution+1 uniform azimuth nodes; exact for integrands polynomial of
    degree <= 2*resolution-1 in u and bandwidth <= 2*resolution in azimuth.
    Torus: uniform resolution x resolution grid on the fundamental domain
    (spectrally accurate for smooth periodic integrands).  Hyperbolic chart:
    radial Gauss-Legendre times uniform azimuth on |w| <= r_max.
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    n = int(resolution)
    if model.kind is Kind.SPHERE:
        u, wu = leggauss(n)
        nphi = 2 * n + 1
        phi = 2.0 * np.pi * np.arange(nphi) / nphi
        U = np.repeat(u, nphi)
        W = np.repeat(wu, nphi) * (model.volume / (2.0 * nphi))
        radial = np.sqrt(model.volume * (1.0 + U) / (1.0 - U))
        pts = radial * np.exp(1j * np.tile(phi, n))
        return QuadGrid(model, pts, W, n, exact_degree=2 * n - 1, u=U)
    if model.kind is Kind.FLAT_TORUS:
        a = (np.arange(n) + 0.5) / n
        A, B = np.meshgrid(a, a, indexing="ij")
        pts = (A + B * model.tau).ravel()
        W = np.full(pts.shape, model.volume / (n * n))
        return QuadGrid(model, pts, W, n, exact_degree=n - 1)
    # hyperbolic chart: ds dtheta measure 2 (1 + R s)^{-2} ds dtheta / 2pi
    R, r2 = model.curvature, model.r_max**2
    x, wx = leggauss(n)
    s = 0.5 * r2 * (x + 1.0)
    ws = 0.5 * r2 * wx * 2.0 * (1.0 + R * s) ** -2
    nphi = 2 * n + 1
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    pts = np.sqrt(np.repeat(s, nphi)) * np.exp(1j * np.tile(phi, n))
    W = np.repeat(ws, nphi) / nphi
    return QuadGrid(model, pts, W, n, exact_degree=2 * n - 1)


def sphere_embed(z: np.ndarray | complex, volume: float = 1.0) -> np.ndarray:
    """Chart point(s) -> unit vector(s) in R^3, shape (..., 3).

    Convention: z = 0 maps to the south pole (0, 0, -1); z = infinity
    corresponds to the north pole (handled by the limit).
    """
    with np.errstate(invalid="ignore"):
        z = np.asarray(z, dtype=complex) / math.sqrt(volume)
        s = np.abs(z) ** 2
        denom = 1.0 + s
        x = np.stack(
            [2.0 * z.real / denom, 2.0 * z.imag / denom, (s - 1.0) / denom], axis=-1
        )
    # north pole as the |z| -> inf limit
    x = np.where(np.isinf(s)[..., None], np.array([0.0, 0.0, 1.0]), x)
    return x


def sphere_unembed(x: np.ndarray, volume: float = 1.0) -> np.ndarray:
    """Inverse of :func:`sphere_embed`; the north pole returns complex inf."""
    x = np.asarray(x, dtype=float)
    denom = 1.0 - x[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (x[..., 0] + 1j * x[..., 1]) / denom
    z = np.where(denom == 0.0, complex(np.inf, 0.0), z)
    return z * math.sqrt(volume)


def chordal_distance(z: np.ndarray | complex, w: np.ndarray | complex, volume: float = 1.0) -> np.ndarray:
    """Euclidean distance between embedded sphere points (max value 2)."""
    xz, xw = sphere_embed(z, volume), sphere_embed(w, volume)
    return np.sqrt(np.sum((xz - xw) ** 2, axis=-1))


def shortest_lattice_vector(tau: complex, search: int = 8) -> complex:
    """Shortest nonzero vector of Z + tau Z (Euclidean chart length)."""
    best = None
    for m in range(-search, search + 1):
        for l in range(-search, search + 1):
            if m == 0 and l == 0:
                continue
            lam = m + l * tau
            if best is None or abs(lam) < abs(best):
                best = lam
    return best


def injectivity_radius(model: SurfaceModel) -> float:
    """Half the length of the shortest closed geodesic, in the model metric.

    Sphere of area V: pi * sqrt(V / 4 pi).  Torus: half the shortest lattice
    vector measured in the flat metric of area V, i.e. with chart lengths
    scaled by sqrt(V / Im tau).
    """
    if model.kind is Kind.SPHERE:
        return math.pi * math.sqrt(model.volume / (4.0 * math.pi))
    if model.kind is Kind.FLAT_TORUS:
        lam = shortest_lattice_vector(model.tau)
        return 0.5 * abs(lam) * math.sqrt(model.volume / model.tau.imag)
    raise ChartError("injectivity radius is defined for global models only")
