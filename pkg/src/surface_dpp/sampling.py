"""Exact samplers for the canonical N-particle process and joint densities.

Two independent routes produce the same sphere ensemble:

* sequential chain rule for projection kernels: point ``i`` is drawn from
  the deflated kernel diagonal over ``N - i + 1``, by rejection against
  the base measure ``nu`` with the constant envelope ``B_k = N`` (exact on
  the sphere, where the intensity is constant);
* generalized eigenvalues of a pair of iid complex Gaussian matrices,
  mapped stereographically.

Replica streams are counter-based: replica ``r`` of master seed ``s`` uses
a Philox generator keyed by ``(s, r)``, so batches reproduce bit-for-bit
regardless of scheduling or worker count.

The sphere joint density has a Slater-determinant form and a pairwise
product form

    rho(x_1..x_N) = (1/Z_N) prod_{i<j} (|x_i - x_j| / 2)^2,
    1/Z_N = N^N binom(N-1, 0) ... binom(N-1, N-1) / N!,

with distances between unit-sphere embeddings normalized by the diameter;
the two forms agree identically.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .bases import SectionBasis, sphere_basis
from .geometry import Kind, SurfaceModel, make_sphere, quadrature_grid, sphere_embed

_CHAIN = "ChainRule"
_EIG = "EigenvalueModel"


class EnvelopeError(RuntimeError):
    """Rejection envelope violated; the proposal bound was wrong."""


def replica_generator(master_seed: int, replica: int) -> np.random.Generator:
    """Counter-based stream for one replica: Philox keyed by (seed, replica)."""
    key = np.array([master_seed, replica], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class Configuration:
    """One N-point sample in chart coordinates, with seed provenance."""

    points: np.ndarray
    k: int
    model: SurfaceModel
    master_seed: int | None = None
    replica: int | None = None

    @property
    def n(self) -> int:
        return len(self.points)

    def embedded(self) -> np.ndarray:
        if self.model.kind is not Kind.SPHERE:
            raise ValueError("embedding is a sphere operation")
        return sphere_embed(self.points, self.model.volume)


@dataclass
class SampleBatch:
    configurations: list[Configuration]
    sampler: str
    master_seed: int
    meta: dict = field(default_factory=dict)

    def statistic(self, fn) -> np.ndarray:
        return np.array([fn(c) for c in self.configurations])


# ---------------------------------------------------------------------------
# joint density

def log_z_n(N: int) -> float:
    """log Z_N of the pairwise product form (log 1/2 at N = 2, -log 9 at N = 3)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    log_inv = N * math.log(N) - math.lgamma(N + 1)
    for j in range(N):
        log_inv += math.lgamma(N) - math.lgamma(j + 1) - math.lgamma(N - j)
    return -log_inv


def z_n(N: int) -> float:
    return math.exp(log_z_n(N))


def log_joint_density_slater(config: Configuration, basis: SectionBasis) -> float:
    """log of |det Psi_i(x_j)|^2 / N! with half-weighted section values."""
    M = basis.features(config.points)
    sign, logdet = np.linalg.slogdet(M)
    if not np.isfinite(logdet):
        return -np.inf
    return 2.0 * logdet - math.lgamma(config.n + 1)


def log_joint_density_product(config: Configuration) -> float:
    """Sphere pairwise form: -log Z_N + sum_{i<j} log(|x_i - x_j|^2 / 4)."""
    if config.model.kind is not Kind.SPHERE:
        raise ValueError("the product form is a sphere formula")
    if abs(config.model.volume - 1.0) > 1e-12:
        raise ValueError("the product form is normalized for volume 1")
    x = config.embedded()
    d2 = np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=-1)
    iu = np.triu_indices(config.n, k=1)
    vals = d2[iu] / 4.0
    if np.any(vals == 0.0):
        return -np.inf
    return -log_z_n(config.n) + float(np.sum(np.log(vals)))


def joint_density(config: Configuration, basis: SectionBasis | None = None,
                  path: str = "auto") -> float:
    """Density of the configuration against nu^(x)N; coincident points give 0."""
    if path == "product" or (path == "auto" and basis is None):
        return math.exp(log_joint_density_product(config))
    if basis is None:
        basis = sphere_basis(config.model, config.k)
    return math.exp(log_joint_density_slater(config, basis))


# ---------------------------------------------------------------------------
# chain-rule sampler

def _propose(model: SurfaceModel, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw `size` points from nu."""
    if model.kind is Kind.SPHERE:
        u = rng.uniform(-1.0, 1.0, size)
        ang = rng.uniform(0.0, 2.0 * math.pi, size)
        s = model.volume * (1.0 + u) / (1.0 - u)
        return np.sqrt(s) * np.exp(1j * ang)
    if model.kind is Kind.FLAT_TORUS:
        a = rng.uniform(0.0, 1.0, size)
        b = rng.uniform(0.0, 1.0, size)
        return a + b * model.tau
    raise ValueError("sampling needs a global model")


def _envelope(basis: SectionBasis) -> float:
    """Upper bound for the kernel diagonal B_k over the surface."""
    if basis.model.kind is Kind.SPHERE:
        return float(basis.N)       # exact: constant intensity
    grid = quadrature_grid(basis.model, 96)
    sup = basis.pointwise_norms(grid.points).sum(axis=0).max()
    return float(sup * (1.0 + 1e-6))


def sample_chain_rule(basis: SectionBasis, rng: np.random.Generator,
                      master_seed: int | None = None, replica: int | None = None,
                      proposal_batch: int = 96, envelope: float | None = None) -> Configuration:
    """One exact sample of the N-point projection process.

    Point i is accepted from proposals ~ nu with probability
    (deflated diagonal)/envelope; after acceptance the feature vector is
    removed from the kernel by Gram-Schmidt deflation.
    """
    N = basis.N
    env = _envelope(basis) if envelope is None else envelope
    ortho = np.zeros((N, 0), dtype=complex)
    points = np.empty(N, dtype=complex)
    for i in range(N):
        while True:
            z = _propose(basis.model, rng, proposal_batch)
            accept = rng.uniform(size=proposal_batch)
            feats = basis.features(z)
            full = (feats * feats.conj()).real.sum(axis=0)
            if ortho.shape[1]:
                proj = np.abs(ortho.conj().T @ feats) ** 2
                resid = full - proj.sum(axis=0)
            else:
                resid = full
            if np.any(resid > env * (1.0 + 1e-9)):
                raise EnvelopeError(f"diagonal {resid.max():.6g} exceeds envelope {env:.6g}")
            hits = np.nonzero(accept * env < resid)[0]
            if hits.size:
                points[i] = z[hits[0]]
                break
        v = basis.features(points[i])[:, 0]
        if ortho.shape[1]:
            v = v - ortho @ (ortho.conj().T @ v)
        nrm = np.linalg.norm(v)
        if nrm < 1e-13:
            raise EnvelopeError("deflated feature vector vanished")
        ortho = np.concatenate([ortho, (v / nrm)[:, None]], axis=1)
    return Configuration(points, basis.k, basis.model, master_seed, replica)


# ---------------------------------------------------------------------------
# random-matrix sampler

def sample_eigenvalue_model(N: int, rng: np.random.Generator,
                            master_seed: int | None = None, replica: int | None = None,
                            max_retries: int = 8) -> Configuration:
    """Generalized eigenvalues of a complex Gaussian pencil (A, B).

    The eigenvalues of det(A - lambda B) = 0, viewed on the sphere through
    the stereographic chart, sample the same N-point ensemble as the
    chain-rule sampler at level k = N - 1 (volume 1).
    """
    model = make_sphere(1.0)
    for _ in range(max_retries):
        A = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
        B = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
        lam = sla.eig(A, B, right=False)
        if np.all(np.isfinite(lam)):
            return Configuration(lam, N - 1, model, master_seed, replica)
    raise RuntimeError("generalized eigenvalue pencil was defective repeatedly")


# ---------------------------------------------------------------------------
# batches

def sample_batch(basis_or_n, sampler: str, n_replicas: int, master_seed: int) -> SampleBatch:
    """Replica-indexed batch; bit-reproducible for a fixed (seed, count)."""
    configs = []
    if sampler == _CHAIN:
        basis: SectionBasis = basis_or_n
        env = _envelope(basis)
        for r in range(n_replicas):
            rng = replica_generator(master_seed, r)
            configs.append(sample_chain_rule(basis, rng, master_seed, r, envelope=env))
    elif sampler == _EIG:
        N = int(basis_or_n) if not isinstance(basis_or_n, SectionBasis) else basis_or_n.N
        for r in range(n_replicas):
            rng = replica_generator(master_seed, r)
            configs.append(sample_eigenvalue_model(N, rng, master_seed, r))
    else:
        raise ValueError(f"unknown sampler id {sampler!r}")
    return SampleBatch(configs, sampler, master_seed)


def batch_to_csv(batch: SampleBatch) -> str:
    lines = ["replica,point,re_z,im_z"]
    for c in batch.configurations:
        for i, z in enumerate(c.points):
            lines.append(f"{c.replica},{i},{z.real:.17g},{z.imag:.17g}")
    return "\n".join(lines) + "\n"


def batch_to_binary(batch: SampleBatch) -> bytes:
    """Compact binary form: one complex array of shape (replicas, N)."""
    buf = io.BytesIO()
    pts = np.stack([c.points for c in batch.configurations])
    np.savez_compressed(buf, points=pts, master_seed=batch.master_seed,
                        sampler=batch.sampler)
    return buf.getvalue()


def batch_from_binary(data: bytes, model: SurfaceModel) -> SampleBatch:
    with np.load(io.BytesIO(data)) as archive:
        pts = archive["points"]
        seed = int(archive["master_seed"])
        sampler = str(archive["sampler"])
    k = round((pts.shape[1] + model.genus - 1) / model.volume)
    configs = [Configuration(row, k, model, seed, r) for r, row in enumerate(pts)]
    return SampleBatch(configs, sampler, seed)
