"""Determinantal point processes on constant-curvature surfaces.

Core objects: surface models with exact quadrature (:mod:`.geometry`),
orthonormal section bases (:mod:`.bases`), Bergman kernels and decay fits
(:mod:`.kernels`), Toeplitz-determinant functionals (:mod:`.toeplitz`),
exact samplers (:mod:`.sampling`), Monte Carlo estimators
(:mod:`.mcstats`), and reproducible experiment suites
(:mod:`.experiments`) served over HTTP (:mod:`.service`).
"""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    injectivity_radius,
    make_hyperbolic_chart,
    make_sphere,
    make_torus,
    quadrature_grid,
    sphere_embed,
    sphere_unembed,
)
from .bases import gram, orthonormalize, sphere_basis, torus_theta_basis  # noqa: F401
from .kernels import (  # noqa: F401
    fit_decay,
    global_kernel,
    local_reproduce_error,
    mobius_map,
    model_kernel,
    psi,
    relation_residuals,
    torus_bergman_error,
)
from .toeplitz import (  # noqa: F401
    TestFunction,
    dirichlet_norm_sq,
    energy,
    fluctuation_log_mgf,
    log_expectation,
    mt_gap,
    szego_defect,
    variance_exact,
)
from .sampling import (  # noqa: F401
    joint_density,
    sample_batch,
    sample_chain_rule,
    sample_eigenvalue_model,
    z_n,
)
from .mcstats import clt_check, empirical_tail, linear_statistic, mgf_cross_check  # noqa: F401
