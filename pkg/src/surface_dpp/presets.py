"""Named test functions and experiment descriptions.

Preset names accepted anywhere a test function is configured:

* ``cos-theta``            the height coordinate of the embedded sphere
* ``cos-theta-squared``    its square
* ``harmonic:L,seed``      random band-limited function, bandlimit L

``cos-theta`` and ``cos-theta-squared`` carry both a closed form and the
matching harmonic coefficients, so the two Dirichlet-norm paths can be
cross-checked on them.
"""

from __future__ import annotations

import math

from .toeplitz import TestFunction, harmonic_test_function


def _cos_theta() -> TestFunction:
    return TestFunction(
        "cos-theta",
        eval_xyz=lambda x: x[..., 2],
        sh_coeffs={(1, 0): math.sqrt(4.0 * math.pi / 3.0)},
        grad2_xyz=lambda x: 1.0 - x[..., 2] ** 2,
    )


def _cos_theta_squared() -> TestFunction:
    return TestFunction(
        "cos-theta-squared",
        eval_xyz=lambda x: x[..., 2] ** 2,
        sh_coeffs={
            (0, 0): 2.0 * math.sqrt(math.pi) / 3.0,
            (2, 0): (2.0 / 3.0) * math.sqrt(4.0 * math.pi / 5.0),
        },
        grad2_xyz=lambda x: 4.0 * x[..., 2] ** 2 * (1.0 - x[..., 2] ** 2),
    )


PHI_PRESETS = {
    "cos-theta": "height coordinate x3 on the embedded sphere",
    "cos-theta-squared": "squared height coordinate x3^2",
    "harmonic:L,seed": "random band-limited function (bandlimit L, integer seed)",
}


def make_phi(name: str) -> TestFunction:
    if name == "cos-theta":
        return _cos_theta()
    if name == "cos-theta-squared":
        return _cos_theta_squared()
    if name.startswith("harmonic:"):
        try:
            l_str, seed_str = name.split(":", 1)[1].split(",")
            return harmonic_test_function(int(l_str), int(seed_str))
        except ValueError as exc:
            raise ValueError(f"bad harmonic preset {name!r}; expected harmonic:L,seed") from exc
    raise ValueError(f"unknown test-function preset {name!r}")


EXPERIMENT_DESCRIPTIONS = {
    "bergman-decay": "kernel diagonal constancy (sphere), exponential error decay (torus, local model), dimension law",
    "clt-check": "Monte Carlo normality of a linear statistic against the exact trace variance",
    "mobius-identities": "Moebius involution and polarization identity residuals across curvatures",
    "mt-check": "determinant scaling identity and the sharp log-MGF inequality over a function family",
    "sampler-agreement": "chain-rule vs random-matrix sampler agreement and joint-density checks",
    "szego-table": "strong-limit defect of the fluctuation log-MGF over a particle-number sweep",
    "tail-check": "deterministic quadratic log-MGF domination and Monte Carlo tail bound",
    "variance-table": "exact linear-statistic variance against the Dirichlet norm over a sweep",
}


def list_presets() -> str:
    """Alphabetical text listing of experiment ids and test-function presets."""
    lines = ["experiments:"]
    for name in sorted(EXPERIMENT_DESCRIPTIONS):
        lines.append(f"  {name:<20} {EXPERIMENT_DESCRIPTIONS[name]}")
    lines.append("phi presets:")
    for name in sorted(PHI_PRESETS):
        lines.append(f"  {name:<20} {PHI_PRESETS[name]}")
    return "\n".join(lines) + "\n"
