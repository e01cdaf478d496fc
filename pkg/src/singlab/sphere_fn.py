"""Angular densities on the unit sphere, their norms, moments and the
constant ``C_Omega`` used to scale the Calderon-Zygmund level.

Densities are kept as closed-form evaluators and integrated with an
equal-weight rule: uniform half-step-offset angles on the circle, a
Fibonacci spiral on S^2.
"""
from dataclasses import dataclass, field
from itertools import product
from math import factorial
from typing import Callable

import numpy as np

GOLDEN = (1.0 + 5.0 ** 0.5) / 2.0


def sphere_area(d):
    """Surface measure of S^{d-1} for d in {2, 3}."""
    if d == 2:
        return 2.0 * np.pi
    if d == 3:
        return 4.0 * np.pi
    raise ValueError(f"unsupported dimension {d}")


@dataclass(frozen=True)
class SphereQuadrature:
    dimension: int
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.weights)

    @property
    def granularity(self):
        """Typical node spacing (chord length)."""
        if self.dimension == 2:
            return 2.0 * np.pi / len(self)
        return float(np.sqrt(4.0 * np.pi / len(self)))

    def integrate(self, values):
        return np.dot(self.weights, values)


def build_quadrature(d, resolution):
    """Equal-weight rule with ``resolution`` nodes on S^{d-1}, d in {2, 3}."""
    if d not in (2, 3):
        raise ValueError(f"unsupported dimension {d}; only 2 and 3 are supported")
    if resolution < 8:
        raise ValueError("quadrature resolution must be at least 8")
    n = int(resolution)
    k = np.arange(n, dtype=np.float64) + 0.5
    if d == 2:
        # half-step offset keeps nodes off the angle 0 where sample densities blow up
        ang = 2.0 * np.pi * k / n
        nodes = np.column_stack((np.cos(ang), np.sin(ang)))
    else:
        z = 1.0 - 2.0 * k / n
        rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        ang = 2.0 * np.pi * k / GOLDEN
        nodes = np.column_stack((rho * np.cos(ang), rho * np.sin(ang), z))
    weights = np.full(n, sphere_area(d) / n)
    return SphereQuadrature(d, nodes, weights)


@dataclass(frozen=True)
class SphereFunction:
    """Angular density extended to R^d \\ {0} as a degree-0 homogeneous function."""

    dimension: int
    func: Callable
    label: str = ""

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        return np.asarray(self.func(x / r), dtype=np.float64)

    def on_nodes(self, quad):
        vals = np.asarray(self.func(quad.nodes), dtype=np.float64)
        if vals.shape != (len(quad),):
            vals = np.broadcast_to(vals, (len(quad),)).copy()
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise ValueError(f"{self.label or 'omega'} is not finite at node {quad.nodes[bad]}")
        return vals


def _logspike(theta):
    ang = np.arctan2(theta[..., 1], theta[..., 0])
    # sgn(0) = 0 also at the singular angle itself
    safe = np.where(ang == 0.0, np.pi, ang)
    return np.where(ang == 0.0, 0.0, np.sign(safe) * np.log(np.pi / np.abs(safe)))


SAMPLES = {
    "const1": lambda th: np.ones(th.shape[:-1]),
    "theta1": lambda th: th[..., 0],
    "theta1theta2": lambda th: th[..., 0] * th[..., 1],
    "logspike": _logspike,
}


def sample_omega(key, d=2):
    """Shipped sample density by CLI key."""
    try:
        func = SAMPLES[key]
    except KeyError:
        raise ValueError(f"unknown omega key {key!r}; choose from {sorted(SAMPLES)}") from None
    return SphereFunction(d, func, key)


def zero_omega(d=2):
    return SphereFunction(d, lambda th: np.zeros(th.shape[:-1]), "zero")


@dataclass(frozen=True)
class OmegaNorms:
    l1: float
    llogl: float
    c_omega: float | None
    lq: dict = field(default_factory=dict)

    def as_dict(self):
        return {"l1": self.l1, "llogl": self.llogl, "c_omega": self.c_omega,
                "lq": {str(q): v for q, v in self.lq.items()}}


def _log_plus(a):
    return np.where(a >= 1.0, np.log(np.maximum(a, 1.0)), 0.0)


def compute_norms(omega, quad, q_list=()):
    """L^1, L^q, L log+ L norms and ``C_Omega``.

    ``c_omega`` is ``None`` for the zero density, whose ``log+(|Omega|/||Omega||_1)``
    is undefined; use :func:`c_omega` to get an exception instead.
    """
    a = np.abs(omega.on_nodes(quad))
    w = quad.weights
    l1 = float(w @ a)
    lq = {}
    for q in q_list:
        if q <= 1:
            raise ValueError("q must exceed 1")
        lq[q] = float((w @ a ** q) ** (1.0 / q))
    llogl = float(w @ (a * np.log(2.0 + a)))
    if l1 == 0.0:
        return OmegaNorms(0.0, 0.0, None, {q: 0.0 for q in lq})
    c = llogl + float(w @ (a * (1.0 + _log_plus(a / l1))))
    return OmegaNorms(l1, llogl, c, lq)


def c_omega(omega, quad):
    norms = compute_norms(omega, quad)
    if norms.c_omega is None:
        raise ValueError("C_Omega is undefined for the zero density")
    return norms.c_omega


def multi_indices(d, order):
    """All multi-indices of length ``d`` with total degree ``order``."""
    return [a for a in product(range(order + 1), repeat=d) if sum(a) == order]


def alpha_factorial(alpha):
    out = 1
    for a in alpha:
        out *= factorial(a)
    return out


def monomial(x, alpha):
    x = np.asarray(x, dtype=np.float64)
    out = np.ones(x.shape[:-1])
    for i, a in enumerate(alpha):
        if a:
            out = out * x[..., i] ** a
    return out


def moment(omega, quad, alpha):
    """``sum_i w_i Omega(theta_i) theta_i^alpha``."""
    if len(alpha) != quad.dimension or any(a < 0 for a in alpha):
        raise ValueError("alpha must be a nonnegative multi-index of the sphere's dimension")
    return float(quad.weights @ (omega.on_nodes(quad) * monomial(quad.nodes, alpha)))


@dataclass(frozen=True)
class AdmissibilityReport:
    order: int
    tol: float
    moments: list
    norms: OmegaNorms

    @property
    def passed(self):
        return all(ok for _, _, ok in self.moments)

    def as_dict(self):
        return {
            "order": self.order,
            "tol": self.tol,
            "passed": self.passed,
            "moments": [{"alpha": list(a), "value": v, "vanishes": ok} for a, v, ok in self.moments],
            "norms": self.norms.as_dict(),
        }


def admissibility_report(omega, quad, cancellation_order, tol=1e-10):
    """Check the vanishing of every moment of total degree ``cancellation_order``."""
    if cancellation_order < 0:
        raise ValueError("cancellation order must be nonnegative")
    rows = []
    for alpha in multi_indices(quad.dimension, cancellation_order):
        v = moment(omega, quad, alpha)
        rows.append((alpha, v, abs(v) <= tol))
    return AdmissibilityReport(cancellation_order, tol, rows, compute_norms(omega, quad))
