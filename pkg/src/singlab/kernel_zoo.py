"""Kernels ``K(x, y)`` of the rough-operator applications, empirical size and
regularity constants, and the dyadic / mollified kernel pieces.

All evaluators are vectorised over leading axes: ``x`` and ``y`` have shape
``(..., d)`` and broadcast against each other.
"""
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .profiles import eta_mollifier, phi_annulus
from .sphere_fn import alpha_factorial, monomial, multi_indices

FAMILIES = ("power", "commutator", "higher", "general", "bajsanski_coifman", "muckenhoupt")


def inv_power(r, d):
    """``1 / r**d``; shared by the power kernel and the size check so that the
    power kernel's size quotient is exactly one."""
    return 1.0 / np.asarray(r, dtype=np.float64) ** d


# --------------------------------------------------------------------------
# Lipschitz fields and analytic profiles


@dataclass(frozen=True)
class LipschitzField:
    func: Callable
    grad_bound: float
    derivatives: dict = field(default_factory=dict)
    derivative_bounds: dict = field(default_factory=dict)
    label: str = ""

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=np.float64)), dtype=np.float64)

    def derivative(self, alpha):
        """Evaluator of ``d^alpha A``; the zero multi-index is ``A`` itself."""
        if not any(alpha):
            return self
        try:
            return self.derivatives[tuple(alpha)]
        except KeyError:
            raise KeyError(f"field {self.label!r} has no derivative {tuple(alpha)}") from None

    def spot_check(self, count=2000, box=4.0, seed=0):
        """Largest observed ``|A(x) - A(y)| / |x - y|`` on random pairs."""
        d = self.dimension_hint
        rng = np.random.default_rng(seed)
        x = rng.uniform(-box, box, (count, d))
        y = rng.uniform(-box, box, (count, d))
        return float(np.max(np.abs(self(x) - self(y)) / np.linalg.norm(x - y, axis=-1)))

    @property
    def dimension_hint(self):
        keys = list(self.derivatives) or list(self.derivative_bounds)
        return len(keys[0]) if keys else 2


def _const(value):
    return lambda x: np.full(np.shape(x)[:-1], float(value))


def linear_field(a):
    """``A(x) = <a, x>``; every derivative of order >= 2 vanishes."""
    a = np.asarray(a, dtype=np.float64)
    d = len(a)
    ders, bounds = {}, {}
    for order in range(1, 4):
        for alpha in multi_indices(d, order):
            val = a[alpha.index(1)] if order == 1 else 0.0
            ders[alpha] = _const(val)
            bounds[alpha] = abs(val)
    label = "linear:" + ",".join(f"{v:g}" for v in a)
    return LipschitzField(lambda x: x @ a, float(np.linalg.norm(a)), ders, bounds, label)


def sqrt1p_field(d=2):
    """``A(x) = sqrt(1 + |x|^2)`` with first and second derivatives."""
    def A(x):
        return np.sqrt(1.0 + np.sum(x * x, axis=-1))

    ders, bounds = {}, {}
    for i in range(d):
        e = tuple(int(k == i) for k in range(d))
        ders[e] = (lambda i: lambda x: x[..., i] / A(x))(i)
        bounds[e] = 1.0
    for alpha in multi_indices(d, 2):
        idx = [k for k, a in enumerate(alpha) for _ in range(a)]
        i, j = idx

        def second(x, i=i, j=j):
            s = A(x)
            return (float(i == j) * s * s - x[..., i] * x[..., j]) / s ** 3

        ders[alpha] = second
        bounds[alpha] = 1.0
    return LipschitzField(A, 1.0, ders, bounds, "sqrt1p")


def quadratic_field(d=2):
    """``A(x) = x_1^2``: not globally Lipschitz, but its second derivatives are bounded."""
    ders, bounds = {}, {}
    for order in (1, 2, 3):
        for alpha in multi_indices(d, order):
            if alpha[0] == order and order == 1:
                ders[alpha] = lambda x: 2.0 * x[..., 0]
                bounds[alpha] = math.inf
            elif alpha[0] == order and order == 2:
                ders[alpha] = _const(2.0)
                bounds[alpha] = 2.0
            else:
                ders[alpha] = _const(0.0)
                bounds[alpha] = 0.0
    return LipschitzField(lambda x: x[..., 0] ** 2, math.inf, ders, bounds, "quadratic")


def field_from_key(key, d=2):
    if key.startswith("linear:"):
        a = [float(v) for v in key.split(":", 1)[1].split(",")]
        if len(a) != d:
            raise ValueError(f"linear field needs {d} coefficients, got {len(a)}")
        return linear_field(a)
    if key == "sqrt1p":
        return sqrt1p_field(d)
    if key == "quadratic":
        return quadratic_field(d)
    raise ValueError(f"unknown field key {key!r}")


@dataclass(frozen=True)
class AnalyticProfile:
    func: Callable
    deriv: Callable
    radius: float
    label: str = ""

    def __post_init__(self):
        t = np.linspace(-min(self.radius, 10.0), min(self.radius, 10.0), 41)
        if not np.allclose(self.func(t), self.func(-t), rtol=1e-12, atol=1e-12):
            raise ValueError(f"profile {self.label!r} is not even")


def cosh_profile():
    return AnalyticProfile(np.cosh, np.sinh, math.inf, "cosh")


PROFILE_KEYS = {"cosh": cosh_profile}


# --------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class Convolution:
    """Marks ``K(x, y) = k(x - y)``."""


@dataclass(frozen=True)
class Taylor:
    """``K = |z|^-d * G((A(x) - sum_{|a|<order} A_a(y) z^a / a!) / |z|^power)``.

    ``profile`` is ``("pow", k)`` for ``G(t) = t^k`` or ``("analytic", F)``.
    """

    field: LipschitzField
    order: int
    power: int
    profile: tuple

    def alphas(self, d):
        return [a for m in range(self.order) for a in multi_indices(d, m)]


@dataclass(frozen=True)
class KernelSpec:
    dimension: int
    func: Callable
    holder_delta: float = 1.0
    label: str = ""
    structure: object = None

    def __post_init__(self):
        if not 0.0 < self.holder_delta <= 1.0:
            raise ValueError("Holder exponent must lie in (0, 1]")

    def __call__(self, x, y):
        return np.asarray(self.func(np.asarray(x, np.float64), np.asarray(y, np.float64)),
                          dtype=np.complex128)

    @property
    def is_convolution(self):
        return isinstance(self.structure, Convolution)


def _taylor_eval(st, d):
    alphas = st.alphas(d)
    ders = [(st.field.derivative(a), monomial_factor(a)) for a in alphas]
    kind, arg = st.profile

    def func(x, y):
        z = x - y
        r = np.linalg.norm(z, axis=-1)
        p = st.field(x)
        for (der, (alpha, fact)) in ders:
            p = p - der(y) * monomial(z, alpha) / fact
        t = p / r ** st.power
        g = t ** arg if kind == "pow" else arg.func(t)
        return g * inv_power(r, d)

    return func


def monomial_factor(alpha):
    return (alpha, float(alpha_factorial(alpha)))


def make_kernel(family, d=2, field=None, k=1, profile=None, l=1, r=None):
    """Build one of the kernel families.

    ``field`` is a :class:`LipschitzField` (commutator-type families),
    ``k`` the commutator power, ``profile`` an :class:`AnalyticProfile`,
    ``l`` the Taylor order, ``r`` the imaginary exponent of the oscillating
    power kernel.
    """
    if family == "power":
        return KernelSpec(d, lambda x, y: inv_power(np.linalg.norm(x - y, axis=-1), d),
                          1.0, "power", Convolution())
    if family == "muckenhoupt":
        if r is None or r == 0:
            raise ValueError("muckenhoupt kernel needs a nonzero r (r = 0 is the power kernel)")
        r = float(r)

        def muck(x, y):
            rad = np.linalg.norm(x - y, axis=-1)
            return inv_power(rad, d) * np.exp(-1j * r * np.log(rad))

        return KernelSpec(d, muck, 1.0, f"muckenhoupt:{r:g}", Convolution())
    if family not in FAMILIES:
        raise ValueError(f"unknown kernel family {family!r}")
    if field is None:
        raise ValueError(f"{family} kernel needs a field A")
    if family == "commutator":
        st = Taylor(field, 1, 1, ("pow", 1))
        label = "commutator"
    elif family == "higher":
        if int(k) != k or k < 1:
            raise ValueError("commutator power k must be a positive integer")
        st = Taylor(field, 1, 1, ("pow", int(k)))
        label = f"higher:{int(k)}"
    elif family == "general":
        if profile is None:
            raise ValueError("general commutator needs an analytic profile F")
        if profile.radius < field.grad_bound:
            raise ValueError("profile validity radius is smaller than ||grad A||_inf")
        st = Taylor(field, 1, 1, ("analytic", profile))
        label = f"general:{profile.label}"
    else:
        if int(l) != l or l < 1:
            raise ValueError("Taylor order l must be a positive integer")
        l = int(l)
        for m in range(l):
            for alpha in multi_indices(d, m):
                if any(alpha) and tuple(alpha) not in field.derivatives:
                    raise ValueError(f"field {field.label!r} lacks derivative {alpha} needed for l={l}")
        for alpha in multi_indices(d, l):
            if tuple(alpha) not in field.derivative_bounds:
                raise ValueError(f"field {field.label!r} lacks a sup bound for derivative {alpha}")
        st = Taylor(field, l, l, ("pow", 1))
        label = f"bc:{l}"
    return KernelSpec(d, _taylor_eval(st, d), 1.0, f"{label}[{field.label}]", st)


def kernel_from_key(key, d=2, field="sqrt1p", profile="cosh"):
    """Kernel by CLI key: power, commutator, higher:k, general, bc:l, muckenhoupt:r."""
    name, _, arg = key.partition(":")
    A = field_from_key(field, d) if isinstance(field, str) else field
    if name == "power":
        return make_kernel("power", d)
    if name == "muckenhoupt":
        return make_kernel("muckenhoupt", d, r=float(arg) if arg else None)
    if name == "commutator":
        return make_kernel("commutator", d, field=A)
    if name == "higher":
        return make_kernel("higher", d, field=A, k=int(arg or 1))
    if name == "general":
        F = PROFILE_KEYS[profile]() if isinstance(profile, str) else profile
        return make_kernel("general", d, field=A, profile=F)
    if name == "bc":
        return make_kernel("bajsanski_coifman", d, field=A, l=int(arg or 1))
    raise ValueError(f"unknown kernel key {key!r}")


# --------------------------------------------------------------------------
# empirical constants


BLOCK = 4096


@dataclass
class PairSampler:
    """Random pairs ``x != y``: ``x`` uniform in a box, ``|x - y|`` log-uniform."""

    dimension: int
    box: float = 1.0
    r_min: float = 1e-2
    r_max: float = 2.0
    seed: int = 0

    def _directions(self, rng, count):
        u = rng.standard_normal((count, self.dimension))
        return u / np.linalg.norm(u, axis=-1, keepdims=True)

    def _blocks(self, count, one):
        # fixed-size blocks with their own seeds: a larger count extends a smaller one
        parts = [one(np.random.default_rng([self.seed, b]), BLOCK) for b in range(-(-count // BLOCK))]
        return tuple(np.concatenate(p)[:count] for p in zip(*parts))

    def _one(self, rng, m):
        x = rng.uniform(-self.box, self.box, (m, self.dimension))
        r = np.exp(rng.uniform(np.log(self.r_min), np.log(self.r_max), m))
        return x, x + r[:, None] * self._directions(rng, m)

    def draw(self, count):
        return self._blocks(count, self._one)


@dataclass
class TripleSampler(PairSampler):
    """Triples ``(a, b, c)`` with ``|a - c| > 2 |a - b|``."""

    q_min: float = 1e-3
    q_max: float = 0.5

    def _one(self, rng, m):
        a = rng.uniform(-self.box, self.box, (m, self.dimension))
        big = np.exp(rng.uniform(np.log(self.r_min), np.log(self.r_max), m))
        q = rng.uniform(self.q_min, self.q_max, m)
        q = np.minimum(q, np.nextafter(self.q_max, 0.0))
        c = a + big[:, None] * self._directions(rng, m)
        b = a + (q * big)[:, None] * self._directions(rng, m)
        return a, b, c


def _finite_or_raise(vals, x, y):
    bad = ~np.isfinite(vals)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(f"kernel is not finite at x={x[i]}, y={y[i]}")


def check_size(K, sampler, count):
    """``max |K(x, y)| * |x - y|^d`` over ``count`` sampled pairs."""
    if count < 1:
        raise ValueError("count must be positive")
    x, y = sampler.draw(count)
    vals = K(x, y)
    _finite_or_raise(vals, x, y)
    ref = inv_power(np.linalg.norm(x - y, axis=-1), K.dimension)
    return float(np.max(np.abs(vals) / ref))


@dataclass(frozen=True)
class RegularityEstimate:
    first: float
    second: float

    @property
    def value(self):
        return max(self.first, self.second)


def check_regularity(K, sampler, count):
    """Largest Holder quotients in the first and second slot."""
    if count < 1:
        raise ValueError("count must be positive")
    a, b, c = sampler.draw(count)
    big = np.linalg.norm(a - c, axis=-1)
    small = np.linalg.norm(a - b, axis=-1)
    if np.any(big <= 2.0 * small):
        raise RuntimeError("sampler produced a triple violating |x1 - y| > 2|x1 - x2|")
    d, delta = K.dimension, K.holder_delta
    scale = big ** (d + delta) / small ** delta
    k_ac = K(a, c)
    _finite_or_raise(k_ac, a, c)
    first = np.abs(k_ac - K(b, c)) * scale
    second = np.abs(K(c, a) - K(c, b)) * scale
    return RegularityEstimate(float(np.max(first)), float(np.max(second)))


# --------------------------------------------------------------------------
# dyadic and mollified pieces


def l_delta(n, delta):
    """``floor(2 log2(n) / delta) + 2``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    # guard against log2(n)/delta landing a hair below an integer
    return int(math.floor(2.0 * math.log2(n) / delta + 1e-9)) + 2


def _ball_rule(d, resolution):
    """Tensor midpoint nodes on [-1, 1]^d with their cell volume."""
    ax = -1.0 + (np.arange(resolution) + 0.5) * (2.0 / resolution)
    mesh = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    keep = np.linalg.norm(mesh, axis=-1) < 1.0
    return mesh[keep], (2.0 / resolution) ** d


@dataclass(frozen=True)
class DyadicPiece:
    base: KernelSpec
    j: int
    phi: object
    n: int | None = None
    eta: object = None
    quad_resolution: int = 0
    level: int | None = None

    @property
    def dimension(self):
        return self.base.dimension

    @property
    def mollified(self):
        return self.n is not None

    @property
    def support(self):
        """Closed radial support of the piece in ``|x - y|``."""
        if self.mollified:
            return 2.0 ** (self.j - 2), 2.0 ** (self.j + 2)
        return 2.0 ** (self.j - 1), 2.0 ** (self.j + 1)

    @property
    def mollifier_radius(self):
        return 2.0 ** (self.j - self.level) if self.mollified else 0.0

    def _rule(self):
        nodes, vol = _ball_rule(self.dimension, self.quad_resolution)
        w = self.eta(np.linalg.norm(nodes, axis=-1)) * vol
        return nodes * self.mollifier_radius, w

    @property
    def mass_error(self):
        """Deviation of the raw tensor rule's mollifier mass from one."""
        if not self.mollified:
            return 0.0
        return abs(float(self._rule()[1].sum()) - 1.0)

    def _raw(self, x, y):
        r = np.linalg.norm(x - y, axis=-1)
        w = self.phi(r * 2.0 ** (-self.j))
        out = np.zeros(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]), dtype=np.complex128)
        live = np.broadcast_to(w > 0, out.shape)
        if np.any(live):
            xb = np.broadcast_to(x, out.shape + (x.shape[-1],))[live]
            yb = np.broadcast_to(y, out.shape + (y.shape[-1],))[live]
            out[live] = np.broadcast_to(w, out.shape)[live] * self.base(xb, yb)
        return out

    def __call__(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if not self.mollified:
            return self._raw(x, y)
        shape = np.broadcast_shapes(x.shape[:-1], y.shape[:-1])
        d = self.dimension
        xb = np.broadcast_to(x, shape + (d,)).reshape(-1, d)
        yb = np.broadcast_to(y, shape + (d,)).reshape(-1, d)
        out = np.zeros(len(xb), dtype=np.complex128)
        r = np.linalg.norm(xb - yb, axis=-1)
        lo, hi = self.support
        live = np.flatnonzero((r >= lo) & (r <= hi))
        nodes, w = self._rule()
        w = w / w.sum()  # discrete unit mass
        step = max(1, (1 << 21) // len(nodes))
        for s in range(0, len(live), step):
            idx = live[s:s + step]
            xs = xb[idx][:, None, :] - nodes[None, :, :]
            out[idx] = self._raw(xs, yb[idx][:, None, :]) @ w
        return out.reshape(shape)


def dyadic_piece(K, j, phi=None):
    """``K_j(x, y) = phi(2^-j |x - y|) K(x, y)``."""
    return DyadicPiece(K, int(j), phi if phi is not None else phi_annulus())


def mollified_piece(piece, n, eta=None, quad_resolution=32):
    """``K_j^n(x, y) = int eta_{j - l}(x - z) K_j(z, y) dz`` by a tensor rule."""
    if quad_resolution < 16:
        raise ValueError("mollifier quadrature needs at least 16 points per axis")
    if piece.mollified:
        raise ValueError("piece is already mollified")
    eta = eta if eta is not None else eta_mollifier(piece.dimension)
    lev = l_delta(n, piece.base.holder_delta)
    return DyadicPiece(piece.base, piece.j, piece.phi, int(n), eta, int(quad_resolution), lev)
