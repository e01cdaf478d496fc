"""Direction nets, the angular partition of unity, Fourier multiplier
symbols, the finite-difference Mihlin estimator, the overlap count and the
exponent bookkeeping that decides whether a parameter tuple is admissible.

Symbols are evaluated on physical frequencies ``xi`` of shape ``(..., d)``.
Degree-0 homogeneous symbols are undefined at the origin; each symbol
carries the value it takes there (``zero_value``).
"""
import json
import math
from dataclasses import dataclass, field
from itertools import product
from math import comb
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from . import _backend
from .grid import GridFunction, transform_pair
from .profiles import Phi_plateau, psi_lowpass, zeta_cap
from .sphere_fn import build_quadrature, multi_indices

# ---------------------------------------------------------------- nets


@dataclass(frozen=True)
class DirectionNet:
    n: int
    gamma: float
    dimension: int
    vectors: np.ndarray
    separation: float
    granularity: float = 0.0

    def __len__(self):
        return len(self.vectors)

    @property
    def scale(self):
        """``2^(n gamma)``."""
        return 2.0 ** (self.n * self.gamma)

    def tree(self):
        return cKDTree(self.vectors)

    def min_distance(self):
        if len(self) < 2:
            return math.inf
        dist, _ = self.tree().query(self.vectors, k=2)
        return float(dist[:, 1].min())

    def covering_radius(self, nodes):
        """Largest distance from a node to its nearest net vector."""
        dist, _ = self.tree().query(nodes, k=1)
        return float(dist.max())

    def to_json(self):
        return json.dumps({"n": self.n, "gamma": self.gamma, "dimension": self.dimension,
                           "separation": self.separation, "granularity": self.granularity,
                           "vectors": self.vectors.tolist()})

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        vec = np.asarray(doc["vectors"], dtype=np.float64).reshape(-1, doc["dimension"])
        return cls(int(doc["n"]), float(doc["gamma"]), int(doc["dimension"]), vec,
                   float(doc["separation"]), float(doc.get("granularity", 0.0)))


def net_separation(n, gamma):
    return 2.0 ** (-n * gamma - 4)


def net_quadrature(d, separation):
    """Equal-weight rule with granularity at most ``separation / 4``.

    On the circle the node count is five times the packing number
    ``floor(2 pi / theta)``, ``theta = 2 asin(s/2)``: the greedy scan then keeps
    exactly every fifth node and the net has the packing cardinality.
    """
    if d == 2:
        count = 5 * math.floor(2.0 * math.pi / (2.0 * math.asin(separation / 2.0)))
    else:
        count = math.ceil(64.0 * math.pi / separation ** 2) + 1
    return build_quadrature(d, max(count, 8))


def _net_bound(d, s):
    # disjoint caps of chord radius s/2 on the sphere
    if d == 2:
        return int(2.0 * math.pi / s * 1.2) + 16
    return int(16.0 / s ** 2 * 1.3) + 16


def direction_net(n, gamma, d=2, quad=None, backend=None):
    """Maximal ``2^(-n gamma - 4)``-separated subset of the quadrature nodes.

    Nodes are scanned in quadrature order starting from the first one; a node
    joins the net unless a chosen vector lies closer than the separation.
    """
    if d not in (2, 3):
        raise ValueError("direction nets are built for d in {2, 3}")
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    s = net_separation(n, gamma)
    if quad is None:
        quad = net_quadrature(d, s)
    if quad.dimension != d:
        raise ValueError("quadrature dimension does not match d")
    if quad.granularity > s / 4.0:
        raise ValueError(f"quadrature granularity {quad.granularity:.3g} exceeds separation/4 = {s / 4:.3g}")
    nodes = quad.nodes
    if d == 2:
        nodes = np.column_stack((nodes, np.zeros(len(nodes))))
    idx = _backend.get(backend).greedy_net(np.ascontiguousarray(nodes), s, _net_bound(d, s))
    vec = np.array(quad.nodes[np.asarray(idx)])
    vec.setflags(write=False)
    return DirectionNet(int(n), float(gamma), d, vec, s, quad.granularity)


# ------------------------------------------------------------- symbols


@dataclass(frozen=True)
class MultiplierSymbol:
    func: Callable
    homogeneous: bool
    label: str = ""
    zero_value: complex = 0.0

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=np.float64)
        r = np.linalg.norm(xi, axis=-1)
        out = np.full(r.shape, complex(self.zero_value), dtype=np.complex128)
        nz = r > 0
        if np.any(nz):
            out[nz] = self.func(xi[nz])
        return out


def _unit(xi):
    return xi / np.linalg.norm(xi, axis=-1, keepdims=True)


def one_symbol():
    return MultiplierSymbol(lambda xi: np.ones(xi.shape[:-1]), True, "one", 1.0)


def riesz_symbol(axis, d=2, constant=1.0):
    """``constant * (-i xi_axis / |xi|)`` with a 1-based axis; 0 at the origin."""
    if not 1 <= axis <= d:
        raise ValueError(f"axis must lie in 1..{d}")
    k = axis - 1
    return MultiplierSymbol(lambda xi: -1j * constant * _unit(xi)[..., k], True,
                            f"riesz:{axis}", 0.0)


def directional_symbol(e_v, n, gamma, Phi=None, complement=False):
    """``Phi(2^(n gamma) <e_v, xi/|xi|>)`` or its complement ``1 - Phi(...)``."""
    Phi = Phi or Phi_plateau()
    e = np.asarray(e_v, dtype=np.float64)
    e = e / np.linalg.norm(e)
    scale = 2.0 ** (n * gamma)
    if complement:
        return MultiplierSymbol(lambda xi: 1.0 - Phi(scale * (_unit(xi) @ e)), True,
                                "dir-complement", 0.0)
    return MultiplierSymbol(lambda xi: Phi(scale * (_unit(xi) @ e)), True, "dir", 1.0)


def lp_symbols(k, psi=None):
    """Low-pass ``psi(2^k xi)`` and band ``beta_k = psi(2^k xi) - psi(2^(k+1) xi)``."""
    psi = psi or psi_lowpass()
    a, b = 2.0 ** k, 2.0 ** (k + 1)

    def low(xi):
        return psi(a * np.linalg.norm(xi, axis=-1))

    def band(xi):
        r = np.linalg.norm(xi, axis=-1)
        return psi(a * r) - psi(b * r)

    return (MultiplierSymbol(low, False, f"lowpass:{k}", float(psi(0.0))),
            MultiplierSymbol(band, False, f"lp:{k}", 0.0))


def lp_reconstruction(k0, m, psi=None):
    """``V_m + sum_{k0 <= k < m} Lambda_k`` as one symbol (summed term by term)."""
    if m <= k0:
        raise ValueError("need m > k0")
    parts = [lp_symbols(m, psi)[0]] + [lp_symbols(k, psi)[1] for k in range(k0, m)]

    def total(xi):
        return sum(p(xi) for p in parts)

    return MultiplierSymbol(total, False, f"lp-sum:{k0}..{m}", sum(complex(p.zero_value) for p in parts))


@dataclass(frozen=True)
class PartitionOfUnity:
    """``Gamma_v = zeta(2^(n gamma) (xi/|xi| - e_v)) / sum_v' (same)``."""

    net: DirectionNet
    zeta: object
    _tree: object = field(repr=False, default=None)

    def __len__(self):
        return len(self.net)

    @property
    def radius(self):
        return 1.0 / self.net.scale

    def _terms(self, theta):
        """Per direction: (indices, raw numerators)."""
        tree = self._tree or self.net.tree()
        hits = tree.query_ball_point(theta, self.radius * (1.0 + 1e-12))
        out = []
        for th, idx in zip(theta, hits):
            idx = np.asarray(idx, dtype=np.int64)
            u = self.net.scale * np.linalg.norm(th - self.net.vectors[idx], axis=-1)
            out.append((idx, self.zeta(u)))
        return out

    def weights(self, xi):
        """Nonzero ``(indices, Gamma values)`` for each row of ``xi``."""
        xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
        rows = []
        for q, (idx, raw) in zip(xi, self._terms(_unit(xi))):
            den = raw.sum()
            if den < 1e-12:
                raise RuntimeError(f"partition denominator vanishes at {q}: covering violated")
            keep = raw > 0
            rows.append((idx[keep], raw[keep] / den))
        return rows

    def total(self, xi):
        """``sum_v Gamma_v(xi)`` for each row of ``xi``."""
        return np.array([w.sum() for _, w in self.weights(xi)])

    def symbol(self, v):
        card = len(self)

        def gamma_v(xi):
            flat = xi.reshape(-1, xi.shape[-1])
            vals = np.zeros(len(flat))
            for i, (idx, w) in enumerate(self.weights(flat)):
                hit = np.flatnonzero(idx == v)
                if hit.size:
                    vals[i] = w[hit[0]]
            return vals.reshape(xi.shape[:-1])

        return MultiplierSymbol(gamma_v, True, f"Gamma:{v}", 1.0 / card)


def partition_of_unity(net, zeta=None):
    return PartitionOfUnity(net, zeta or zeta_cap(), net.tree())


def apply_multiplier(m, u):
    """Inverse transform of ``m * (forward transform of u)`` on u's lattice."""
    vals = m(u.spec.frequencies())
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"symbol {m.label!r} is not finite on the frequency lattice")
    coeff = transform_pair(u, "forward")
    return transform_pair(GridFunction(u.spec, coeff.values * vals), "inverse")


def symbol_from_key(key, d=2):
    """Symbols by CLI key: ``one``, ``riesz:j``, ``lp:k``, ``dir:n,gamma,v``."""
    name, _, arg = key.partition(":")
    if name == "one":
        return one_symbol()
    if name == "riesz":
        return riesz_symbol(int(arg), d)
    if name == "lp":
        return lp_symbols(int(arg))[1]
    if name == "dir":
        n, gamma, v = arg.split(",")
        net = direction_net(int(n), float(gamma), d)
        return directional_symbol(net.vectors[int(v)], int(n), float(gamma))
    raise ValueError(f"unknown symbol key {key!r}")


# ----------------------------------------------------- Mihlin estimator


def _stencil(alpha):
    """Central-difference shifts (in step units) and weights for d^alpha."""
    per_axis = []
    for a in alpha:
        per_axis.append([((a / 2.0 - j), (-1) ** j * comb(a, j)) for j in range(a + 1)])
    out = []
    for combo in product(*per_axis):
        out.append((np.array([c[0] for c in combo]), float(np.prod([c[1] for c in combo]))))
    return out


def _scaled_derivatives(m, xi, alpha, step):
    """``|d^alpha m(xi)| |xi|^|alpha|`` with relative step ``step``."""
    r = np.linalg.norm(xi, axis=-1)
    h = step * r
    acc = np.zeros(len(xi), dtype=np.complex128)
    for shift, w in _stencil(alpha):
        acc += w * m(xi + shift[None, :] * h[:, None])
    order = sum(alpha)
    return np.abs(acc) / h ** order * r ** order


@dataclass(frozen=True)
class MihlinEstimate:
    A: float
    sup_m: float
    by_order: dict
    A_halved: float

    def as_dict(self):
        return {"A": self.A, "sup_m": self.sup_m, "A_halved": self.A_halved,
                "by_order": {str(k): v for k, v in self.by_order.items()}}


def mihlin_estimate(m, d, sample_frequencies, fd_step):
    """Largest ``|d^alpha m(xi)| |xi|^|alpha|`` over ``1 <= |alpha| <= d//2 + 1``.

    ``fd_step`` is relative to ``|xi|``. The estimate is repeated at half the
    step; a disagreement above 50% on any multi-index raises ``ValueError``.
    """
    xi = np.atleast_2d(np.asarray(sample_frequencies, dtype=np.float64))
    if xi.shape[-1] != d:
        raise ValueError("sample frequencies do not match d")
    if np.any(np.linalg.norm(xi, axis=-1) == 0):
        raise ValueError("samples must avoid the origin")
    if not 0.0 < fd_step < 0.5:
        raise ValueError("fd_step must lie in (0, 0.5)")
    sup_m = float(np.abs(m(xi)).max())
    floor = 1e-9 * max(1.0, sup_m)
    by_order, best, best_half = {}, 0.0, 0.0
    for order in range(1, d // 2 + 2):
        for alpha in multi_indices(d, order):
            a1 = float(_scaled_derivatives(m, xi, alpha, fd_step).max())
            a2 = float(_scaled_derivatives(m, xi, alpha, fd_step / 2.0).max())
            top = max(a1, a2)
            if top > floor and abs(a1 - a2) > 0.5 * top:
                raise ValueError(f"fd_step {fd_step:g} too coarse for derivative {alpha}: "
                                 f"{a1:.4g} vs {a2:.4g} under halving")
            by_order[alpha] = a1
            best, best_half = max(best, a1), max(best_half, a2)
    return MihlinEstimate(best, sup_m, by_order, best_half)


# ------------------------------------------------------------ overlap


@dataclass(frozen=True)
class OverlapReport:
    max_count: int
    max_sum_sq: float


def overlap_count(net, Phi=None, xi_samples=None, chunk=64):
    """Max over samples of ``#{v : Phi(2^(n gamma) <e_v, xi/|xi|>) != 0}`` and of ``sum_v Phi^2``."""
    Phi = Phi or Phi_plateau()
    xi = _unit(np.atleast_2d(np.asarray(xi_samples, dtype=np.float64)))
    best_c, best_s = 0, 0.0
    for s in range(0, len(xi), chunk):
        vals = Phi(net.scale * (xi[s:s + chunk] @ net.vectors.T))
        best_c = max(best_c, int(np.count_nonzero(vals, axis=1).max()))
        best_s = max(best_s, float((vals * vals).sum(axis=1).max()))
    return OverlapReport(best_c, best_s)


# ------------------------------------------------------- admissibility


@dataclass(frozen=True)
class AdmissibilityParams:
    d: int
    delta: float
    gamma: float
    iota: float
    eps0: float
    mu: float
    N1: int

    def _common(self):
        return self.mu + self.gamma * (self.d - 1) + self.gamma * (self.d // 2 + 1)

    @property
    def s1(self):
        return self._common() - 1 + self.eps0 + self.iota

    @property
    def s2(self):
        return self._common() - 1 + self.iota

    @property
    def s3(self):
        return self._common() - self.delta + self.iota

    @property
    def s4(self):
        return -self.eps0 * self.N1 + self.gamma * self.N1 + 2 * (self.d // 2 + 1) * self.gamma + self.iota

    def as_dict(self):
        s1, s2, s3, s4, ok = admissible_parameters(self)
        return {"d": self.d, "delta": self.delta, "gamma": self.gamma, "iota": self.iota,
                "eps0": self.eps0, "mu": self.mu, "N1": self.N1,
                "s": [s1, s2, s3, s4], "admissible": ok}


def admissible_parameters(p):
    """``(s1, s2, s3, s4, admissible)``; admissible iff all four are negative."""
    if not 0.0 < p.delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    if int(p.N1) != p.N1 or p.N1 < 1:
        raise ValueError("N1 must be a positive integer")
    if min(p.gamma, p.iota, p.eps0, p.mu) < 0:
        raise ValueError("gamma, iota, eps0 and mu must be nonnegative")
    s = (float(p.s1), float(p.s2), float(p.s3), float(p.s4))
    return s + (max(s) < 0,)


def find_admissible(d, delta=1.0, max_i=30):
    """First admissible tuple on gamma = 2^-i with iota = mu = gamma^2,
    eps0 = 10 gamma, N1 = ceil(2 / gamma); ``None`` if the scan finds none."""
    for i in range(1, max_i + 1):
        g = 2.0 ** -i
        p = AdmissibilityParams(d, delta, g, g * g, 10.0 * g, g * g, math.ceil(2.0 / g))
        if admissible_parameters(p)[-1]:
            return p
    return None
