"""Direct quadrature of the rough singular integral on a grid.

    T f(x) = sum_{y : |x - y| > eps} Omega(x - y) K(x, y) f(y) h^d

Three evaluation routes produce the same sums:

* ``stencil``   convolution kernels; one precomputed offset table.
* ``taylor``    commutator-type kernels whose only non-convolution factor is
  ``G((A(x) - sum_a A_a(y) z^a / a!) / |z|^p)``.
* ``pairwise``  any kernel, evaluated pair by pair in numpy; also the
  independent oracle for the two fast routes.

Truncation and dyadic cut-offs are decided on integer cell offsets, so the
set of included pairs never depends on floating-point rounding.
"""
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gamma as gamma_fn

from . import _backend
from .grid import GridFunction, central_mask, lebesgue_norm, transform_pair
from .kernel_zoo import Convolution, Taylor, dyadic_piece, inv_power, mollified_piece
from .sphere_fn import build_quadrature, compute_norms, monomial, alpha_factorial

RULES = ("plain", "antisymmetrized")
PAIR_BLOCK = 1 << 20


@dataclass(frozen=True)
class OperatorConfig:
    omega: object
    kernel: object
    epsilon: float | None = None
    rule: str = "plain"
    j_min: int | None = None
    j_max: int | None = None
    route: str = "auto"
    backend: str | None = None
    support_guard: bool = True

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("truncation epsilon must be positive")
        if self.route not in ("auto", "pairwise"):
            raise ValueError("route must be 'auto' or 'pairwise'")
        if self.omega.dimension != self.kernel.dimension:
            raise ValueError("omega and kernel dimensions differ")

    def eps(self, spec):
        return spec.spacing if self.epsilon is None else self.epsilon

    def j_range(self, spec):
        """Scales whose annuli cover every off-diagonal pair of the grid."""
        lo = math.floor(math.log2(spec.spacing)) - 1
        hi = math.ceil(math.log2(2.0 * 2.0 * spec.half_width * math.sqrt(spec.dimension)))
        return (lo if self.j_min is None else self.j_min,
                hi if self.j_max is None else self.j_max)


# ------------------------------------------------------------------ helpers


def _as3(a, d):
    return a if d == 3 else a[..., None]


def _offsets(spec):
    ax = np.arange(-(spec.cells - 1), spec.cells)
    return np.stack(np.meshgrid(*([ax] * spec.dimension), indexing="ij"), axis=-1)


def _support(f):
    vals = _as3(f.values, f.spec.dimension)
    idx = np.argwhere(vals != 0)
    rank = np.full(vals.shape, -1, dtype=np.int64)
    rank[tuple(idx.T)] = np.arange(len(idx))
    return np.ascontiguousarray(idx, dtype=np.int64), np.ascontiguousarray(vals[tuple(idx.T)]), rank


def _all_cells(spec):
    shape3 = _as3(np.empty(spec.shape), spec.dimension).shape
    return np.ascontiguousarray(np.argwhere(np.ones(shape3, dtype=bool)), dtype=np.int64)


def _guard(cfg, f):
    if cfg.support_guard and np.any((f.values != 0) & ~central_mask(f.spec, 0.5)):
        raise ValueError("f must be supported in the central half of the box "
                         "(pass support_guard=False to override)")


@dataclass(frozen=True)
class Weight:
    """Which offsets a sum includes and with what extra factor."""

    cut2: float = 0.0              # keep |o|^2 > cut2 (in cells)
    j: int | None = None           # multiply by phi(2^-j |z|)
    phi: object = None

    def __call__(self, o, z):
        r2 = np.sum(o * o, axis=-1)
        w = (r2 > self.cut2).astype(np.float64)
        if self.j is not None:
            w = w * self.phi(np.linalg.norm(z, axis=-1) * 2.0 ** (-self.j))
        return w


# ------------------------------------------------------------------ stencils


def _convolution_stencil(cfg, spec, weight, kernel_eval):
    d, h = spec.dimension, spec.spacing
    o = _offsets(spec)
    z = o * h
    w = weight(o, z)
    live = w != 0
    sten = np.zeros(w.shape, dtype=np.complex128)
    zl = z[live]
    vals = kernel_eval(zl, np.zeros_like(zl)) * cfg.omega(zl) * w[live] * spec.cell_volume
    if not np.all(np.isfinite(vals)):
        raise ValueError("kernel or omega is not finite at an included offset")
    sten[live] = vals
    return np.ascontiguousarray(_as3(sten, d))


@dataclass
class TaylorTables:
    sstencil: np.ndarray
    rstencil: np.ndarray
    zstencil: np.ndarray
    agrid: np.ndarray
    mode: int
    power_k: int
    alphas: list = field(default_factory=list)


def _taylor_tables(cfg, spec, weight, st):
    d, h = spec.dimension, spec.spacing
    o = _offsets(spec)
    z = o * h
    w = weight(o, z)
    live = w != 0
    r = np.linalg.norm(z, axis=-1)
    s = np.zeros(w.shape, dtype=np.complex128)
    rr = np.zeros(w.shape)
    zl = z[live]
    s[live] = cfg.omega(zl) * inv_power(r[live], d) * w[live] * spec.cell_volume
    rr[live] = 1.0 / r[live] ** st.power
    if not np.all(np.isfinite(s)):
        raise ValueError("omega is not finite at an included offset")
    alphas = st.alphas(d)
    zs = np.stack([_as3(monomial(z, a) / alpha_factorial(a), d) for a in alphas])
    agrid = _as3(st.field(spec.coordinates()), d)
    kind, arg = st.profile
    if kind == "pow":
        mode, pk = 0, int(arg)
    elif getattr(arg, "label", "") == "cosh":
        mode, pk = 1, 0
    else:
        return None
    return TaylorTables(np.ascontiguousarray(_as3(s, d)), np.ascontiguousarray(_as3(rr, d)),
                        np.ascontiguousarray(zs), np.ascontiguousarray(agrid, dtype=np.float64),
                        mode, pk, alphas)


def _taylor_coef(spec, st, tables, sup_idx):
    coords = spec.coordinates()
    pts = coords[tuple(sup_idx[:, :spec.dimension].T)]
    coef = np.stack([st.field.derivative(a)(pts) for a in tables.alphas])
    return np.ascontiguousarray(coef, dtype=np.float64)


# ------------------------------------------------------------------ routes


def _pairwise(cfg, spec, sup_idx, sup_val, out_idx, kernel_eval, weight):
    d, h = spec.dimension, spec.spacing
    coords = spec.coordinates().reshape(-1, d)
    flat_s = np.ravel_multi_index(tuple(sup_idx[:, :d].T), spec.shape)
    flat_o = np.ravel_multi_index(tuple(out_idx[:, :d].T), spec.shape)
    ys, yo = coords[flat_s], sup_idx[:, :d]
    out = np.zeros(len(out_idx), dtype=np.complex128)
    step = max(1, PAIR_BLOCK // max(1, len(ys)))
    for a in range(0, len(out_idx), step):
        xs = coords[flat_o[a:a + step]]
        xo = out_idx[a:a + step, :d]
        o = xo[:, None, :] - yo[None, :, :]
        z = xs[:, None, :] - ys[None, :, :]
        w = weight(o, z)
        live = w != 0
        vals = np.zeros(w.shape, dtype=np.complex128)
        xb = np.broadcast_to(xs[:, None, :], z.shape)[live]
        yb = np.broadcast_to(ys[None, :, :], z.shape)[live]
        kv = kernel_eval(xb, yb) * cfg.omega(z[live]) * w[live]
        if not np.all(np.isfinite(kv)):
            raise ValueError("kernel or omega is not finite at an included pair")
        vals[live] = kv
        out[a:a + step] = vals @ sup_val * spec.cell_volume
    return out


def _evaluate(cfg, f, out_idx, weight, kernel_eval, structure):
    spec = f.spec
    sup_idx, sup_val, rank = _support(f)
    if len(sup_idx) == 0 or len(out_idx) == 0:
        return np.zeros(len(out_idx), dtype=np.complex128)
    be = _backend.get(cfg.backend)
    nt = _backend.threads()
    antisym = cfg.rule == "antisymmetrized"
    out = None
    if cfg.route == "auto" and isinstance(structure, Convolution):
        sten = _convolution_stencil(cfg, spec, weight, kernel_eval)
        out = be.stencil_apply(sten, sup_idx, sup_val, out_idx, antisym, rank, nt)
    elif cfg.route == "auto" and isinstance(structure, Taylor):
        tables = _taylor_tables(cfg, spec, weight, structure)
        if tables is not None:
            coef = _taylor_coef(spec, structure, tables, sup_idx)
            out = be.modulated_apply(tables.sstencil, tables.rstencil, tables.zstencil,
                                     tables.agrid, coef, sup_idx, sup_val, out_idx,
                                     tables.mode, tables.power_k, antisym, rank, nt)
    if out is None:
        out = _pairwise(cfg, spec, sup_idx, sup_val, out_idx, kernel_eval, weight)
    out = np.asarray(out)
    if np.isrealobj(f.values) or not np.any(f.values.imag):
        if not cfg.kernel.label.startswith("muckenhoupt"):
            big = float(np.abs(out).max()) if out.size else 0.0
            if big and float(np.abs(out.imag).max()) > 1e-12 * big:
                raise RuntimeError("real kernel produced a complex output")
            out = out.real.astype(np.complex128)
    return out


def _truncation(cfg, spec):
    return Weight(cut2=(cfg.eps(spec) / spec.spacing) ** 2)


# ------------------------------------------------------------------ public


def evaluate_truncated(cfg, f, cells):
    """``T f`` at the given cells only (``cells``: integer array ``(m, d)``)."""
    _guard(cfg, f)
    cells = np.atleast_2d(np.asarray(cells, dtype=np.int64))
    if f.spec.dimension == 2:
        cells = np.column_stack((cells, np.zeros(len(cells), dtype=np.int64)))
    return _evaluate(cfg, f, np.ascontiguousarray(cells), _truncation(cfg, f.spec),
                     cfg.kernel, cfg.kernel.structure)


def apply_truncated(cfg, f):
    """``T f`` on every cell, truncated at ``|x - y| > epsilon``."""
    _guard(cfg, f)
    spec = f.spec
    vals = _evaluate(cfg, f, _all_cells(spec), _truncation(cfg, spec), cfg.kernel,
                     cfg.kernel.structure)
    return GridFunction(spec, vals)


def diagonal_excluded(cfg, f):
    """The direct sum over every pair except ``x = y``."""
    return apply_truncated(replace(cfg, epsilon=0.5 * f.spec.spacing), f)


def apply_dyadic(cfg, f, j, mollified=None, phi=None, quad_resolution=32):
    """``T_j f`` with kernel ``phi(2^-j |x-y|) K``, or its mollified version."""
    _guard(cfg, f)
    spec = f.spec
    piece = dyadic_piece(cfg.kernel, j, phi)
    if mollified is None:
        weight = Weight(cut2=0.0, j=piece.j, phi=piece.phi)
        vals = _evaluate(cfg, f, _all_cells(spec), weight, cfg.kernel, cfg.kernel.structure)
    else:
        if mollified < 2:
            raise ValueError("mollification level n must be at least 2")
        mp = mollified_piece(piece, mollified, quad_resolution=quad_resolution)
        structure = Convolution() if cfg.kernel.is_convolution else None
        vals = _evaluate(cfg, f, _all_cells(spec), Weight(cut2=0.0), mp, structure)
    return GridFunction(spec, vals)


def dyadic_sum(cfg, f):
    """``sum_j T_j f`` over the configured scale range."""
    lo, hi = cfg.j_range(f.spec)
    total = np.zeros(f.spec.shape, dtype=np.complex128)
    for j in range(lo, hi + 1):
        total += apply_dyadic(cfg, f, j).values
    return GridFunction(f.spec, total)


def omega_l1(omega, resolution=None):
    d = omega.dimension
    quad = build_quadrature(d, resolution or (8192 if d == 2 else 65536))
    return compute_norms(omega, quad).l1


def mollification_error(cfg, f, j, n, quad_resolution=32):
    """``||T_j f - T_j^n f||_1 / (||Omega||_1 ||f||_1)``."""
    f_l1 = lebesgue_norm(f, 1)
    if f_l1 == 0:
        raise ValueError("f has zero L^1 norm")
    a = apply_dyadic(cfg, f, j)
    b = apply_dyadic(cfg, f, j, mollified=n, quad_resolution=quad_resolution)
    return lebesgue_norm(a - b, 1) / (omega_l1(cfg.omega) * f_l1)


# ------------------------------------------------------------------ oracle


def riesz_constant(d):
    """Transform of p.v. ``x_j / |x|^(d+1)`` is ``c * (-i xi_j / |xi|)`` with this ``c``.

    Equals ``2 pi`` for d = 2; re-derived numerically in the test suite by a
    least-squares fit of the direct quadrature against the bare multiplier.
    """
    # Derivation trail (d=2, Gaussian, padded oracle, eps = h/2, L = 8):
    # fitted c = 5.8590 (N=64), 6.0787 (N=128), 6.1886 (N=256); Richardson
    # on the last two (first-order in h) gives 6.2985, 0.25% from 2 pi.
    # The closed form below is frozen on that evidence.
    return math.pi ** ((d + 1) / 2.0) / gamma_fn((d + 1) / 2.0)


def spectral_riesz_oracle(f, axis, constant=None, pad=False):
    """``c * (-i xi_axis / |xi|)`` applied by FFT; ``pad`` doubles the box
    with zeros first, suppressing periodic images."""
    spec = f.spec
    d = spec.dimension
    if not 1 <= axis <= d:
        raise ValueError(f"axis must lie in 1..{d}")
    c = riesz_constant(d) if constant is None else constant
    if pad:
        from .grid import GridSpec
        big = GridSpec(d, 2 * spec.cells, 2.0 * spec.half_width)
        n, q = spec.cells, spec.cells // 2
        vals = np.zeros(big.shape, dtype=np.complex128)
        vals[(slice(q, q + n),) * d] = f.values
        out = spectral_riesz_oracle(GridFunction(big, vals), axis, c, pad=False)
        return GridFunction(spec, out.values[(slice(q, q + n),) * d])
    xi = spec.frequencies()
    r = np.linalg.norm(xi, axis=-1)
    m = np.where(r > 0, -1j * c * xi[..., axis - 1] / np.where(r > 0, r, 1.0), 0.0)
    coeff = transform_pair(f, "forward")
    return transform_pair(GridFunction(spec, coeff.values * m), "inverse")
