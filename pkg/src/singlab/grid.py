"""Uniform box grids, discrete Lebesgue norms, distribution functions and
the periodic transform pair used by every multiplier.

Samples sit at cell centres ``-L + (i + 1/2) h``. The transform is the
unnormalised forward DFT with a ``1/N^d`` inverse; the matching physical
frequency lattice is ``(pi / L) * {-N/2, ..., N/2 - 1}^d`` (FFT order).
"""
import struct
from dataclasses import dataclass

import numpy as np

SGRD_MAGIC = b"SGRD"
SGRD_VERSION = 1


@dataclass(frozen=True)
class GridSpec:
    dimension: int
    cells: int
    half_width: float

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ValueError("grid dimension must be 2 or 3")
        n = self.cells
        if n < 2 or n & (n - 1):
            raise ValueError(f"cells per axis must be a power of two, got {n}")
        if not self.half_width > 0:
            raise ValueError("half-width must be positive")

    @property
    def spacing(self):
        return 2.0 * self.half_width / self.cells

    @property
    def shape(self):
        return (self.cells,) * self.dimension

    @property
    def cell_volume(self):
        return self.spacing ** self.dimension

    def axis(self):
        return -self.half_width + (np.arange(self.cells) + 0.5) * self.spacing

    def coordinates(self):
        """Cell centres, shape ``shape + (d,)``."""
        ax = self.axis()
        mesh = np.meshgrid(*([ax] * self.dimension), indexing="ij")
        return np.stack(mesh, axis=-1)

    def frequencies(self):
        """Physical frequency lattice in FFT order, shape ``shape + (d,)``."""
        k = np.fft.fftfreq(self.cells, d=self.spacing) * 2.0 * np.pi
        mesh = np.meshgrid(*([k] * self.dimension), indexing="ij")
        return np.stack(mesh, axis=-1)


@dataclass(frozen=True)
class GridFunction:
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.size != self.spec.cells ** self.spec.dimension:
            raise ValueError("value count does not match the grid")
        v = v.reshape(self.spec.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("grid values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, spec, func):
        return cls(spec, func(spec.coordinates()))

    @classmethod
    def zeros(cls, spec):
        return cls(spec, np.zeros(spec.shape))

    def __add__(self, other):
        return GridFunction(self.spec, self.values + other.values)

    def __sub__(self, other):
        return GridFunction(self.spec, self.values - other.values)

    def __mul__(self, c):
        return GridFunction(self.spec, self.values * c)

    __rmul__ = __mul__


def lebesgue_norm(u, p):
    """Riemann-sum norm with cell weight h^d; ``p`` in {1, 2, inf}."""
    a = np.abs(u.values)
    if p == 1:
        return float(a.sum() * u.spec.cell_volume)
    if p == 2:
        return float(np.sqrt((a * a).sum() * u.spec.cell_volume))
    if p == np.inf or p == "inf":
        return float(a.max())
    raise ValueError(f"unsupported exponent {p}")


def distribution_measure(u, lam, mask=None):
    """``h^d * #{cells : |u| > lam}``, optionally over ``mask`` cells only."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    above = np.abs(u.values) > lam
    if mask is not None:
        above &= np.asarray(mask, dtype=bool)
    return float(np.count_nonzero(above) * u.spec.cell_volume)


def transform_pair(u, direction):
    """Forward (unnormalised) or inverse (``1/N^d``) DFT on the periodic grid."""
    if direction == "forward":
        return GridFunction(u.spec, np.fft.fftn(u.values))
    if direction == "inverse":
        return GridFunction(u.spec, np.fft.ifftn(u.values))
    raise ValueError("direction must be 'forward' or 'inverse'")


def frequency_l2_norm(coeffs):
    """L^2 norm of the spatial function whose forward coefficients are given."""
    spec = coeffs.spec
    a = np.abs(coeffs.values)
    return float(np.sqrt((a * a).sum() * spec.cell_volume / spec.cells ** spec.dimension))


def central_mask(spec, fraction=0.5):
    """Cells whose centres lie in ``[-fraction*L, fraction*L)^d``."""
    ax = spec.axis()
    inside = (ax >= -fraction * spec.half_width) & (ax < fraction * spec.half_width)
    out = inside
    for _ in range(spec.dimension - 1):
        out = np.logical_and.outer(out, inside)
    return out


def restrict(u, mask):
    return GridFunction(u.spec, np.where(mask, u.values, 0.0))


def write_sgrd(path, u):
    spec = u.spec
    header = SGRD_MAGIC + struct.pack("<IIId", SGRD_VERSION, spec.dimension, spec.cells, spec.half_width)
    body = np.ascontiguousarray(u.values, dtype="<c16").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def read_sgrd(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != SGRD_MAGIC:
        raise ValueError("not an .sgrd file (bad magic)")
    version, d, n, half = struct.unpack_from("<IIId", raw, 4)
    if version != SGRD_VERSION:
        raise ValueError(f"unsupported .sgrd version {version}")
    spec = GridSpec(d, n, half)
    offset = 4 + struct.calcsize("<IIId")
    count = n ** d
    if len(raw) - offset != 16 * count:
        raise ValueError("truncated .sgrd payload")
    vals = np.frombuffer(raw, dtype="<c16", count=count, offset=offset).reshape(spec.shape)
    return GridFunction(spec, vals.astype(np.complex128))
