"""Dyadic Calderon-Zygmund decomposition of a grid function.

Cubes come from the grid's own dyadic tree: a cube at scale ``k`` spans
``2^k`` cells per axis (physical side ``2^k h``) with its corner on a
multiple of ``2^k``. Selection is the usual stopping time on the average of
``|f|``, evaluated level by level on an averaging pyramid.
"""
import json
import math
from dataclasses import dataclass

import numpy as np

from .grid import GridFunction, lebesgue_norm


@dataclass(frozen=True)
class DyadicCube:
    scale: int
    corner: tuple
    side_length: float

    @property
    def side_cells(self):
        return 1 << self.scale

    def slices(self):
        s = self.side_cells
        return tuple(slice(c, c + s) for c in self.corner)


@dataclass(frozen=True)
class CZAtom:
    cube: DyadicCube
    values: np.ndarray
    mean_abs: float


def _coarsen(a, d):
    n = a.shape[0] // 2
    return a.reshape(sum(((n, 2),) * d, ())).mean(axis=tuple(range(1, 2 * d, 2)))


def _refine(a, d, factor):
    for ax in range(d):
        a = np.repeat(a, factor, axis=ax)
    return a


def _dilate(mask, left, right):
    """Box dilation: cell i is set if some j in [i - right, i + left] is set."""
    out = mask
    for ax in range(mask.ndim):
        n = out.shape[ax]
        c = np.cumsum(out.astype(np.int64), axis=ax)
        c = np.concatenate([np.zeros_like(np.take(c, [0], axis=ax)), c], axis=ax)
        lo = np.clip(np.arange(n) - right, 0, n)
        hi = np.clip(np.arange(n) + left + 1, 0, n)
        out = (np.take(c, hi, axis=ax) - np.take(c, lo, axis=ax)) > 0
    return out


@dataclass(frozen=True)
class CZDecomposition:
    spec: object
    level: float
    good: GridFunction
    atoms: tuple
    labels: np.ndarray
    exceptional: np.ndarray
    enlargement: float
    enlarged: np.ndarray
    degenerate: bool

    @property
    def cubes(self):
        return [a.cube for a in self.atoms]

    def bad(self):
        out = np.zeros(self.spec.shape, dtype=np.complex128)
        for a in self.atoms:
            out[a.cube.slices()] += a.values
        return GridFunction(self.spec, out)

    def scales(self):
        return sorted({a.cube.scale for a in self.atoms})


def cz_decompose(f, t, enlargement=4.0):
    """Stopping-time decomposition ``f = g + sum_Q b_Q`` at level ``t``.

    A cube is selected when the average of ``|f|`` over it exceeds ``t`` while
    every strict ancestor's average does not. If the root itself exceeds
    ``t`` the whole box is the single cube and the result is flagged
    ``degenerate``.
    """
    if not t > 0:
        raise ValueError("level t must be positive")
    if enlargement < 1:
        raise ValueError("enlargement factor must be at least 1")
    spec = f.spec
    d, n = spec.dimension, spec.cells
    depth = int(math.log2(n))
    pyramid = [np.abs(f.values)]
    for _ in range(depth):
        pyramid.append(_coarsen(pyramid[-1], d))

    labels = np.full(spec.shape, -1, dtype=np.int64)
    enlarged = np.zeros(spec.shape, dtype=bool)
    cubes = []
    blocked = np.zeros((1,) * d, dtype=bool)  # some strict ancestor exceeds t
    for m in range(depth, -1, -1):
        if m < depth:
            blocked = _refine(blocked | (pyramid[m + 1] > t), d, 2)
        chosen = (pyramid[m] > t) & ~blocked
        if not chosen.any():
            continue
        idx = np.argwhere(chosen)
        side = 1 << m
        ids = np.full(chosen.shape, -1, dtype=np.int64)
        ids[tuple(idx.T)] = np.arange(len(cubes), len(cubes) + len(idx))
        fine = _refine(ids, d, side)
        labels = np.where(fine >= 0, fine, labels)
        reach = (enlargement - 1.0) * side / 2.0
        enlarged |= _dilate(_refine(chosen, d, side), int(math.floor(reach + 0.5)),
                            int(math.ceil(reach - 0.5)))
        for q in idx:
            cubes.append((m, tuple(int(c) * side for c in q), float(pyramid[m][tuple(q)])))

    vals = f.values
    flat = labels.ravel()
    inside = flat >= 0
    count = np.bincount(flat[inside], minlength=len(cubes)).astype(np.float64)
    fv = vals.ravel()[inside]
    sums = (np.bincount(flat[inside], weights=fv.real, minlength=len(cubes))
            + 1j * np.bincount(flat[inside], weights=fv.imag, minlength=len(cubes)))
    avg = sums / np.maximum(count, 1.0)
    g = vals.copy()
    g.ravel()[inside] = avg[flat[inside]]

    h = spec.spacing
    atoms = []
    for i, (m, corner, mean_abs) in enumerate(cubes):
        cube = DyadicCube(m, corner, (1 << m) * h)
        sl = cube.slices()
        atoms.append(CZAtom(cube, vals[sl] - avg[i], mean_abs))
    labels.setflags(write=False)
    exceptional = labels >= 0
    return CZDecomposition(spec, float(t), GridFunction(spec, g), tuple(atoms), labels,
                           exceptional, float(enlargement), enlarged,
                           bool(pyramid[depth].ravel()[0] > t))


def bad_by_scale(dec, k):
    """``B_k``: the sum of the atoms whose cube has scale ``k``."""
    out = np.zeros(dec.spec.shape, dtype=np.complex128)
    for a in dec.atoms:
        if a.cube.scale == k:
            out[a.cube.slices()] += a.values
    return GridFunction(dec.spec, out)


@dataclass(frozen=True)
class CZReport:
    level: float
    degenerate: bool
    properties: dict
    cubes: list

    @property
    def passed(self):
        return all(p["passed"] for p in self.properties.values())

    def as_dict(self):
        return {"level": self.level, "degenerate": self.degenerate, "passed": self.passed,
                "properties": self.properties,
                "cubes": [[k, list(c), a] for k, c, a in self.cubes]}

    def to_json(self, **kw):
        return json.dumps(self.as_dict(), **kw)


def verify_cz(dec, f, t, tol=1e-12):
    """Check every decomposition property; failures are report entries."""
    spec = f.spec
    d, vol = spec.dimension, spec.cell_volume
    fv = f.values
    scale_f = max(float(np.abs(fv).max()), 1e-300)
    f_l1 = lebesgue_norm(f, 1)
    b = dec.bad().values
    g = dec.good.values
    props = {}

    err = float(np.abs(fv - g - b).max()) / scale_f
    props["cz-i"] = {"passed": err <= tol, "max_rel_residual": err}

    g_inf = float(np.abs(g).max())
    g_l2sq = lebesgue_norm(dec.good, 2) ** 2
    props["cz-ii"] = {
        "passed": g_inf <= 2 ** d * t * (1 + tol) and g_l2sq <= 2 ** d * t * f_l1 * (1 + tol),
        "g_inf_over_t": g_inf / t,
        "g_l2sq_over_t_f_l1": g_l2sq / (t * f_l1) if f_l1 > 0 else 0.0,
    }

    cover = np.zeros(spec.shape, dtype=np.int64)
    for a in dec.atoms:
        cover[a.cube.slices()] += 1
    overlap = int(cover.max()) if dec.atoms else 0
    outside = float(np.abs(b[cover == 0]).max()) if np.any(cover == 0) else 0.0
    props["cz-iii"] = {"passed": overlap <= 1 and outside == 0.0, "max_cover": overlap,
                       "bad_off_cubes": outside}

    m_e = float(np.count_nonzero(dec.exceptional)) * vol
    props["cz-iv"] = {"passed": m_e <= f_l1 / t * (1 + tol),
                      "measure_E_times_t_over_f_l1": m_e * t / f_l1 if f_l1 > 0 else 0.0}

    lab = dec.labels.ravel()
    live = lab >= 0
    nq = len(dec.atoms)
    if nq:
        li, bl = lab[live], b.ravel()[live]
        mean = np.abs(np.bincount(li, bl.real, nq) + 1j * np.bincount(li, bl.imag, nq))
        mass = np.bincount(li, np.abs(bl), nq)
        ref = np.maximum(np.bincount(li, np.abs(fv.ravel()[live]), nq), 1e-300)
        sides = np.array([a.cube.side_length ** d for a in dec.atoms])
        worst_mean = float(np.max(mean / ref))
        worst_mass = float(np.max(mass * vol / (t * sides)))
    else:
        worst_mean = worst_mass = 0.0
    props["cz-v"] = {"passed": worst_mean <= tol and worst_mass <= 2 ** (d + 1) * (1 + tol),
                     "max_rel_mean": worst_mean, "max_bq_l1_over_t_q": worst_mass}
    for entry in props.values():
        for key, val in entry.items():
            entry[key] = bool(val) if key == "passed" else (int(val) if isinstance(val, (int, np.integer)) else float(val))

    cubes = [(a.cube.scale, a.cube.corner, a.mean_abs) for a in dec.atoms]
    return CZReport(float(t), dec.degenerate, props, cubes)
