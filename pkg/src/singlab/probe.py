"""Weak-(1,1) measurements: distribution-function sweeps, the weak ratio
``sup_lambda lambda * m(|u| > lambda) / ||f||_1`` and the spike family that
contrasts it with the L^1 ratio ``||u||_1 / ||f||_1``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .czd import cz_decompose
from .grid import GridFunction, distribution_measure, lebesgue_norm
from .operator import apply_truncated, evaluate_truncated

CSV_COLUMNS = ("experiment", "epsilon", "lambda", "measure", "weak_term", "weak_ratio",
               "l1_ratio", "grid_N", "seed")


def unit_ball_volume(d):
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


@dataclass(frozen=True)
class ProbeResult:
    lambdas: np.ndarray
    measures: np.ndarray
    weak_ratio: float
    l1_ratio: float
    f_l1: float
    metadata: dict = field(default_factory=dict)

    @property
    def weak_terms(self):
        return self.lambdas * self.measures

    def rows(self, experiment="probe", epsilon=None, grid_n=None, seed=None):
        out = []
        for lam, meas, wt in zip(self.lambdas, self.measures, self.weak_terms):
            out.append({"experiment": experiment, "epsilon": epsilon, "lambda": float(lam),
                        "measure": float(meas), "weak_term": float(wt / self.f_l1),
                        "weak_ratio": self.weak_ratio, "l1_ratio": self.l1_ratio,
                        "grid_N": grid_n, "seed": seed})
        return out


def default_lambda_grid(u, points=32, mask=None):
    """``points`` log-spaced levels in ``[0.01 ||u||_inf, ||u||_inf]``."""
    a = np.abs(u.values if mask is None else u.values[mask])
    top = float(a.max()) if a.size else 0.0
    if top == 0.0:
        top = 1.0  # u == 0: any positive grid gives zero measures
    return np.geomspace(0.01 * top, top, points)


def weak_ratio(u, f_l1, lambda_grid, exclusion=None):
    """Distribution measures of ``u`` off ``exclusion`` and the derived ratios.

    ``exclusion`` is one cell mask, or a sequence of masks (one per level).
    """
    if not f_l1 > 0:
        raise ValueError("||f||_1 must be positive")
    lam = np.asarray(lambda_grid, dtype=np.float64)
    if lam.size == 0:
        raise ValueError("empty lambda grid")
    if np.any(lam <= 0) or np.any(np.diff(lam) <= 0):
        raise ValueError("lambda grid must be positive and ascending")
    per_level = exclusion is not None and np.ndim(exclusion) == u.spec.dimension + 1
    meas = []
    for i, lv in enumerate(lam):
        ex = exclusion[i] if per_level else exclusion
        meas.append(distribution_measure(u, lv, None if ex is None else ~np.asarray(ex, bool)))
    meas = np.array(meas)
    if np.any(np.diff(meas) > 0) and not per_level:
        raise RuntimeError("distribution measure increased along the lambda grid")
    keep = None if exclusion is None or per_level else ~np.asarray(exclusion, bool)
    a = np.abs(u.values) if keep is None else np.where(keep, np.abs(u.values), 0.0)
    l1 = float(a.sum() * u.spec.cell_volume) / f_l1
    wr = float(np.max(lam * meas)) / f_l1
    if wr > l1 * (1 + 1e-12):
        raise RuntimeError("Chebyshev violated: weak ratio exceeds L^1 ratio")
    return ProbeResult(lam, meas, wr, l1, float(f_l1),
                       {"excluded": "none" if exclusion is None else ("per-level" if per_level else "mask")})


def spike(spec, eps):
    """``c * 1(|x| < eps)`` with the discrete L^1 norm equal to ``|B_1|``."""
    if eps < 4 * spec.spacing:
        raise ValueError(f"spike radius {eps:g} is below the resolution floor 4h = {4 * spec.spacing:g}")
    inside = np.linalg.norm(spec.coordinates(), axis=-1) < eps
    count = int(np.count_nonzero(inside))
    c = unit_ball_volume(spec.dimension) / (count * spec.cell_volume)
    return GridFunction(spec, np.where(inside, c, 0.0))


def cz_exclusions(f, lambdas, c_omega, enlargement=4.0):
    """``E*`` of the decomposition of ``f`` at level ``lambda / C_Omega`` for each level."""
    return np.stack([cz_decompose(f, lv / c_omega, enlargement).enlarged for lv in lambdas])


def spike_family(cfg, epsilons, grid, lambda_grid=None, points=32, output_cells=None,
                 c_omega=None):
    """One :class:`ProbeResult` per spike radius for ``u = T f_eps``.

    ``output_cells`` (a cell mask) restricts evaluation and measurement to
    those cells. ``c_omega`` switches on the exclusion of ``E*`` per level.
    """
    results = []
    for eps in epsilons:
        f = spike(grid, eps)
        if output_cells is None:
            u = apply_truncated(cfg, f)
            mask = None
        else:
            mask = np.asarray(output_cells, bool)
            vals = np.zeros(grid.shape, dtype=np.complex128)
            vals[mask] = evaluate_truncated(cfg, f, np.argwhere(mask))
            u = GridFunction(grid, vals)
        lam = default_lambda_grid(u, points, mask) if lambda_grid is None else lambda_grid
        excl = None if mask is None else ~mask
        if c_omega is not None:
            per = cz_exclusions(f, lam, c_omega)
            excl = per if excl is None else per | excl[None]
        res = weak_ratio(u, lebesgue_norm(f, 1), lam, excl)
        res.metadata.update({"epsilon": float(eps), "grid": [grid.dimension, grid.cells, grid.half_width]})
        results.append(res)
    return results


# ------------------------------------------------------------------ runner


def _fixture(spec, seed):
    """Shipped random fixture: signed heavy-tailed values, seeded."""
    rng = np.random.default_rng(seed)
    return GridFunction(spec, rng.lognormal(0.0, 1.5, spec.shape) * rng.choice([-1.0, 1.0], spec.shape))


def _gaussian(spec):
    from .grid import central_mask

    r2 = np.sum(spec.coordinates() ** 2, axis=-1)
    return GridFunction(spec, np.where(central_mask(spec), np.exp(-r2 / 2.0), 0.0))


def _operator_config(doc):
    from .grid import GridSpec
    from .kernel_zoo import kernel_from_key
    from .operator import OperatorConfig
    from .sphere_fn import sample_omega

    spec = GridSpec(doc.grid.d, doc.grid.N, doc.grid.L)
    op = doc.operator
    cfg = OperatorConfig(sample_omega(doc.omega_key, spec.dimension),
                         kernel_from_key(doc.kernel_key, spec.dimension, doc.kernel.field, doc.kernel.profile),
                         epsilon=op.epsilon_cells * spec.spacing, rule=op.rule,
                         j_min=op.j_min, j_max=op.j_max)
    return spec, cfg


def _write_csv(path, rows, columns):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r[k] is None else repr(r[k]) if isinstance(r[k], float) else r[k])
                        for k in columns})


def run_experiment(doc, out_dir):
    """Execute a validated :class:`ConfigDocument`; returns ``(result, ok, files)``.

    Writes ``<experiment>.json`` (resolved config, library version, result)
    and, for tabular experiments, ``<experiment>.csv``.
    """
    import json
    import os

    from . import __version__
    from .grid import GridSpec, read_sgrd, write_sgrd

    os.makedirs(out_dir, exist_ok=True)
    exp = doc.experiment
    stem = os.path.join(out_dir, exp)
    files, ok = [], True
    d = doc.grid.d

    if exp == "norms":
        from .sphere_fn import build_quadrature, compute_norms, sample_omega

        norms = compute_norms(sample_omega(doc.omega_key, d), build_quadrature(d, doc.norms.resolution),
                              doc.norms.q)
        result = norms.as_dict()
    elif exp == "kernel-check":
        from .kernel_zoo import PairSampler, TripleSampler, check_regularity, check_size, kernel_from_key

        K = kernel_from_key(doc.kernel_key, d, doc.kernel.field, doc.kernel.profile)
        n = doc.check.samples
        reg = check_regularity(K, TripleSampler(d, seed=doc.seed), n)
        result = {"kernel": K.label, "samples": n, "C_size": check_size(K, PairSampler(d, seed=doc.seed), n),
                  "C_reg_first": reg.first, "C_reg_second": reg.second}
    elif exp == "cz":
        from .czd import cz_decompose, verify_cz

        spec = GridSpec(d, doc.grid.N, doc.grid.L)
        f = _fixture(spec, doc.seed)
        t = doc.cz.level_factor * float(np.abs(f.values).mean())
        rep = verify_cz(cz_decompose(f, t, doc.cz.enlargement), f, t)
        result = rep.as_dict()
        ok = rep.passed
        rows = [{"scale": k, "corner": " ".join(map(str, c)), "mean_abs": a} for k, c, a in rep.cubes]
        _write_csv(stem + ".csv", rows, ("scale", "corner", "mean_abs"))
        files.append(stem + ".csv")
    elif exp == "net":
        from .microlocal import direction_net

        net = direction_net(doc.net.n, doc.net.gamma, d)
        with open(stem + "_vectors.json", "w") as fh:
            fh.write(net.to_json())
        files.append(stem + "_vectors.json")
        result = {"cardinality": len(net), "separation": net.separation,
                  "min_distance": net.min_distance(), "granularity": net.granularity}
        ok = result["min_distance"] >= net.separation
    elif exp == "params":
        from .microlocal import AdmissibilityParams

        result = AdmissibilityParams(**doc.params.model_dump()).as_dict()
    elif exp == "apply":
        from .operator import apply_truncated

        spec, cfg = _operator_config(doc)
        src = doc.apply.input
        if src == "gaussian":
            f = _gaussian(spec)
        elif src == "spike":
            f = spike(spec, doc.probe.epsilons[0])
        else:
            f = read_sgrd(src)
            if f.spec != spec:
                raise ValueError(f"grid of {src} does not match the configured grid")
        u = apply_truncated(cfg, f)
        write_sgrd(stem + ".sgrd", u)
        files.append(stem + ".sgrd")
        result = {"input": src, "l1": lebesgue_norm(u, 1), "l2": lebesgue_norm(u, 2),
                  "linf": lebesgue_norm(u, np.inf)}
    elif exp == "probe":
        spec, cfg = _operator_config(doc)
        c_om = None
        if doc.probe.cz_exclusion:
            from .sphere_fn import build_quadrature, c_omega

            c_om = c_omega(cfg.omega, build_quadrature(d, 4096))
        if doc.probe.input == "spike":
            res = spike_family(cfg, doc.probe.epsilons, spec, points=doc.probe.lambda_points, c_omega=c_om)
            labels = list(doc.probe.epsilons)
        else:
            f = _gaussian(spec)
            u = apply_truncated(cfg, f)
            lam = default_lambda_grid(u, doc.probe.lambda_points)
            excl = None if c_om is None else cz_exclusions(f, lam, c_om)
            res = [weak_ratio(u, lebesgue_norm(f, 1), lam, excl)]
            labels = [None]
        rows = []
        for eps, r in zip(labels, res):
            rows += r.rows("probe", eps, spec.cells, doc.seed)
        _write_csv(stem + ".csv", rows, CSV_COLUMNS)
        files.append(stem + ".csv")
        result = {"runs": [{"epsilon": e, "weak_ratio": r.weak_ratio, "l1_ratio": r.l1_ratio}
                           for e, r in zip(labels, res)]}
        ok = all(r.weak_ratio <= r.l1_ratio * (1 + 1e-12) for r in res)
    else:  # pragma: no cover - schema forbids it
        raise ValueError(f"unknown experiment {exp!r}")

    side = {"experiment": exp, "version": __version__, "config": doc.model_dump(mode="json"),
            "result": result}
    with open(stem + ".json", "w") as fh:
        json.dump(side, fh, indent=2)
        fh.write("\n")
    files.insert(0, stem + ".json")
    return result, ok, files
