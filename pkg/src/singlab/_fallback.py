"""Numpy/pure-Python twins of the routines in ``_core.pyx``.

Same signatures, same summation semantics; used when the compiled core is
missing or ``SINGLAB_PURE=1`` is set.
"""
import numpy as np

_BLOCK_PAIRS = 1 << 22


def _blocks(m, s):
    step = max(1, _BLOCK_PAIRS // max(s, 1))
    for start in range(0, m, step):
        yield slice(start, min(m, start + step))


def _flat(offsets, dims):
    # offsets (..., 3) -> flat index into a stencil with axes 2*n-1
    n = np.asarray(dims)
    q = offsets + (n - 1)
    return (q[..., 0] * (2 * n[1] - 1) + q[..., 1]) * (2 * n[2] - 1) + q[..., 2]


def _partners(x, o, rank, dims):
    p = x[:, None, :] + o
    inside = np.all((p >= 0) & (p < np.asarray(dims)), axis=-1)
    pc = np.where(inside[..., None], p, 0)
    r = np.where(inside, rank[pc[..., 0], pc[..., 1], pc[..., 2]], -1)
    return r


def stencil_apply(stencil, sup_idx, sup_val, out_idx, antisym, rank, num_threads=1):
    dims = tuple((k + 1) // 2 for k in stencil.shape)
    flat = np.ascontiguousarray(stencil).reshape(-1)
    sup_idx = np.asarray(sup_idx)
    sup_val = np.asarray(sup_val, dtype=np.complex128)
    out_idx = np.asarray(out_idx)
    out = np.zeros(len(out_idx), dtype=np.complex128)
    kidx = np.arange(len(sup_idx))
    for blk in _blocks(len(out_idx), len(sup_idx)):
        x = out_idx[blk]
        o = x[:, None, :] - sup_idx[None, :, :]
        w = flat[_flat(o, dims)]
        if not antisym:
            out[blk] = w @ sup_val
            continue
        r = _partners(x, o, rank, dims)
        diag = np.all(o == 0, axis=-1)
        skip = diag | ((r >= 0) & (r < kidx[None, :]))
        term = w * sup_val[None, :]
        has = r >= 0
        wp = flat[_flat(-o, dims)]
        term = term + np.where(has, wp * sup_val[np.where(has, r, 0)], 0.0)
        out[blk] = np.where(skip, 0.0, term).sum(axis=1)
    return out


def modulated_apply(sstencil, rstencil, zstencil, agrid, coef, sup_idx, sup_val,
                    out_idx, mode, power_k, antisym, rank, num_threads=1):
    dims = tuple((k + 1) // 2 for k in sstencil.shape)
    sflat = np.ascontiguousarray(sstencil).reshape(-1)
    rflat = np.ascontiguousarray(rstencil).reshape(-1)
    zflat = np.ascontiguousarray(zstencil).reshape(len(zstencil), -1)
    sup_idx = np.asarray(sup_idx)
    sup_val = np.asarray(sup_val, dtype=np.complex128)
    out_idx = np.asarray(out_idx)
    coef = np.asarray(coef)
    out = np.zeros(len(out_idx), dtype=np.complex128)
    kidx = np.arange(len(sup_idx))

    def profile(t):
        return np.cosh(t) if mode == 1 else t ** power_k

    def weight(q, ax, cols):
        tz = sum(cols[a] * zflat[a][q] for a in range(len(zflat)))
        t = (ax[:, None] - tz) * rflat[q]
        return sflat[q] * profile(t)

    for blk in _blocks(len(out_idx), len(sup_idx)):
        x = out_idx[blk]
        ax = agrid[x[:, 0], x[:, 1], x[:, 2]]
        o = x[:, None, :] - sup_idx[None, :, :]
        diag = np.all(o == 0, axis=-1)
        q = _flat(o, dims)
        cols = [np.broadcast_to(coef[a][None, :], q.shape) for a in range(len(coef))]
        with np.errstate(all="ignore"):
            term = weight(q, ax, cols) * sup_val[None, :]
        if antisym:
            r = _partners(x, o, rank, dims)
            skip = diag | ((r >= 0) & (r < kidx[None, :]))
            has = r >= 0
            rr = np.where(has, r, 0)
            pcols = [coef[a][rr] for a in range(len(coef))]
            with np.errstate(all="ignore"):
                pterm = weight(_flat(-o, dims), ax, pcols) * sup_val[rr]
            term = term + np.where(has, pterm, 0.0)
        else:
            skip = diag
        out[blk] = np.where(skip, 0.0, term).sum(axis=1)
    return out


def greedy_net(nodes, sep, bound):
    nodes = np.asarray(nodes, dtype=np.float64)
    cells = np.floor((nodes + 1.0) / sep).astype(np.int64) + 1
    sep2 = sep * sep
    buckets = {}
    kept = []
    near = [(a, b, c) for a in (-1, 0, 1) for b in (-1, 0, 1) for c in (-1, 0, 1)]
    pts = nodes.tolist()
    for i, (c0, c1, c2) in enumerate(cells.tolist()):
        px, py, pz = pts[i]
        ok = True
        for a, b, c in near:
            for j in buckets.get((c0 + a, c1 + b, c2 + c), ()):
                qx, qy, qz = pts[j]
                if (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2 < sep2:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            if len(kept) >= bound:
                raise RuntimeError("direction net exceeded its size bound")
            kept.append(i)
            buckets.setdefault((c0, c1, c2), []).append(i)
    return np.asarray(kept, dtype=np.int64)

