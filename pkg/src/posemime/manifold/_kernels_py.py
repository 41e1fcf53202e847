"""Pure-NumPy kernels for batched product-manifold operations.

All functions share the flattened factor-table convention: a product
manifold is described by parallel int32 arrays over its leaf factors

    kinds  -- 0 = Euclidean, 1 = unit sphere
    e_off  -- offset of the factor inside embedding coordinates
    e_dim  -- embedding width (sphere S^d has e_dim = d+1)
    t_off  -- offset inside intrinsic tangent coordinates
    t_dim  -- tangent width (sphere S^d has t_dim = d)

Points are rows of embedding coordinates, tangent vectors are rows of
intrinsic coordinates. Intrinsic sphere coordinates are taken in the
orthonormal basis obtained by the Householder reflection that maps the
last axis unit vector onto the base point; the reflection is applied
implicitly, never materialized.

Status returns: -1 on success, otherwise ``row * F + factor`` of the
first antipodal pair encountered (F = number of factors).

The compiled twin of this module is ``_kernels.pyx``; signatures and
numerical branches must stay identical.
"""

import numpy as np

EUCLIDEAN = 0
SPHERE = 1

# log/transport are undefined once cos(angle) falls to -1 + 1e-9
ANTIPODAL_COS = -1.0 + 1e-9
# below this angle geodesic formulas switch to their zero-angle limit
TINY_ANGLE = 1e-12
# squared-norm threshold under which the Householder vector is treated as zero
TINY_HOUSE = 1e-30


def _emb_to_int(p, w):
    """Components of embedded tangent rows ``w`` in the basis at ``p``."""
    m = p.shape[0]
    u = p.copy()
    u[m - 1] -= 1.0
    nu2 = float(u @ u)
    if nu2 < TINY_HOUSE:
        return w[:, : m - 1].copy()
    hw = w - (2.0 / nu2) * np.outer(w @ u, u)
    return hw[:, : m - 1]


def _int_to_emb(p, c):
    """Embedded representation of intrinsic tangent rows ``c`` at ``p``."""
    m = p.shape[0]
    w = np.concatenate([c, np.zeros((c.shape[0], 1))], axis=1)
    u = p.copy()
    u[m - 1] -= 1.0
    nu2 = float(u @ u)
    if nu2 < TINY_HOUSE:
        return w
    return w - (2.0 / nu2) * np.outer(w @ u, u)


def log_many(kinds, e_off, e_dim, t_off, t_dim, base, pts, out):
    nf = kinds.shape[0]
    for f in range(nf):
        eo, ed = e_off[f], e_dim[f]
        to, td = t_off[f], t_dim[f]
        x = pts[:, eo : eo + ed]
        if kinds[f] == EUCLIDEAN:
            out[:, to : to + td] = x - base[eo : eo + ed]
            continue
        p = base[eo : eo + ed]
        c = np.clip(x @ p, -1.0, 1.0)
        bad = np.nonzero(c <= ANTIPODAL_COS)[0]
        if bad.size:
            return int(bad[0]) * nf + f
        w = x - np.outer(c, p)
        s = np.linalg.norm(w, axis=1)
        theta = np.arctan2(s, c)
        scale = np.zeros_like(theta)
        live = theta >= TINY_ANGLE
        scale[live] = theta[live] / s[live]
        out[:, to : to + td] = _emb_to_int(p, w * scale[:, None])
    return -1


def exp_many(kinds, e_off, e_dim, t_off, t_dim, base, tans, out):
    nf = kinds.shape[0]
    for f in range(nf):
        eo, ed = e_off[f], e_dim[f]
        to, td = t_off[f], t_dim[f]
        c = tans[:, to : to + td]
        if kinds[f] == EUCLIDEAN:
            out[:, eo : eo + ed] = base[eo : eo + ed] + c
            continue
        p = base[eo : eo + ed]
        w = _int_to_emb(p, c)
        theta = np.linalg.norm(c, axis=1)
        res = np.tile(p, (c.shape[0], 1))
        live = theta >= TINY_ANGLE
        if np.any(live):
            th = theta[live]
            res[live] = np.cos(th)[:, None] * p + (np.sin(th) / th)[:, None] * w[live]
            res[live] /= np.linalg.norm(res[live], axis=1)[:, None]
        out[:, eo : eo + ed] = res
    return None


def dist2_many(kinds, e_off, e_dim, t_off, t_dim, base, pts, out):
    nf = kinds.shape[0]
    out[:] = 0.0
    for f in range(nf):
        eo, ed = e_off[f], e_dim[f]
        x = pts[:, eo : eo + ed]
        if kinds[f] == EUCLIDEAN:
            d = x - base[eo : eo + ed]
            out += np.einsum("ij,ij->i", d, d)
            continue
        p = base[eo : eo + ed]
        c = np.clip(x @ p, -1.0, 1.0)
        bad = np.nonzero(c <= ANTIPODAL_COS)[0]
        if bad.size:
            return int(bad[0]) * nf + f
        s = np.linalg.norm(x - np.outer(c, p), axis=1)
        out += np.arctan2(s, c) ** 2
    return -1


def transport_many(kinds, e_off, e_dim, t_off, t_dim, src, dst, tans, out):
    nf = kinds.shape[0]
    for f in range(nf):
        eo, ed = e_off[f], e_dim[f]
        to, td = t_off[f], t_dim[f]
        c = tans[:, to : to + td]
        if kinds[f] == EUCLIDEAN:
            out[:, to : to + td] = c
            continue
        p = src[eo : eo + ed]
        q = dst[eo : eo + ed]
        cpq = float(np.clip(p @ q, -1.0, 1.0))
        if cpq <= ANTIPODAL_COS:
            return f
        w = _int_to_emb(p, c)
        wd = q - cpq * p
        s = float(np.linalg.norm(wd))
        theta = float(np.arctan2(s, cpq))
        if theta >= TINY_ANGLE:
            d1 = wd / s
            alpha = w @ d1
            w = w + np.outer(alpha, (np.cos(theta) - 1.0) * d1 - np.sin(theta) * p)
        out[:, to : to + td] = _emb_to_int(q, w)
    return -1
