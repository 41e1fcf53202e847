"""Independent reference implementations used only to generate expected values.

Everything here is deliberately written against textbook formulas with plain
NumPy, sharing no code with the package under test.
"""

import numpy as np


def mvn_pdf(x, mean, cov):
    """Classical multivariate normal density."""
    d = mean.shape[0]
    diff = x - mean
    quad = diff @ np.linalg.inv(cov) @ diff
    norm = (2 * np.pi) ** (-d / 2) / np.sqrt(np.linalg.det(cov))
    return norm * np.exp(-0.5 * quad)


def conditional_gaussian(mean, cov, idx_given, value):
    """Condition a joint Gaussian on one coordinate taking a value."""
    keep = [i for i in range(mean.shape[0]) if i != idx_given]
    m_g = mean[idx_given]
    s_gg = cov[idx_given, idx_given]
    s_kg = cov[np.ix_(keep, [idx_given])][:, 0]
    m_cond = mean[keep] + s_kg / s_gg * (value - m_g)
    s_cond = cov[np.ix_(keep, keep)] - np.outer(s_kg, s_kg) / s_gg
    return m_cond, s_cond


def classic_em(pts, k, lam=1e-6, tol=1e-6, max_iter=200, eig_floor=1e-8 + 1e-12):
    """Plain Euclidean EM with phase-binned init, matching the fit contract.

    Returns (weights, means, covs, ll_history); pts rows are (phase, ...).
    """
    n, d = pts.shape
    bins = np.minimum((pts[:, 0] * k).astype(int), k - 1)
    weights = np.empty(k)
    means = np.empty((k, d))
    covs = np.empty((k, d, d))
    for j in range(k):
        members = pts[bins == j]
        weights[j] = len(members) / n
        means[j] = members.mean(axis=0)
        diff = members - means[j]
        covs[j] = diff.T @ diff / len(members) + lam * np.eye(d)
        covs[j] = _floor(covs[j], eig_floor)

    history = []
    prev = None
    for _ in range(max_iter):
        dens = np.empty((n, k))
        for j in range(k):
            dens[:, j] = weights[j] * np.array([mvn_pdf(x, means[j], covs[j]) for x in pts])
        totals = dens.sum(axis=1)
        history.append(float(np.log(totals).mean()))
        if prev is not None and history[-1] - prev < tol:
            break
        prev = history[-1]

        resp = dens / totals[:, None]
        for j in range(k):
            rj = resp[:, j]
            tot = rj.sum()
            weights[j] = tot / n
            means[j] = (pts * rj[:, None]).sum(axis=0) / tot
            diff = pts - means[j]
            covs[j] = (diff * rj[:, None]).T @ diff / tot + lam * np.eye(d)
            covs[j] = _floor(covs[j], eig_floor)
        weights /= weights.sum()
    return weights, means, covs, history


def _floor(cov, floor):
    vals, vecs = np.linalg.eigh((cov + cov.T) / 2)
    if vals.min() >= floor:
        return (cov + cov.T) / 2
    vals = np.maximum(vals, floor)
    fixed = (vecs * vals) @ vecs.T
    return (fixed + fixed.T) / 2
