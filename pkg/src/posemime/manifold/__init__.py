"""Riemannian geometry kernel: Euclidean spaces, unit spheres, products.

Points are stored in embedding coordinates (a sphere ``S^d`` lives in
``R^{d+1}``); tangent vectors are stored intrinsically, with exactly
``tangent_dim`` components. For a sphere factor the intrinsic basis at a
base point ``p`` is the image of the first ``d`` axis vectors under the
Householder reflection exchanging ``p`` with the last axis vector, so a
covariance matrix in a tangent space is a full-rank ``tangent_dim`` square
matrix rather than a rank-deficient embedded one.

Geodesic formulas:

* Euclidean: ``exp_p(v) = p + v``, ``log_p(x) = x - p``.
* Sphere:    ``exp_p(v) = cos(|v|) p + sin(|v|) v/|v|`` and
  ``log_p(x) = theta * (x - cos(theta) p)/|x - cos(theta) p|`` with
  ``theta = angle(p, x)``; both fall back to their zero-angle limits below
  1e-12. Antipodal configurations raise rather than returning a best-effort
  answer, since a silently wrong mean would corrupt downstream statistics.
* Products operate factor-wise.

Heavy batched operations are delegated to a compiled Cython extension when
available, with a NumPy fallback selected at import (see ``backend``).
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import AntipodalPoint, NoConvergence, SpecMismatch
from . import _kernels_py
from .backend import backend_name, kernels_for

__all__ = [
    "Manifold",
    "Euclidean",
    "Sphere",
    "Product",
    "ManifoldPoint",
    "TangentVector",
    "exp_map",
    "log_map",
    "distance",
    "parallel_transport",
    "frechet_mean",
    "tangent_covariance",
    "backend_name",
]

FRECHET_TOL = 1e-9
FRECHET_MAX_ITER = 100


class Manifold:
    """Base class; concrete manifolds define factors and dimensions."""

    tangent_dim: int
    embed_dim: int

    def _leaf_factors(self):
        raise NotImplementedError

    def to_tree(self):
        """JSON-serializable structure tree."""
        raise NotImplementedError

    @property
    def _table(self):
        table = getattr(self, "_table_cache", None)
        if table is None:
            table = _build_table(self._leaf_factors())
            self._table_cache = table
        return table

    # -- batched numeric operations on raw coordinate arrays --------------

    def log_many(self, base, pts):
        """Tangent components at ``base`` of each row of ``pts``; (N, T)."""
        base = np.ascontiguousarray(base, dtype=np.float64)
        pts = np.ascontiguousarray(np.atleast_2d(pts), dtype=np.float64)
        out = np.empty((pts.shape[0], self.tangent_dim))
        status = self._table.impl.log_many(*self._table.args, base, pts, out)
        _raise_antipodal(status, self._table.nf)
        return out

    def exp_many(self, base, tans):
        base = np.ascontiguousarray(base, dtype=np.float64)
        tans = np.ascontiguousarray(np.atleast_2d(tans), dtype=np.float64)
        out = np.empty((tans.shape[0], self.embed_dim))
        self._table.impl.exp_many(*self._table.args, base, tans, out)
        return out

    def dist_many(self, base, pts):
        base = np.ascontiguousarray(base, dtype=np.float64)
        pts = np.ascontiguousarray(np.atleast_2d(pts), dtype=np.float64)
        out = np.empty(pts.shape[0])
        status = self._table.impl.dist2_many(*self._table.args, base, pts, out)
        _raise_antipodal(status, self._table.nf)
        return np.sqrt(out)

    def transport_many(self, src, dst, tans):
        """Parallel transport of tangent rows from ``src`` to ``dst``."""
        src = np.ascontiguousarray(src, dtype=np.float64)
        dst = np.ascontiguousarray(dst, dtype=np.float64)
        tans = np.ascontiguousarray(np.atleast_2d(tans), dtype=np.float64)
        out = np.empty_like(tans)
        status = self._table.impl.transport_many(*self._table.args, src, dst, tans, out)
        _raise_antipodal(status, self._table.nf)
        return out

    # -- single-point conveniences -----------------------------------------

    def log(self, base, target):
        return self.log_many(base, target[None, :])[0]

    def exp(self, base, tan):
        return self.exp_many(base, tan[None, :])[0]

    def dist(self, a, b):
        return float(self.dist_many(a, b[None, :])[0])

    def transport(self, src, dst, tan):
        return self.transport_many(src, dst, tan[None, :])[0]

    def transport_matrix(self, src, dst):
        """Matrix R with components_at_dst = R @ components_at_src."""
        eye = np.eye(self.tangent_dim)
        return self.transport_many(src, dst, eye).T

    def embedded_tangent(self, base, comps):
        """Embedding-space representation of intrinsic components."""
        return _convert_tangent(self, base, np.atleast_2d(comps), to_embedded=True)[0]

    def intrinsic_tangent(self, base, embedded):
        """Intrinsic components of an embedding-space tangent vector."""
        return _convert_tangent(self, base, np.atleast_2d(embedded), to_embedded=False)[0]

    def project(self, coords):
        """Nearest point with unit-norm sphere factors (coordinate hygiene)."""
        coords = np.array(coords, dtype=np.float64)
        for kind, eo, ed in self._table.factor_slices():
            if kind == _kernels_py.SPHERE:
                coords[eo : eo + ed] /= np.linalg.norm(coords[eo : eo + ed])
        return coords

    def contains(self, coords, atol=1e-9):
        coords = np.asarray(coords, dtype=np.float64)
        if coords.shape != (self.embed_dim,) or not np.all(np.isfinite(coords)):
            return False
        for kind, eo, ed in self._table.factor_slices():
            if kind == _kernels_py.SPHERE:
                if abs(np.linalg.norm(coords[eo : eo + ed]) - 1.0) > atol:
                    return False
        return True

    def random_point(self, rng):
        coords = rng.standard_normal(self.embed_dim)
        for kind, eo, ed in self._table.factor_slices():
            if kind == _kernels_py.SPHERE:
                coords[eo : eo + ed] /= np.linalg.norm(coords[eo : eo + ed])
        return coords

    def random_tangent(self, rng, scale=1.0):
        return rng.standard_normal(self.tangent_dim) * scale


class Euclidean(Manifold):
    def __init__(self, n):
        if n < 1:
            raise ValueError("Euclidean dimension must be >= 1")
        self.n = int(n)
        self.tangent_dim = self.n
        self.embed_dim = self.n

    def _leaf_factors(self):
        return [(_kernels_py.EUCLIDEAN, self.n, self.n)]

    def to_tree(self):
        return {"kind": "euclidean", "dim": self.n}

    def __eq__(self, other):
        return isinstance(other, Euclidean) and other.n == self.n

    def __hash__(self):
        return hash(("euclidean", self.n))

    def __repr__(self):
        return f"Euclidean({self.n})"


class Sphere(Manifold):
    """Unit sphere S^d embedded in R^(d+1)."""

    def __init__(self, d):
        if d < 1:
            raise ValueError("sphere dimension must be >= 1")
        self.d = int(d)
        self.tangent_dim = self.d
        self.embed_dim = self.d + 1

    def _leaf_factors(self):
        return [(_kernels_py.SPHERE, self.d + 1, self.d)]

    def to_tree(self):
        return {"kind": "sphere", "dim": self.d}

    def __eq__(self, other):
        return isinstance(other, Sphere) and other.d == self.d

    def __hash__(self):
        return hash(("sphere", self.d))

    def __repr__(self):
        return f"Sphere({self.d})"


class Product(Manifold):
    def __init__(self, factors):
        factors = tuple(factors)
        if not factors:
            raise ValueError("product needs at least one factor")
        self.factors = factors
        self.tangent_dim = sum(f.tangent_dim for f in factors)
        self.embed_dim = sum(f.embed_dim for f in factors)

    def _leaf_factors(self):
        leaves = []
        for f in self.factors:
            leaves.extend(f._leaf_factors())
        return leaves

    def to_tree(self):
        return {"kind": "product", "factors": [f.to_tree() for f in self.factors]}

    def __eq__(self, other):
        return isinstance(other, Product) and other.factors == self.factors

    def __hash__(self):
        return hash(("product", self.factors))

    def __repr__(self):
        return f"Product({list(self.factors)})"


def manifold_from_tree(tree):
    kind = tree.get("kind")
    if kind == "euclidean":
        return Euclidean(tree["dim"])
    if kind == "sphere":
        return Sphere(tree["dim"])
    if kind == "product":
        return Product([manifold_from_tree(t) for t in tree["factors"]])
    raise ValueError(f"unknown manifold kind: {kind!r}")


class _FactorTable:
    __slots__ = ("kinds", "e_off", "e_dim", "t_off", "t_dim", "nf", "impl")

    def __init__(self, kinds, e_off, e_dim, t_off, t_dim, impl):
        self.kinds = kinds
        self.e_off = e_off
        self.e_dim = e_dim
        self.t_off = t_off
        self.t_dim = t_dim
        self.nf = len(kinds)
        self.impl = impl

    @property
    def args(self):
        return (self.kinds, self.e_off, self.e_dim, self.t_off, self.t_dim)

    def factor_slices(self):
        for f in range(self.nf):
            yield self.kinds[f], self.e_off[f], self.e_dim[f]


def _build_table(leaves):
    kinds = np.array([k for k, _, _ in leaves], dtype=np.int32)
    e_dim = np.array([e for _, e, _ in leaves], dtype=np.int32)
    t_dim = np.array([t for _, _, t in leaves], dtype=np.int32)
    e_off = np.concatenate([[0], np.cumsum(e_dim)[:-1]]).astype(np.int32)
    t_off = np.concatenate([[0], np.cumsum(t_dim)[:-1]]).astype(np.int32)
    sphere_dims = e_dim[kinds == _kernels_py.SPHERE]
    widest = int(sphere_dims.max()) if sphere_dims.size else 0
    return _FactorTable(kinds, e_off, e_dim, t_off, t_dim, kernels_for(widest))


def _raise_antipodal(status, nf):
    if status is not None and status >= 0:
        raise AntipodalPoint(factor_index=status % nf, row=status // nf)


def _convert_tangent(manifold, base, rows, to_embedded):
    table = manifold._table
    n = rows.shape[0]
    width = manifold.embed_dim if to_embedded else manifold.tangent_dim
    out = np.empty((n, width))
    for f in range(table.nf):
        eo, ed = table.e_off[f], table.e_dim[f]
        to, td = table.t_off[f], table.t_dim[f]
        if table.kinds[f] == _kernels_py.EUCLIDEAN:
            if to_embedded:
                out[:, eo : eo + ed] = rows[:, to : to + td]
            else:
                out[:, to : to + td] = rows[:, eo : eo + ed]
        elif to_embedded:
            out[:, eo : eo + ed] = _kernels_py._int_to_emb(base[eo : eo + ed], rows[:, to : to + td])
        else:
            out[:, to : to + td] = _kernels_py._emb_to_int(base[eo : eo + ed], rows[:, eo : eo + ed])
    return out


# --- typed point/tangent wrappers ------------------------------------------


@dataclass
class ManifoldPoint:
    spec: Manifold
    coords: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.coords = np.ascontiguousarray(self.coords, dtype=np.float64)
        if self.coords.shape != (self.spec.embed_dim,):
            raise SpecMismatch(
                f"expected {self.spec.embed_dim} embedding coordinates, "
                f"got shape {self.coords.shape}"
            )

    def __eq__(self, other):
        return (
            isinstance(other, ManifoldPoint)
            and self.spec == other.spec
            and np.array_equal(self.coords, other.coords)
        )


@dataclass
class TangentVector:
    base: ManifoldPoint
    components: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.components = np.ascontiguousarray(self.components, dtype=np.float64)
        if self.components.shape != (self.base.spec.tangent_dim,):
            raise SpecMismatch(
                f"expected {self.base.spec.tangent_dim} tangent components, "
                f"got shape {self.components.shape}"
            )

    def embedded(self):
        return self.base.spec.embedded_tangent(self.base.coords, self.components)

    def norm(self):
        return float(np.linalg.norm(self.components))


def _check_same_spec(a, b):
    if a.spec != b.spec:
        raise SpecMismatch(f"manifold specs differ: {a.spec!r} vs {b.spec!r}")


def exp_map(base, v):
    """Geodesic exponential of tangent vector ``v`` rooted at ``base``."""
    if v.base.spec != base.spec or not np.array_equal(v.base.coords, base.coords):
        raise SpecMismatch("tangent vector is not rooted at the given base point")
    return ManifoldPoint(base.spec, base.spec.exp(base.coords, v.components))


def log_map(base, target):
    """Inverse of exp_map: the tangent at ``base`` pointing to ``target``."""
    _check_same_spec(base, target)
    return TangentVector(base, base.spec.log(base.coords, target.coords))


def distance(a, b):
    """Geodesic distance; equals the norm of ``log_map(a, b)``."""
    _check_same_spec(a, b)
    return a.spec.dist(a.coords, b.coords)


def parallel_transport(v, to):
    """Transport ``v`` along the geodesic from its base to ``to``.

    Preserves inner products; the Euclidean part is the identity.
    """
    _check_same_spec(v.base, to)
    comps = v.base.spec.transport(v.base.coords, to.coords, v.components)
    return TangentVector(to, comps)


def frechet_mean_coords(manifold, pts, weights, tol=FRECHET_TOL, max_iter=FRECHET_MAX_ITER):
    """Weighted Riemannian center of mass on raw coordinate rows.

    Fixed-point iteration mu <- exp_mu(sum_i w_i log_mu(p_i)), started from
    the highest-weight point (ties: lowest index), stopping once the tangent
    update norm falls to ``tol``.
    """
    pts = np.ascontiguousarray(np.atleast_2d(pts), dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if pts.shape[0] == 0:
        raise ValueError("frechet_mean needs at least one point")
    if weights.shape != (pts.shape[0],):
        raise ValueError("one weight per point required")
    if np.any(weights < 0):
        raise ValueError("weights must be non-negative")
    total = weights.sum()
    if total <= 0:
        raise ValueError("weights must not all be zero")
    w = weights / total

    mean = pts[int(np.argmax(w))].copy()
    for _ in range(max_iter):
        step = w @ manifold.log_many(mean, pts)
        if np.linalg.norm(step) <= tol:
            return mean
        mean = manifold.exp(mean, step)
    step = w @ manifold.log_many(mean, pts)
    if np.linalg.norm(step) <= tol:
        return mean
    raise NoConvergence(
        f"frechet mean did not converge in {max_iter} iterations "
        f"(update norm {np.linalg.norm(step):.3e})"
    )


def frechet_mean(points, weights):
    """Weighted Fréchet mean of ManifoldPoints."""
    if not points:
        raise ValueError("frechet_mean needs at least one point")
    spec = points[0].spec
    for p in points[1:]:
        _check_same_spec(points[0], p)
    coords = np.stack([p.coords for p in points])
    return ManifoldPoint(spec, frechet_mean_coords(spec, coords, weights))


def tangent_covariance_coords(manifold, pts, weights, mean):
    """Weighted second moment of log-mapped points, in the mean's tangent frame."""
    pts = np.ascontiguousarray(np.atleast_2d(pts), dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    total = weights.sum()
    if total <= 0:
        raise ValueError("weights must have positive total")
    w = weights / total
    u = manifold.log_many(mean, pts)
    cov = (u * w[:, None]).T @ u
    return (cov + cov.T) / 2.0


def tangent_covariance(points, weights, mean):
    coords = np.stack([p.coords for p in points])
    for p in points:
        _check_same_spec(mean, p)
    return tangent_covariance_coords(mean.spec, coords, weights, mean.coords)
