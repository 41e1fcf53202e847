"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; setting
``POSEMIME_PURE_PYTHON=1`` forces the NumPy fallback. Sphere factors wider
than the compiled kernels' stack buffers are routed to the fallback
per-manifold (irrelevant for pose manifolds, which use S^1/S^2 factors).
"""

import os

from . import _kernels_py

# widest sphere embedding the compiled kernels handle (stack buffers)
MAX_COMPILED_SPHERE_DIM = 63

if os.environ.get("POSEMIME_PURE_PYTHON"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def backend_name():
    return BACKEND


def kernels_for(max_sphere_embed_dim):
    if _compiled is not None and max_sphere_embed_dim <= MAX_COMPILED_SPHERE_DIM:
        return _compiled
    return _kernels_py
