import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("POSEMIME_PURE_PYTHON"):
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "posemime.manifold._kernels",
                    ["src/posemime/manifold/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except Exception:
        # No Cython/compiler available: the package falls back to the
        # pure-NumPy kernels at import time.
        ext_modules = []

setup(ext_modules=ext_modules)
