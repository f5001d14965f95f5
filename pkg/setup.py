"""Build script: compiles the optional Cython core.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed compile downgrades to a pure-Python install
instead of aborting.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "otquant._speedups",
                ["src/otquant/_speedups.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
except Exception as exc:  # pragma: no cover - exercised only on broken toolchains
    sys.stderr.write(f"otquant: skipping compiled core ({exc}); using pure-Python backend\n")
    ext_modules = []

setup(ext_modules=ext_modules)
