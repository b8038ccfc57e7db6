"""Build the compiled sweep kernel.

The package works without the extension (a pure-Python kernel with identical
semantics is selected at import time), but long runs are ~50x slower.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - build still yields a working package
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "kinex._speedups",
                ["src/kinex/_speedups.pyx"],
                include_dirs=[numpy.get_include()],
                # -ffp-contract=off: forbid FMA contraction so the compiled
                # kernel and the pure-Python fallback are bit-identical.
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
