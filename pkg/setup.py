"""Build script: compiles the Monte Carlo kernels when a toolchain is present.

The compiled extension is optional. If Cython or a C compiler is missing the
package installs pure-Python and `genselect._kernels` falls back to the numpy
backend at import time.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "genselect._kernels._mc",
                ["src/genselect/_kernels/_mc.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except ImportError as exc:  # pragma: no cover - build-env dependent
    sys.stderr.write(f"genselect: building without compiled kernels ({exc})\n")

setup(ext_modules=ext_modules)
