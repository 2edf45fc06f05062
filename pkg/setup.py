"""Build script: compiles the optional tape-evaluator extension.

The package works without the extension (a pure-Python evaluator with
identical semantics is selected at import time), so any failure here
downgrades to a warning instead of aborting the install.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext = Extension(
        "rclab.expr._tape_cy",
        sources=["src/rclab/expr/_tape_cy.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize(
        [ext],
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": "3",
        },
    )
except Exception as exc:  # pragma: no cover - depends on toolchain
    sys.stderr.write(
        "rclab: skipping compiled evaluator (%s); pure-Python backend will be used\n" % exc
    )

setup(ext_modules=ext_modules)
