"""Build script for the optional compiled Haar kernels.

The package works without the extension (a numpy fallback is selected at
import time), so a missing compiler only costs speed, not functionality.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/dvdamp/_haar_cy.pyx",
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": 3,
        },
    )
    for ext in ext_modules:
        ext.include_dirs.append(numpy.get_include())
except Exception as exc:  # pragma: no cover - toolchain-dependent
    sys.stderr.write(
        "warning: building without compiled Haar kernels (%s)\n" % exc
    )

setup(ext_modules=ext_modules)
