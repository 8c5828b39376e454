"""Build hook for the optional compiled kernels.

The package is fully functional without the extension (a pure Python
backend is selected at import time); the extension only accelerates
value-iteration sweeps and Monte Carlo trial loops.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "mdplc._native",
                ["src/mdplc/_native.pyx"],
                optional=True,
            )
        ],
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": "3",
        },
    )
except ImportError:
    # No Cython available: ship pure Python only.
    pass

setup(ext_modules=ext_modules)
