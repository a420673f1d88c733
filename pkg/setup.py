"""Build script for the optional compiled skip-gram kernel.

The package is fully functional without the extension: topflop.kernels
falls back to a numpy implementation at import time.  The extension is
therefore marked optional so installation survives a missing compiler.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "topflop.kernels.skipgram_cy",
                ["src/topflop/kernels/skipgram_cy.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
