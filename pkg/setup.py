"""Build script for the optional compiled scan kernel.

Set MOMENTSET_NO_EXT=1 to skip compilation; the package then falls back to
the pure-NumPy scan implementation at import time.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("MOMENTSET_NO_EXT"):
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "momentset._scan",
                ["src/momentset/_scan.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
