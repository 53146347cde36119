"""Builds the optional compiled kernel extension.

The package works without it: bcilink.kernels falls back to the
numpy/scipy implementations when bcilink._core is missing.
"""
from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "bcilink._core",
                ["src/bcilink/_core.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
