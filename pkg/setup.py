"""Build script for the optional compiled solver kernel.

The package works without the extension (a NumPy fallback is selected at
import time); the Cython kernel is what makes bulk dataset generation fast.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "mpce.solver._stencil",
                ["src/mpce/solver/_stencil.pyx"],
                include_dirs=[numpy.get_include()],
                optional=True,
            )
        ],
        language_level="3",
    )
except ImportError:
    # No Cython / NumPy at build time: ship pure Python.
    pass

setup(ext_modules=ext_modules)
