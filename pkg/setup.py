import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "qcdeval._kernels._speedups",
                ["src/qcdeval/_kernels/_speedups.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    # Pure-python kernels are used when Cython is unavailable.
    ext_modules = []

setup(ext_modules=ext_modules)
