import os
import sys

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; kernels fall back at import time
    cythonize = None


def _openmp_flags():
    if os.environ.get("NOISEWARP_NO_OPENMP") or sys.platform == "darwin":
        return [], []
    return ["-fopenmp"], ["-fopenmp"]


ext_modules = []
if cythonize is not None:
    compile_args, link_args = _openmp_flags()
    ext = Extension(
        "noisewarp._kernels",
        ["src/noisewarp/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"] + compile_args,
        extra_link_args=link_args,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
    ext_modules = cythonize([ext], language_level=3)

setup(ext_modules=ext_modules)
