import os

import numpy as np
from setuptools import Extension, setup

# The compiled kernels are optional: without Cython (or with
# WAVETRACE_NO_EXT=1) the package installs with its numpy fallback only.
ext_modules = []
if not os.environ.get("WAVETRACE_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "wavetrace._kernels",
                    ["src/wavetrace/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
