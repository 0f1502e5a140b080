"""Build the optional Cython kernels.

The package works without them: ``stc_dmt.kernels`` falls back to the
pure-Python implementation when the extension is not importable.
"""
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("STC_DMT_NO_EXT", "") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:  # pragma: no cover
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "stc_dmt.kernels._ckernels",
                    ["src/stc_dmt/kernels/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
