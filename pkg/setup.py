"""Build the optional compiled kernels; the package still installs without them."""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("SHRINKMETA_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        print("Cython/numpy unavailable at build time; installing the pure-Python kernels only")
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "shrinkmeta._kernels",
                    ["src/shrinkmeta/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    # no fast-math or contraction: kernels must round like the fallback
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
