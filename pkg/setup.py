"""Build script. The ray-casting hot kernel is compiled from Cython when a
compiler is available; the package falls back to the pure-numpy kernel
otherwise, so a failed extension build is not fatal."""

import os
import sys

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("VOLRECON_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "volrecon._kernels._raycast",
                    sources=["src/volrecon/_kernels/_raycast.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError as exc:
        print(f"volrecon: building without compiled kernel ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
