"""Build script for the optional compiled kernel extension.

The hot SGD loops (SVD, SVD++, BPR, logistic MF) live in a Cython
extension.  If the extension cannot be built the package still installs
and falls back to the pure-Python kernels in ``wattrec.kernels.pure``;
set WATTREC_SKIP_EXT=1 to skip the build explicitly.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible, warn and continue otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"WARNING: compiled kernels skipped ({exc}); "
                  "pure-Python fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"WARNING: building {ext.name} failed ({exc}); "
                  "pure-Python fallback will be used")


def extensions():
    if os.environ.get("WATTREC_SKIP_EXT"):
        return []
    from Cython.Build import cythonize
    import numpy as np

    ext = Extension(
        "wattrec.kernels._ops",
        sources=["src/wattrec/kernels/_ops.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
