"""Build script for the optional compiled kernels.

The package is fully functional without the extension: if Cython or a C
compiler is unavailable the build falls back to the pure numpy kernels
selected at import time by fesqueeze._kernels.
"""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible, otherwise warn and continue."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print("*" * 72)
        print("WARNING: compiled kernels could not be built; "
              "falling back to the pure numpy implementation.")
        print(f"  reason: {exc}")
        print("*" * 72)


ext_modules = []
if not os.environ.get("FESQUEEZE_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        native = Extension(
            "fesqueeze._kernels._native",
            sources=["src/fesqueeze/_kernels/_native.pyx"],
            include_dirs=[numpy.get_include()],
            extra_compile_args=["-O3"],
        )
        ext_modules = cythonize(
            [native],
            language_level="3",
            compiler_directives={
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError as exc:
        optional_build_ext._warn(exc)

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
