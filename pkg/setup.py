"""Build script for the optional compiled kernels.

The package is fully functional without the extension: ``onebit_mimo._backend``
falls back to the pure-numpy kernels when ``onebit_mimo._kernels`` is missing,
so any build failure here is downgraded to a warning.
"""

import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """build_ext that gives up instead of failing the whole install."""

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
        print(
            "warning: building the compiled kernels failed (%s); "
            "the pure-python backend will be used" % (exc,),
            file=sys.stderr,
        )


def extensions():
    if os.environ.get("ONEBIT_MIMO_PURE_PYTHON") == "1":
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        print("warning: %s; skipping compiled kernels" % (exc,), file=sys.stderr)
        return []
    ext = Extension(
        "onebit_mimo._kernels",
        ["src/onebit_mimo/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
