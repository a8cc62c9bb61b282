"""Build script: compiles the optional fast LSTM kernel extension.

The package works without the extension (a pure-numpy fallback is selected
at import time), so any compilation failure downgrades to a warning instead
of breaking the install.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class BuildFailed(Exception):
    pass


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:
            raise BuildFailed(str(exc)) from exc

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            raise BuildFailed(str(exc)) from exc


def extension_modules():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "jointlabel.autodiff._fastkernels",
        ["src/jointlabel/autodiff/_fastkernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


def run_setup(with_ext):
    setup(
        ext_modules=extension_modules() if with_ext else [],
        cmdclass={"build_ext": optional_build_ext} if with_ext else {},
    )


try:
    run_setup(with_ext=True)
except BuildFailed:
    print("WARNING: compiled kernels failed to build; installing with the "
          "pure-numpy fallback only.", file=sys.stderr)
    run_setup(with_ext=False)
