"""Build the optional compiled kernels; the package falls back to numpy without them."""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any toolchain failure
            print(f"warning: compiled kernels not built ({exc}); using numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: failed to build {ext.name} ({exc}); using numpy fallback")


def extensions():
    if os.environ.get("CHBFLOW_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "chbflow._kernels",
        ["src/chbflow/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
