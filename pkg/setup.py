"""Build script: compiles the optional speedup extension.

The package runs fine without the extension (a pure-numpy fallback is
selected at import time), so any failure here downgrades to a warning
instead of breaking the install.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler/toolchain
            warnings.warn(f"skipping compiled speedups ({exc}); using pure-numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"skipping {ext.name} ({exc}); using pure-numpy fallback")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        warnings.warn("Cython not available; using pure-numpy fallback")
        return []
    return cythonize(
        [
            Extension(
                "gihelm._speedups",
                ["src/gihelm/_speedups.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
