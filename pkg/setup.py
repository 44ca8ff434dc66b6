"""Build script for the optional compiled kernel.

The package works without it (``rlmc.kernels`` falls back to numpy), so a
failed compile only prints a warning.
"""
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.extension import Extension


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: compiled kernel not built ({exc}); using the numpy fallback", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: failed to build {ext.name} ({exc})", file=sys.stderr)


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    flags = ["-O3", "-fopenmp"] if sys.platform != "win32" else ["/O2", "/openmp"]
    link = ["-fopenmp"] if sys.platform != "win32" else []
    ext = Extension("rlmc._kernels", ["src/rlmc/_kernels.pyx"],
                    extra_compile_args=flags, extra_link_args=link)
    return cythonize([ext], language_level="3")


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
