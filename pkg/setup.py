"""Build the optional compiled quadrature kernel.

The package works without it: ``hybridspec.quadrature`` falls back to the
numpy implementation when ``hybridspec._kernel`` cannot be imported.
"""
import os

from setuptools import setup
from setuptools.command.build_ext import build_ext

ext_modules = []
if os.environ.get("HYBRIDSPEC_PURE_PYTHON", "") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [Extension("hybridspec._kernel", ["src/hybridspec/_kernel.pyx"],
                       extra_compile_args=["-O3"])],
            compiler_directives={"language_level": "3"},
        )


class OptionalBuildExt(build_ext):
    """Do not fail the install when the extension cannot be compiled."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: compiled kernel not built ({exc}); using numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: failed to build {ext.name} ({exc}); using numpy fallback")


setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
