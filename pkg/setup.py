"""Build the optional Cython kernels.

The package works without them: ``brafl._backend`` falls back to the
numpy implementation in ``brafl._pykernels`` when the extension is missing.
Set ``BRAFL_NO_EXT=1`` to skip compilation entirely.
"""
import os
import sys

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("BRAFL_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("Cython not available; building pure-Python package", file=sys.stderr)
    else:
        # fp-contract=off: no FMA fusion, so sums match the numpy fallback bit for bit
        flags = [] if sys.platform == "win32" else ["-O3", "-ffp-contract=off"]
        ext_modules = cythonize(
            [
                Extension(
                    "brafl._kernels",
                    ["src/brafl/_kernels.pyx"],
                    extra_compile_args=flags,
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
