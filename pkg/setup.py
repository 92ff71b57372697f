"""Build script: compiles the optional fast kernel extension.

The package works without the extension (a pure-Python fallback is
selected at import time), so any compilation failure downgrades to a
pure build instead of aborting the install.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("lqplab._speedups", ["src/lqplab/_speedups.pyx"])],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - depends on build host
    print(f"lqplab: skipping C extension ({exc}); using pure-Python kernels")

setup(ext_modules=ext_modules)
