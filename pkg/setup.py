"""Build the optional compiled kernels.

If Cython or a C compiler is missing the package still installs; the
numpy fallback in ``cgnl._pykernels`` is selected at import time.
"""
import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "cgnl._ckernels",
                ["src/cgnl/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                # no FMA contraction: the oracle must match taylor_eval bitwise
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError as exc:
    print(f"cgnl: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
