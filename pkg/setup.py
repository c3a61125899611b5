"""Build script: compiles the optional fast kernels.

The extension is a performance add-on only; if Cython or a C compiler is
unavailable the package installs with the pure-numpy kernels and selects
them at import time.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "twinsim.kernels._core",
                ["src/twinsim/kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                # -ffp-contract=off: the pure-python fallback must stay
                # bit-identical, so no FMA contraction in the C code.
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
