import numpy
from setuptools import setup

# The compiled kernels are an optional speedup: if Cython or a C compiler is
# unavailable the package falls back to the numpy kernels at import time.
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "relprop.backend._ckernels",
                ["src/relprop/backend/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception:
    ext_modules = []

setup(ext_modules=ext_modules)
