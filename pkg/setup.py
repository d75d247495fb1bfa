"""Build hook for the optional compiled kernels."""
from setuptools import setup

try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("fblbc._kernels", ["src/fblbc/_kernels.pyx"], extra_compile_args=["-O3"])],
        compiler_directives={"language_level": 3},
    )
except ImportError:  # no Cython: the pure-Python kernels are used
    ext_modules = []

setup(ext_modules=ext_modules)
