import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # build the pure-Python package only
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("pdnimpact.kernels._core", ["src/pdnimpact/kernels/_core.pyx"],
                   include_dirs=[np.get_include()],
                   extra_compile_args=["-O3", "-fopenmp"],
                   extra_link_args=["-fopenmp"],
                   define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                   optional=True)],
        compiler_directives={"language_level": 3})

setup(ext_modules=ext_modules)
