import numpy as np
from setuptools import Extension, setup
from Cython.Build import cythonize

ext_modules = [
    Extension(
        "quadecho.kernels._kernels",
        sources=["src/quadecho/kernels/_kernels.pyx"],
    )
]

setup(
    ext_modules=cythonize(ext_modules, language_level="3"),
    include_dirs=[np.get_include()],
)
