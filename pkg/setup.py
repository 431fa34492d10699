import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "mvimpulse._kernels",
        ["src/mvimpulse/_kernels.pyx"],
        include_dirs=[np.get_include()],
        # no -ffast-math: the fallback must reproduce the compiled results bit for bit
        extra_compile_args=["-O3", "-ffp-contract=off"],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
