import numpy as np
from setuptools import Extension, setup

# The compiled jump-process kernel is optional: if Cython or a C compiler is
# missing the package falls back to the pure-numpy backend at import time.
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "bgkness._jump_cy",
                ["src/bgkness/_jump_cy.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
