"""Build script for the compiled gate kernels.

The extension is optional at runtime: rollnet falls back to the pure numpy
kernels if `rollnet.nn.kernels._fast` is missing or fails to import.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:  # pure-python install still works
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "rollnet.nn.kernels._fast",
                ["src/rollnet/nn/kernels/_fast.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
