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
                "agglogic._kernel_cy",
                ["src/agglogic/_kernel_cy.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # compiled kernel is optional, pure-python fallback exists
    sys.stderr.write("agglogic: skipping compiled kernel (%s)\n" % exc)

setup(ext_modules=ext_modules)
