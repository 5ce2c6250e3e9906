from setuptools import setup

# The compiled iteration kernel is optional: the package falls back to a pure
# numpy implementation when the extension is absent or fails to build.
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "rfvp.detequiv._kernel",
                ["src/rfvp/detequiv/_kernel.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": "3",
        },
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
