from setuptools import Extension, setup

# The compiled kernel core is optional: the package falls back to the NumPy
# implementation in slicedpat._kernels._fallback when the extension is absent.
try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "slicedpat._kernels._core",
                ["src/slicedpat/_kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
