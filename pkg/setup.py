"""Optional compiled kernel; the package falls back to pure Python without it."""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("RMU_NO_EXTENSION", "") in ("", "0"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("rmu.rl._kernel", ["src/rmu/rl/_kernel.pyx"],
                       include_dirs=[numpy.get_include()],
                       extra_compile_args=["-O2", "-ffp-contract=off"],
                       define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")])],
            compiler_directives={"language_level": 3},
        )

setup(ext_modules=ext_modules)
