import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("HKLAB_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "hklab._ckernels",
                    sources=["src/hklab/_ckernels.pyx"],
                    include_dirs=[np.get_include(), "src/hklab"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3", "-fno-fast-math", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
