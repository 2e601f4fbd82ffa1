"""Build script: compiles the optional Cython kernel core.

The package works without the extension (a NumPy/SciPy fallback is selected
at import time), so a failed extension build degrades instead of aborting.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "sandshape._kernels._core",
                ["src/sandshape/_kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # keep float expressions un-fused so the compiled kernels are
                # bit-identical to the NumPy fallback
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    print(f"sandshape: building without compiled kernels ({exc})")

setup(ext_modules=ext_modules)
