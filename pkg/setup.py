"""Build script for the optional compiled GRU kernels.

The package works without the extension (a pure NumPy fallback is
selected at import time); set ZPREADER_REQUIRE_EXT=1 to turn a failed
extension build into a hard error.
"""

import os
import sys

from setuptools import Extension, setup


def extensions():
    import numpy as np
    from Cython.Build import cythonize

    ext = Extension(
        "zpreader.tensorcore._gru_cy",
        ["src/zpreader/tensorcore/_gru_cy.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


try:
    ext_modules = extensions()
except Exception as exc:  # pragma: no cover - build-environment dependent
    if os.environ.get("ZPREADER_REQUIRE_EXT"):
        raise
    print(f"warning: skipping compiled kernels ({exc}); "
          "the pure NumPy fallback will be used", file=sys.stderr)
    ext_modules = []

setup(ext_modules=ext_modules)
