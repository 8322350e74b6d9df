"""Build script.

The compiled kernel is optional: if Cython (or a C compiler) is missing the
package installs anyway and falls back to the pure-Python kernel at import.
"""

import os

from setuptools import setup

ext_modules = []
try:
    if not os.path.exists("src/mecgame/_core/_kernel_cy.pyx"):
        raise ImportError
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "mecgame._core._kernel_cy",
                ["src/mecgame/_core/_kernel_cy.pyx"],
                # -ffp-contract=off keeps the compiled kernel bit-identical
                # to the pure-Python twin (no FMA contraction).
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
