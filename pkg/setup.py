"""Builds the compiled simulation kernel; package metadata lives in pyproject.toml."""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "contactgen._kernel",
                ["src/contactgen/_kernel.pyx"],
                # -ffp-contract=off: no FMA fusion; -fno-builtin-sincos: keep
                # cos/sin as separate libm calls (glibc's sincos can differ by
                # 1 ulp from cos, which would break bit-parity with the Python
                # kernel, whose math.cos/math.sin call cos/sin).
                extra_compile_args=[
                    "-O3",
                    "-ffp-contract=off",
                    "-fno-builtin-sin",
                    "-fno-builtin-cos",
                ],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    # Without Cython the package still installs; the pure-Python kernel is used.
    extensions = []

setup(ext_modules=extensions)
