from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "bearing_pursuit._kernels._simcore",
        ["src/bearing_pursuit/_kernels/_simcore.pyx"],
        # Bit-compatibility with the pure-Python fallback: no FMA
        # contraction, and no cos+sin fusion into glibc sincos (which
        # differs from separate cos/sin by 1 ulp on some arguments).
        extra_compile_args=["-O3", "-ffp-contract=off",
                            "-fno-builtin-sin", "-fno-builtin-cos"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
