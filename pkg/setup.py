from setuptools import Extension, setup
from Cython.Build import cythonize

# -ffp-contract=off: the kernel builds uniform doubles with plain IEEE ops and
# must match the numpy fallback bit for bit; FMA contraction would break that.
ext = Extension(
    "frugalzo._philox_cython",
    sources=["src/frugalzo/_philox_cython.pyx"],
    extra_compile_args=["-O3", "-ffp-contract=off"],
)

setup(ext_modules=cythonize([ext], language_level="3"))
