from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

# -ffp-contract=off: a*b+c must round like two numpy ufunc calls, not one
# fused multiply-add, or results drift from the reference implementation.
ext = Pybind11Extension(
    "tecotime",
    ["src/main.cpp"],
    cxx_std=17,
    extra_compile_args=["-O2", "-ffp-contract=off"],
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})
