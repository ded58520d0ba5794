import glob

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

ext = Pybind11Extension(
    "tmlgdc._core",
    sorted(glob.glob("src/*.cpp")) + ["bindings/module.cpp"],
    include_dirs=["include"],
    cxx_std=20,
    extra_compile_args=[
        "-O3",
        "-fno-math-errno",
        "-funsafe-math-optimizations",
        "-funroll-loops",
    ],
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})
