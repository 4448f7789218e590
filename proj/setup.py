"""Builds the _specboot extension directly from the C++ sources.

The canonical build is CMake (see CMakeLists.txt); this setup exists so the
python module is also pip-installable without a separate CMake step.
"""

import glob
import os

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup


def eigen_include():
    for candidate in (os.environ.get("EIGEN3_INCLUDE_DIR"),
                      "/usr/include/eigen3", "/usr/local/include/eigen3"):
        if candidate and os.path.isdir(candidate):
            return candidate
    raise RuntimeError("Eigen3 headers not found; set EIGEN3_INCLUDE_DIR")


ext = Pybind11Extension(
    "_specboot",
    sorted(glob.glob("src/*.cpp")) + ["python/module.cpp"],
    include_dirs=["include", "vendor", eigen_include()],
    cxx_std=20,
    extra_compile_args=["-O2"],
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})
