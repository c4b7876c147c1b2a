#!/usr/bin/env python
"""
Setup script for the damped wave spectral lab
"""
from setuptools import setup

setup(
    name="dwsl",
    version="0.1.0",
    description="Damped wave spectral lab: strip eigenvalue branches, resolvent scans and energy decay",
    long_description=open("README.md", encoding="utf-8").read(),
    long_description_content_type="text/markdown",
    python_requires=">=3.8",
    py_modules=[
        "acceptance",
        "app_config",
        "core",
        "energy_sim",
        "errors",
        "main",
        "monodromy",
        "quasimode",
        "resolvent",
        "results_manager",
        "semigroup_lab",
        "strip_spectrum",
    ],
    packages=["utils"],
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.8",
    ],
    extras_require={
        "test": ["pytest>=7"],
    },
    entry_points={
        "console_scripts": [
            "dwsl=main:main",
        ],
    },
)
