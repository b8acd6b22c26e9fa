"""Setup configuration for lpnested-toolkit."""
from setuptools import setup, find_packages

setup(
    name="lpnested-toolkit",
    version="1.0.0",
    description="L_p-nested symmetric distributions: density, sampling, fitting and nonlinear ICA",
    author="artqcid",
    url="https://github.com/artqcid/lpnested-toolkit",
    packages=find_packages(exclude=["tests", "tests.*"]),
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.22.0",
        "scipy>=1.8.0",
        "pandas>=1.4.0",
        "pydantic>=2.5.0",
        "pydantic-settings>=2.0.0",
        "python-dotenv>=1.0.0",
        "click>=8.1.0",
    ],
    extras_require={
        "dev": ["pytest"],
    },
    entry_points={
        "console_scripts": [
            "lpnested=lpnested.__main__:main",
        ],
    },
)
