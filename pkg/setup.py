from setuptools import setup, find_packages

setup(
    name="monotone_rep",
    version="0.1.0",
    packages=find_packages(exclude=["examples", "examples.*"]),
    install_requires=[
        "numpy<2.0",
        "pandas>=2.0.0",
        "scipy",
        "joblib",
        "pydantic>=2",
    ],
    entry_points={
        "console_scripts": [
            "monotone-rep = monotone_rep.cli:main",
        ],
    },
)
