from setuptools import find_packages, setup

setup(
    name="resolab",
    version="0.3.0",
    description="Numerical checks for semiclassical resolvent estimates",
    packages=find_packages(include=["resolab", "resolab.*"]),
    python_requires=">=3.10",
    install_requires=[
        "numpy",
        "scipy",
        "pandas",
        "statsmodels",
        "pydantic>=2",
        "python-dotenv",
        "tomli; python_version<'3.11'",
    ],
    extras_require={"test": ["pytest"]},
    entry_points={"console_scripts": ["resolab=resolab.main:main"]},
)
