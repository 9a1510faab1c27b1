from setuptools import setup

with open("README.md") as f:
    readme = f.read()

setup(
    name="abmcalib",
    version="0.1.0",
    description="Surrogate assisted calibration of an agent-based epidemic model",
    long_description=readme,
    long_description_content_type="text/markdown",
    packages=["abmcalib"],
    python_requires=">=3.8",
    install_requires=["numpy", "pandas", "scipy", "tqdm"],
    entry_points={"console_scripts": ["abmcalib = abmcalib.cli:main"]},
)
