from setuptools import setup

about = {}
with open("chronoclock/version.py") as version_file:
    exec(version_file.read(), about)

with open("README.md", "r") as readme_file:
    readme = readme_file.read()

requirements = [
        "numpy>=1.22",
        "scipy>=1.10",
        "PyYAML>=5.4"
    ]

setup(
    name=about["__title__"],
    version=about["__version__"],
    author=about["__author__"],
    author_email=about["__author_email__"],
    description=about["__description__"],
    long_description=readme,
    long_description_content_type="text/markdown",
    url=about["__url__"],
    packages=["chronoclock"],
    install_requires=requirements,
    python_requires=">=3.8",
    entry_points={
        "console_scripts": ["chronoclock=chronoclock.cli:main"],
    },
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python",
        "Natural Language :: English",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Physics",
        "Topic :: Software Development :: Libraries :: Python Modules"
    ],
)
