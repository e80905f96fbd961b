from setuptools import find_packages, setup

setup(
    name="kickctl",
    version="0.1.0",
    description="Phase-kick, decoupling and Zeno control of a bound state decaying into a discretized continuum",
    packages=find_packages(include=["components", "database"]),
    py_modules=["main"],
    python_requires=">=3.10",
    install_requires=[
        "numpy",
        "pandas",
        "sqlalchemy",
        "psycopg2-binary>=2.9.9,<3.0",
        "python-dotenv",
    ],
    extras_require={"dev": ["pytest", "hypothesis"]},
    entry_points={"console_scripts": ["kickctl=main:main"]},
)
