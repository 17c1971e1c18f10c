from setuptools import setup, find_packages

setup(
    name='ebipla',
    version='0.1',
    packages=find_packages(exclude=['tests', 'tests.*']),
    install_requires=[
        'scipy',
        'numpy',
        'pandas',
        'tqdm',
        'torch'
    ],
    extras_require={
        'test': ['pytest', 'hypothesis'],
    },
    entry_points={
        'console_scripts': ['ebipla = ebipla.cli:main'],
    },
    include_package_data=True,
    zip_safe=False,
)
