"""A setuptools based setup module for fluxqec

See LICENSE at the top-level of this distribution for more information.
"""

import os
from os import path

from setuptools import setup, find_packages

from fluxqec import VERSION


def get_readme():
    'Get the long description from the README file'

    here = path.abspath(path.dirname(__file__))
    rfile = path.join(here, 'README.rst')
    if not os.path.exists(rfile):
        raise ValueError(
            'Could not find %s; did you run `make README.rst`?' % rfile)
    with open(rfile) as my_fd:
        result = my_fd.read()

    return result


setup(
    name='fluxqec',
    version=VERSION,
    description=('Fluxonium gate errors, correlated Pauli error models and '
                 'surface-code logical error gradients.'),
    long_description=get_readme(),
    include_package_data=True,
    license='GPL3',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering :: Physics',
    ],


    keywords='fluxonium surface code correlated errors union-find',
    packages=find_packages(exclude=['contrib', 'docs', 'tests']),
    #
    # See discussion at link below on install_requires vs requirements.txt
    # https://packaging.python.org/discussions/install-requires-vs-requirements/
    install_requires=['click', 'PyYAML', 'tabulate', 'networkx', 'numpy',
                      'scipy'],
    python_requires='>=3.8',
    # See https://click.palletsprojects.com/en/master/setuptools/
    # for how entry_points and scripts work.
    entry_points={
        'console_scripts': [
            'fqcli = fluxqec.scripts.fqcli:main',
        ],
    },
)
