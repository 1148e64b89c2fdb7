from setuptools import setup


with open('README.md') as file:
    long_description = file.read()


setup(
    name='fd_isac',
    description='joint transmit/receive beamforming for full-duplex integrated sensing and communication',
    version='0.1.0',
    install_requires=[
        'numpy',
        'scipy',
        'pandas',
        'tqdm',
        'cvxpy>=1.4',
        'clarabel',
        'colorama',
        'natsort',
        'str2bool',
        'pyyaml',
    ],
    extras_require={
        'test': ['pytest'],
    },
    packages=['fd_isac', 'fd_isac.utils'],
    package_data={'fd_isac': ['assets/*/*']},
    long_description=long_description,
    long_description_content_type='text/markdown',
    keywords=[],
    classifiers=['License :: OSI Approved :: MIT License'],
    license='MIT')
