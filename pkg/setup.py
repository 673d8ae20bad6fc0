from setuptools import setup, find_packages

packages = [
    'numpy',
    'scipy',
    'torch',
    'matplotlib'
]

setup(name='lglab',
      version='0.1.0',
      description='Length generalization experiments for transformers',
      url='',
      author='',
      author_email='',
      license='MIT Licence',
      packages=find_packages(exclude=['tests', 'tests.*']),
      zip_safe=False,
      install_requires=packages,
      extras_require={'tests': ['pytest', 'hypothesis']},
      entry_points={'console_scripts': ['lglab=lglab.cli:main']})
