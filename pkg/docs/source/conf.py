# Sphinx configuration for the lglab documentation.
import os
import sys
sys.path.insert(0, os.path.abspath('../../'))

import lglab


project = 'lglab'
copyright = '2026, lglab developers'
author = 'lglab developers'
version = '.'.join(lglab.__version__.split('.')[:2])
release = lglab.__version__


extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.autosummary',
    'sphinx.ext.intersphinx',
    'sphinx.ext.mathjax',
    'sphinx.ext.napoleon',
    'sphinx.ext.viewcode',
    'sphinx_rtd_theme',
]

exclude_patterns = ['_build']

# docstrings are numpy style throughout
napoleon_google_docstring = False
napoleon_numpy_docstring = True
napoleon_use_rtype = False

autosummary_generate = True
autodoc_typehints = 'none'
autodoc_member_order = 'bysource'
# LTParams and friends are namedtuples; hide the tuple methods
autodoc_default_options = {'exclude-members': 'count, index'}

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable', None),
    'scipy': ('https://docs.scipy.org/doc/scipy', None),
    'torch': ('https://pytorch.org/docs/stable', None),
}


html_theme = 'sphinx_rtd_theme'
html_title = 'lglab {}'.format(release)
html_theme_options = {'collapse_navigation': False, 'navigation_depth': 2}
