# Sphinx configuration for the pyfive documentation.
import os
import sys

# autodoc imports the package straight from the source tree
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'src')))

project = 'pyfive'
copyright = '2026, George Weinberg'
author = 'George Weinberg'
release = '0.1.0'

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.mathjax']
autodoc_member_order = 'bysource'

exclude_patterns = ['_build']

html_theme = 'alabaster'
