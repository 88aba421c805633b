# -*- coding: utf-8 -*-
#
# haloscope_qfi documentation build configuration file.

import sys
import os

sys.path.insert(0, os.path.abspath('..'))

from haloscope_qfi import __version__ as haloscope_qfi_version  # noqa: E402

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.doctest',
    'sphinx.ext.intersphinx',
    'sphinx.ext.viewcode',
    'IPython.sphinxext.ipython_console_highlighting',
    'sphinx.ext.autosummary',
    'sphinx.ext.mathjax',
    'numpydoc',
    'sphinxcontrib.programoutput',
]

numpydoc_show_class_members = False
numpydoc_use_blockquotes = True

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'haloscope_qfi'
copyright = u'2026, the haloscope_qfi developers'
author = u'the haloscope_qfi developers'

version = haloscope_qfi_version
release = haloscope_qfi_version

language = None
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
pygments_style = 'sphinx'
todo_include_todos = False

# -- Options for HTML output ----------------------------------------------

html_theme = 'sphinx_rtd_theme'
html_static_path = ['_static']
htmlhelp_basename = 'haloscope_qfidoc'

# -- Options for LaTeX / manual / Texinfo output --------------------------

latex_documents = [
    (master_doc, 'haloscope_qfi.tex', u'haloscope_qfi Documentation',
     author, 'manual'),
]

man_pages = [
    (master_doc, 'haloscope_qfi', u'haloscope_qfi Documentation',
     [author], 1)
]

texinfo_documents = [
    (master_doc, 'haloscope_qfi', u'haloscope_qfi Documentation',
     author, 'haloscope_qfi', 'Noise-sensing Fisher information for haloscopes',
     'Miscellaneous'),
]

intersphinx_mapping = {
    'python': ('https://docs.python.org/', None),
    'numpy': ('https://numpy.org/doc/stable/', None),
    'scipy': ('https://docs.scipy.org/doc/scipy/', None),
}
