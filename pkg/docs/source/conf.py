# Sphinx configuration for the PAVE-Net docs.
# Build with ``sphinx-build -b html docs/source docs/build`` from the repo root.

import datetime
import os
import sys


sys.path.insert(0, os.path.abspath("../.."))

project = "PAVE-Net"
author = "PAVE-Net developers"
copyright = f"2024-{datetime.date.today().year}, {author}"
release = "0.1.0"

extensions = [
    "sphinx_rtd_theme",
    "sphinx.ext.autodoc",
    "sphinx.ext.autosummary",
    "sphinx.ext.napoleon",
    "sphinx.ext.viewcode",
    "sphinx.ext.mathjax",
    "autodocsumm",
]

templates_path = ["_templates"]
exclude_patterns: list[str] = []

html_theme = "sphinx_rtd_theme"

# Docstrings are Google style throughout apps/pavenet.
napoleon_google_docstring = True
napoleon_numpy_docstring = False
napoleon_include_init_with_doc = False
napoleon_use_ivar = True
napoleon_use_rtype = True

autodoc_default_options = {
    "members": True,
    "show-inheritance": True,
    "member-order": "bysource",
}
autoclass_content = "class"
autodoc_typehints = "signature"
autodoc_typehints_format = "short"
# cv2 wheels are not installed on docs builders.
autodoc_mock_imports = ["cv2"]
