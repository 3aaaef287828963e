"""Idiom detection toolkit.

Submodules: ``corpus`` (loaders, filters, splits), ``embeddings`` (frozen
vector archives), ``model`` (biGRU classifier), ``baseline`` (tf-idf SVM
and default classifiers), ``ensemble`` (Gaussian-density combination),
``evaluation`` (metrics and protocols), ``cli`` (command-line front end).
"""

__version__ = "0.1.0"
