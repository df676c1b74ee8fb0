"""
margin-paths: constrained, margin, regularization and optimization paths of
exponential-loss classifiers, with the checks that relate them.
"""
__version__ = "0.1.0"
