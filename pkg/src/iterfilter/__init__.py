"""Iterative point-cloud filtering with stacked graph-convolutional modules."""

__version__ = "0.1.0"
