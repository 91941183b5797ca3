"""Explainable machine learning for tabular data: classification, survival and regression."""

__version__ = "0.1.0"
