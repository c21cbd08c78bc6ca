"""Bioheat, radiometry and classifier-validation toolkit for microwave
radiothermometry of the breast."""

__version__ = "0.1.0"
