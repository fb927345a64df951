"""Penalized Cox regression with the Exclusive Lasso and baseline penalties."""

__version__ = "0.1.0"
