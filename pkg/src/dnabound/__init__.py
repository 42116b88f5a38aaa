"""Finite-blocklength evaluation of concatenated codes for the DNA storage
channel with insertions, deletions and substitutions."""

__version__ = "0.1.0"
