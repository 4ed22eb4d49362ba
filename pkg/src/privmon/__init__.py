"""Privacy-preserving STL runtime monitoring with garbled sequential circuits."""

__version__ = "0.1.0"
