"""Spectral integrated neural networks for 3D forward and inverse dynamic PDEs."""

__version__ = "0.1.0"
