"""Quantum LDPC toolkit: CSS code constructions, noise models, and iterative decoders."""

__version__ = "0.1.0"
