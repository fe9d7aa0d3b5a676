"""Categorical Feynman diagrams for scalar field theories on finite lattices."""

__version__ = "0.1.0"
