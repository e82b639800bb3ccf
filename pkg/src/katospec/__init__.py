"""Computational spectral theory of -Delta + V on R^3 with Kato-class potentials."""

__version__ = "0.1.0"

from .potentials import Potential, Primitive, KatoDiagnostics  # noqa: F401
