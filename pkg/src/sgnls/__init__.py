"""Spectral analysis and Schrodinger dynamics on the Sierpinski gasket."""

__version__ = "0.1.0"

from . import geometry, spectral  # noqa: E402  (calculus imports __version__)

__all__ = ["geometry", "spectral", "__version__"]
