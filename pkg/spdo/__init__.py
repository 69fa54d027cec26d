"""spdo — Galerkin and collocation solvers for pseudodifferential equations on the sphere."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("spdo")
except PackageNotFoundError:
    __version__ = "0.0.0+dev"

__all__ = ["__version__"]
