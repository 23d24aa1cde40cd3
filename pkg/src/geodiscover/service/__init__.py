"""HTTP facade over the discovery pipeline."""

from .app import create_app

__all__ = ["create_app"]
