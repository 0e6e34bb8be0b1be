"""Core services for the RPW urn toolkit."""

from .container import Container

__all__ = ["Container"]
