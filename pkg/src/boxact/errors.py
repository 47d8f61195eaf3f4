"""Exception hierarchy shared across the package."""

from __future__ import annotations

__all__ = ["BoxactError", "AnnotationError", "ConfigError", "ContractError"]


class BoxactError(Exception):
    """Base class for all errors raised by boxact."""


class AnnotationError(BoxactError):
    """An annotation file is malformed or a track invariant is violated."""


class ConfigError(BoxactError):
    """A configuration file is inconsistent or references unknown features."""


class ContractError(BoxactError):
    """Caller passed inputs that violate an operation contract."""
