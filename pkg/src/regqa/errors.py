"""Exception types shared across the package."""

from __future__ import annotations


class RegqaError(Exception):
    """Base class for errors raised by this package."""


class FormatError(RegqaError):
    """A data file violates its expected record format."""


class ConfigError(RegqaError):
    """A run configuration is invalid or incomplete."""


class ProviderError(RegqaError):
    """A model provider call failed or returned an unusable result."""


class ScriptExhaustedError(ProviderError):
    """A scripted chat provider has no matching script entry left."""
