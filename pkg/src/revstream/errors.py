"""Exception hierarchy shared across the runtime and the bench harness."""

from __future__ import annotations


class RevstreamError(Exception):
    """Base class for all errors raised by this package."""


class RegistryError(RevstreamError):
    """Unknown tool, or a tool declaration that violates the class taxonomy."""


class IntegrityError(RevstreamError):
    """Stream or record bookkeeping broke an append-only/monotonicity rule."""


class ValidationError(RevstreamError):
    """A revision or request payload is malformed for its declared type."""


class ReversibilityError(RevstreamError):
    """A world operation was applied to an act of the wrong class."""


class DoubleInvertError(ReversibilityError):
    """An exact inverse was applied twice to the same act."""


class UnsupportedPolicyError(RevstreamError):
    """The policy cannot produce a mid-run decision (e.g. the oracle)."""


class BackendError(RevstreamError):
    """A planning/compatibility/judge backend failed or returned garbage."""


class ConfigError(RevstreamError):
    """Scenario, grid, or CLI configuration is unusable as given."""
