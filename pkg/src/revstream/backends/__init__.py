"""Pluggable planning / compatibility / judging backends."""

from .base import Backends, BackendConfig, PlannedStep
from .mock import MockLLM, rubric_score

__all__ = ["Backends", "BackendConfig", "PlannedStep", "MockLLM", "rubric_score"]
