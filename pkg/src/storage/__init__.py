"""Persistent invariant database"""

from .database import FORMAT_VERSION, InvariantDatabase, planned_cases

__all__ = ["FORMAT_VERSION", "InvariantDatabase", "planned_cases"]
