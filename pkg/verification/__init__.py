"""Oracle comparisons and invariant checks behind the verify command."""

from verification.suites import SUITES, run_suites

__all__ = ["SUITES", "run_suites"]
