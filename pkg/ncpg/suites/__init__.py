"""Invariant suites and the verify orchestrator."""
