"""Shared helpers: logging, errors, validation and fits."""
