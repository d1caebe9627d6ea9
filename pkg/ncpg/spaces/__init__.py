"""Twisted L^p spaces, filtrations and martingale norms."""
