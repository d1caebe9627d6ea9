"""Grassmann Brownian motion and its stochastic calculus."""
