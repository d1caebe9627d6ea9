"""The quasi-free CAR model."""
