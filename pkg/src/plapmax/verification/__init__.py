"""Numerical verification of the maximum principle and of one-sign solution branches."""
