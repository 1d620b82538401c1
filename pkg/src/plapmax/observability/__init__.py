"""Observability: structured logging and solver metrics."""
