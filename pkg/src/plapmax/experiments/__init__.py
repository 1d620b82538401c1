"""Experiment files: validated configuration and the field expression grammar."""
