"""Checkpoint directories and PNG image I/O."""
