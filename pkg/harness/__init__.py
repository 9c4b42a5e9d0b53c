"""Synthetic data, optimization, training and evaluation protocols."""
