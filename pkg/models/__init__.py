"""Data models for experiment configuration and metric reports."""
