"""Evaluators package - accuracy metrics and manual-prompt baselines."""
