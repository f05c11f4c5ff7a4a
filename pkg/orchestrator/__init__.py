"""Orchestrator package - model assembly, training, checkpoints, reporting and experiment runs."""
