"""Adapters package - residual point-feature adapters."""
