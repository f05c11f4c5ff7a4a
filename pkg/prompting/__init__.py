"""Prompting package - learnable prompt contexts."""
