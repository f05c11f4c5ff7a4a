"""Objectives package - contrastive and classification losses."""
