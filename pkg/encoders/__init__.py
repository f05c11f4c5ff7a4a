"""Encoders package - text, depth-image and point-cloud backbones."""
