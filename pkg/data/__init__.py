"""Data package - meshes, synthetic shapes, depth renders, captions and datasets."""
