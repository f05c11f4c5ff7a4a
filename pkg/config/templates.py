"""
Caption templates and synthetic shape classes.
"""

from typing import Dict, List, Optional

CLASS_PLACEHOLDER = "[CLASS]"

# Hand-written prompts; ids are stable and appear in configs and reports.
TEMPLATES: List[Dict[str, str]] = [
    {"id": "point_cloud_of_a", "text": "a point cloud of a [CLASS]"},
    {"id": "3d_shape_of_a", "text": "a 3D shape of a [CLASS]"},
    {"id": "point_cloud_of_a_bare", "text": "point cloud of a [CLASS]"},
    {"id": "point_cloud_model_of", "text": "a point cloud model of [CLASS]"},
    {"id": "point_cloud_model_of_a", "text": "a point cloud model of a [CLASS]"},
    {"id": "depth_map_of_a", "text": "a depth map of a [CLASS]"},
    {"id": "rendering_of_a", "text": "a rendering of a [CLASS]"},
    {"id": "photo_of_a", "text": "a photo of a [CLASS]"},
]

# Templates used to caption pre-training triplets.
CAPTION_TEMPLATE_IDS = [
    "point_cloud_of_a",
    "3d_shape_of_a",
    "point_cloud_of_a_bare",
    "point_cloud_model_of",
]

DEFAULT_ZERO_SHOT_TEMPLATE = "point_cloud_model_of"

# Context template for template-mode initialization.
DEFAULT_INIT_TEMPLATE = "a point cloud model of a"

SHAPE_KINDS = [
    "sphere",
    "cube",
    "cylinder",
    "cone",
    "torus",
    "plane",
    "pyramid",
    "helix",
]


def get_template(template_id: str) -> Optional[Dict[str, str]]:
    """Get template by id, or by its literal text."""
    for template in TEMPLATES:
        if template["id"] == template_id or template["text"] == template_id:
            return template
    return None


def template_ids() -> List[str]:
    return [t["id"] for t in TEMPLATES]
