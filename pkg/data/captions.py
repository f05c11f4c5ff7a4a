"""
Caption templating for triplets and manual prompts.
"""

from config.templates import CLASS_PLACEHOLDER, get_template, template_ids
from errors import ArgumentError


def make_caption(class_name: str, template: str) -> str:
    """
    Substitute a class name into a template.

    Args:
        class_name: Category name, may be empty
        template: Template id or its literal text

    Returns:
        Caption text
    """
    found = get_template(template)
    if found is None:
        raise ArgumentError(f"unknown template '{template}', known ids: {template_ids()}")
    return found["text"].replace(CLASS_PLACEHOLDER, class_name).strip()
