"""Combined hierarchical task planning with 2.5-D geometric manipulation search."""

__version__ = "0.1.0"

__all__ = ["__version__"]
