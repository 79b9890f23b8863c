"""Physics-informed kernel learning and weak kernel learners."""

__version__ = "0.1.0"
