"""Zero-shot learning with complementary attributes and rank aggregation."""

__version__ = "0.1.0"
