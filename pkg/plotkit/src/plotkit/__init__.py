"""Read-only figure regeneration for bandgap CLI artifacts."""

__version__ = "0.1.0"
