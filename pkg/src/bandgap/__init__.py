"""Complex band structure toolkit for subwavelength resonator crystals."""

__version__ = "0.1.0"
