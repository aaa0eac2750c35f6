"""Bell-inequality statistics for entangled light through fluctuating-loss channels."""

__version__ = "0.1.0"
