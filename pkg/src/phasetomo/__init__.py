"""Phase-space tomography of a transversely confined charged beam."""

__version__ = "0.1.0"
