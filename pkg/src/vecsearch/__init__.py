"""Distribution-aware vector similarity search toolkit."""

__version__ = "0.1.0"
