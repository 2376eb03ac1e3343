"""plaplab: a numerical laboratory for p-Laplacian problems on weighted graphs."""

__version__ = "0.1.0"
