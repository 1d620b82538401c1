"""plapmax - p-Laplacian eigenvalues, maximum principle sweeps and one-sign branches."""

__version__ = "0.1.0"
