"""Active tactile exploration and mapping of rigid objects buried under foam."""

__version__ = "0.1.0"
