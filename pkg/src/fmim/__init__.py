"""Token-level mutual information maximization for cross-domain sequence labeling."""

__version__ = "0.1.0"
