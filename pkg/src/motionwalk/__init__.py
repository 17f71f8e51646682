"""Classical and dynamic random walks on motion groups K x| R^d."""

__version__ = "0.1.0"
