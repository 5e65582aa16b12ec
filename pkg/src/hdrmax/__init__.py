"""HDRMAX: expansive-nonlinearity features for video quality prediction at the range extremes."""

__version__ = "0.1.0"
