"""Phase-spectrum forgery analysis and shallow RGBP classifiers."""

__version__ = "0.1.0"
