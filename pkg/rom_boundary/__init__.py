"""
Range-of-motion boundary learning

Learns a smooth boundary function Gamma(q) around motion-capture joint-angle
data with a one-class SVM, tunes its hyperparameters and derives
volume-based impairment metrics.
"""

__version__ = "1.0.0"
