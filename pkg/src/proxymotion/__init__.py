"""Proxy-to-motion capture toolkit: proxy data synthesis, human-centric motion
algebra, a small autodiff engine with the network layers, neural motion descent
and world-space evaluation."""

__version__ = "0.1.0"
