"""Quantitative disease-focus analysis of gradient saliency maps over 3D brain scans."""

__version__ = "0.1.0"
