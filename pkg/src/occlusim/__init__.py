"""Tracking-occlusion video synthesis and occlusion-robustness evaluation tools."""
__version__ = "0.1.0"
