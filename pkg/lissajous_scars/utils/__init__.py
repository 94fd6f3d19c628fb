"""Utility modules for lissajous_scars."""
