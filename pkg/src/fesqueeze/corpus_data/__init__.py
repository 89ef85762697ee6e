"""Bundled problem files (.feq); data only."""
