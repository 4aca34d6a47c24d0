"""Bundled demo scenarios."""
