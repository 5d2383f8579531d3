"""Filled in by a later build step."""
