"""Define tests for the numeric core."""
