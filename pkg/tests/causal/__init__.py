"""Define tests for the causal representation."""
