"""Define tests for the experiment harness."""
