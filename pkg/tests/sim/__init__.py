"""Define tests for the intersection simulator."""
