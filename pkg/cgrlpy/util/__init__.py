"""Define utility modules."""
