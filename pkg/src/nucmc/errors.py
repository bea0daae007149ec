class InvalidArgument(ValueError):
    """Raised for malformed inputs: non-finite entries, bad ranks, shape mismatches."""
