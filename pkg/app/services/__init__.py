# This file makes services a Python package


class BianchiError(Exception):
    """Base exception for every library-level failure."""
    pass
