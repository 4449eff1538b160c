"""Exception types shared across the package."""


class TestDriveError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TestDriveError):
    """Invalid configuration or usage."""


class DataError(TestDriveError):
    """Malformed or inconsistent input data (manifests, detections, images)."""


class SessionError(TestDriveError):
    """Invalid session operation (unknown query, duplicate answer, ...)."""
