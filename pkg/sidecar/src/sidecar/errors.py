class SidecarError(Exception):
    """Base for everything this package raises on purpose."""


class ConfigError(SidecarError):
    pass


class DatasetMissing(SidecarError):
    """An image referenced by the manifest is absent or unreadable."""


class DeviceUnavailable(SidecarError):
    """The requested compute device or model weights cannot be used here."""
