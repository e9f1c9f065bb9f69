"""Exception types raised across arena-kit."""

from typing import Optional


class ArenaKitError(Exception):
    pass


class ProtocolError(ArenaKitError):
    """An agent or arena was driven out of its call order."""


class UsageError(ArenaKitError):
    pass


class ArenaConfigError(ArenaKitError):
    pass


class ActionRejectedError(ArenaKitError):
    pass


class CapabilityError(ArenaKitError):
    """A tool, task or agent was paired with an arena lacking the state it needs."""


class RegistryError(ArenaKitError):
    pass


class DomainStringError(ArenaKitError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ConfigNotFoundError(ArenaKitError, FileNotFoundError):
    def __init__(self, path: str):
        super().__init__(f"Config file not found: {path}")
        self.path = path


class CheckpointError(ArenaKitError):
    pass


class SchemaError(ArenaKitError):
    pass


class StoreModeError(ArenaKitError):
    pass


class StoreVersionError(ArenaKitError):
    pass


class StoreCorruptError(ArenaKitError):
    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class ImageShapeError(ArenaKitError):
    pass
