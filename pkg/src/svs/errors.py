"""Exception hierarchy shared by all tiers."""


class SVSError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(SVSError, ValueError):
    """A configuration field failed validation."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class NotFoundError(SVSError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "not found"


class EventRangeError(SVSError, ValueError):
    """An injected event falls outside the scenario duration."""


class OrderingError(SVSError, ValueError):
    def __init__(self, camera_id: int, expected: int, got: int):
        self.camera_id = camera_id
        self.expected = expected
        self.got = got
        super().__init__(
            f"camera {camera_id}: expected frame {expected}, got frame {got}"
        )


class StageError(SVSError, RuntimeError):
    """A pluggable perception stage failed on a batch."""

    def __init__(self, stage: str, camera_id: int, batch_index: int, cause: str = ""):
        self.stage = stage
        self.camera_id = camera_id
        self.batch_index = batch_index
        msg = f"stage {stage!r} failed on camera {camera_id} batch {batch_index}"
        if cause:
            msg += f": {cause}"
        super().__init__(msg)


class RecordRejected(SVSError, ValueError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


class EncodeError(SVSError, ValueError):
    pass


class FrameTooLarge(SVSError, ConnectionError):
    """Declared frame length exceeds the cap; the connection cannot recover."""


class RequestError(SVSError, ValueError):
    pass


class SubscriptionRejected(SVSError):
    pass


class InsufficientSamples(SVSError, ValueError):
    def __init__(self, required: int, got: int):
        self.required = required
        self.got = got
        super().__init__(f"need at least {required} samples, got {got}")
