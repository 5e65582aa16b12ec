"""Exception types raised across the toolkit."""


class HdrmaxError(Exception):
    """Base class for all toolkit errors."""


class FormatError(HdrmaxError):
    pass


class UnsupportedFormatError(FormatError):
    pass


class TruncationError(FormatError):
    def __init__(self, frame_index, message=None):
        self.frame_index = frame_index
        super().__init__(message or f"truncated frame at index {frame_index}")


class SizeMismatchError(FormatError):
    pass


class OutOfRangeError(FormatError):
    pass


class DimensionError(HdrmaxError, ValueError):
    pass


class DegenerateInputError(HdrmaxError, ValueError):
    pass


class FrameFeatureError(HdrmaxError):
    """A sub-fit failed while computing per-frame NSS features."""

    def __init__(self, stage, cause):
        self.stage = stage
        super().__init__(f"{stage}: {cause}")


class InsufficientFramesError(HdrmaxError, ValueError):
    pass


class ConfigError(HdrmaxError, ValueError):
    pass


class DataError(HdrmaxError, ValueError):
    pass
