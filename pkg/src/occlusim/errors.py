class OcclusimError(Exception):
    """Base class for every error raised by this package."""


# occluder library
class DecodeError(OcclusimError):
    pass


class NoAlphaChannel(OcclusimError):
    pass


class TooSmall(OcclusimError):
    """Occluder fails the opaque-pixel quality threshold."""


class EmptyCatalog(OcclusimError):
    pass


# tracks
class ParseError(OcclusimError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class EmptyTrack(OcclusimError):
    pass


class InconsistentHeader(OcclusimError):
    pass


# compositor
class DegenerateScale(OcclusimError):
    def __init__(self, message, frame_index=None):
        self.frame_index = frame_index
        super().__init__(message if frame_index is None else f"frame {frame_index}: {message}")


class SynthesisError(OcclusimError):
    def __init__(self, message, frame_index=None):
        self.frame_index = frame_index
        super().__init__(message if frame_index is None else f"frame {frame_index}: {message}")


# metrics
class EmptyBox(OcclusimError):
    pass


# counterfactual
class DimensionMismatch(OcclusimError):
    pass


class FrameCountMismatch(OcclusimError):
    pass


# car math
class EmptyVector(OcclusimError):
    pass


class LengthMismatch(OcclusimError):
    pass


class NonFiniteLoss(OcclusimError):
    pass


class EmptyBatch(OcclusimError):
    pass


# annotations
class SchemaError(OcclusimError):
    pass


class RowError(OcclusimError):
    """One or more rows failed validation; `errors` holds (row_number, message)."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = "; ".join(f"row {n}: {msg}" for n, msg in self.errors[:10])
        more = f" (+{len(self.errors) - 10} more)" if len(self.errors) > 10 else ""
        super().__init__(f"{len(self.errors)} invalid row(s): {lines}{more}")


# report
class EmptyInput(OcclusimError):
    pass


class UnknownLabel(OcclusimError):
    pass


class MisalignedClips(OcclusimError):
    pass


class UnmappedLabel(OcclusimError):
    def __init__(self, labels):
        self.labels = sorted(labels)
        super().__init__(f"labels missing from parent map: {', '.join(self.labels)}")


# cli
class ConfigError(OcclusimError):
    pass
