"""Exception types shared across the package."""


class VoxflowError(Exception):
    """Base class for all voxflow errors."""


class InvalidDepthError(VoxflowError):
    """Depth sample carries the sensor's invalid code (zero)."""


class NonPositiveDepthError(VoxflowError):
    """A 3D point with z <= 0 cannot be projected."""


class OutOfBoundsError(VoxflowError, IndexError):
    """Pixel coordinate outside the image it indexes."""


class CalibrationError(VoxflowError):
    """Calibration file is malformed or internally inconsistent."""


class DimensionMismatchError(VoxflowError):
    """Array shapes that must agree do not."""


class EmptyInputError(VoxflowError):
    """An operation requiring data received none."""


class SpecMismatchError(VoxflowError):
    """Voxelized pairs assembled against differing grid specs."""


class EmptyCloudError(VoxflowError):
    """A nonempty motion cloud is required."""


class EmptySceneError(VoxflowError):
    """A synthetic scene must contain at least one object."""


class BadMagicError(VoxflowError):
    """Byte stream does not start with the VXF magic."""


class UnsupportedVersionError(VoxflowError):
    """VXF record written by an unknown format version."""


class CorruptPayloadError(VoxflowError):
    """VXF payload truncated or inconsistent with its header."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class FrameCountMismatchError(VoxflowError):
    """RGB and depth directories hold different frame counts."""


class DecodeError(VoxflowError):
    """A frame file could not be decoded."""
