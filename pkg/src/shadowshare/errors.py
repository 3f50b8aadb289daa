"""Exception hierarchy shared by every shadowshare module."""


class ShadowShareError(Exception):
    """Base class for all errors raised by this package."""


class DepthMismatchError(ShadowShareError, ValueError):
    pass


class ContextWipedError(ShadowShareError, RuntimeError):
    pass


class AddressError(ShadowShareError, IndexError):
    pass


class ImageFormatError(ShadowShareError):
    """A file could not be read or written as a supported lossless raster."""


class UnsupportedFormatError(ImageFormatError):
    pass


class LossyFormatError(ImageFormatError):
    pass


class CorruptFileError(ImageFormatError):
    pass


class ManifestError(ShadowShareError, ValueError):
    pass


class ManifestVersionError(ManifestError):
    pass


class GeometryMismatchError(ShadowShareError, ValueError):
    pass


class InsufficientSharesError(ShadowShareError, ValueError):
    pass


class InsufficientSamplesError(ShadowShareError, ValueError):
    pass


class SeedFormatError(ShadowShareError, ValueError):
    pass
