"""Exception types raised by the echoscreen pipeline."""


class EchoScreenError(Exception):
    """Base class for all echoscreen errors."""


# geometry
class DegenerateConfiguration(EchoScreenError):
    """Three or more corners are (near-)collinear; no homography exists."""


class PointAtInfinity(EchoScreenError):
    """Projective denominator vanished while mapping a point."""


class SingularMatrix(EchoScreenError):
    """Homography matrix is not invertible."""


class GenerationExhausted(EchoScreenError):
    """Random quad generation failed to produce a valid quad within the retry budget."""


# imaging / compositing
class ShapeMismatch(EchoScreenError):
    """Operands do not share dimensions or channel count."""


class ImageTooSmall(EchoScreenError):
    """Input image is below the minimum supported size."""


class QuadOutOfBounds(EchoScreenError):
    """Quad corners fall outside the target image bounds."""


# corner model I/O
class CornerOutOfBounds(EchoScreenError):
    """Corner lies outside the heatmap grid."""


class EmptyHeatmap(EchoScreenError):
    """Heatmap has no mass to decode."""


class NonPositiveSigma(EchoScreenError):
    """Uncertainty parameters must be strictly positive."""


class ParseError(EchoScreenError):
    """Malformed interchange file; message carries the line number."""


class InvariantViolation(EchoScreenError):
    """A record field violates its declared bounds; message names the field."""


# datagen
class InsufficientData(EchoScreenError):
    """A dataset split would be left without usable inputs."""


# metrics
class EmptyClass(EchoScreenError):
    """A confusion-matrix row is empty; the rate is undefined."""


class ImageSmallerThanWindow(EchoScreenError):
    """Image is smaller than the SSIM filter window."""


class EmptyInput(EchoScreenError):
    """Empty sample collection where at least one element is required."""


class AllRejected(EchoScreenError):
    """Uncertainty rejection removed every sample."""
