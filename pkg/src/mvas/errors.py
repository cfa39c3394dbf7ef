"""Exception taxonomy shared across the package.

Every error raised by the library derives from :class:`MvasError` so callers
(and the CLI's exit-code mapping) can catch one base class. Subclasses also
inherit from the closest builtin (ValueError / RuntimeError / OSError) so the
types behave idiomatically in generic code.
"""


class MvasError(Exception):
    """Base class for all library errors."""


# --- geometry ---------------------------------------------------------------

class NonPositiveDepth(MvasError, ValueError):
    """A point sits at or behind the camera plane (z_cam <= 0)."""


class BadRing(MvasError, ValueError):
    """Camera ring parameters violate the ring preconditions."""


class ConventionViolation(MvasError, ValueError):
    """Inputs break a documented geometric convention (focal/distance/bounds)."""


# --- diffusion --------------------------------------------------------------

class StepOutOfRange(MvasError, ValueError):
    """Timestep t outside 1..T for the given schedule."""


class EmptyBatch(MvasError, ValueError):
    """A training batch contains no motions or no unmasked joint-frames."""


# --- denoiser ---------------------------------------------------------------

class BadArchitecture(MvasError, ValueError):
    """Architecture descriptor fails validation."""


class ShapeMismatch(MvasError, ValueError):
    """An array does not have the shape the operation requires."""


class DataEmpty(MvasError, ValueError):
    """A dataset handle holds no usable records."""


class NonFiniteLoss(MvasError, RuntimeError):
    """Training loss became NaN/Inf (divergence guard)."""


class VersionMismatch(MvasError, ValueError):
    """Checkpoint version or schedule fingerprint does not match."""


class CorruptChecksum(MvasError, ValueError):
    """Checkpoint bytes fail the integrity check (truncated or altered)."""


# File trouble is plain OSError; the alias gives the taxonomy a stable name
# that the CLI exit-code mapping and tests can refer to.
Io = OSError


# --- mas --------------------------------------------------------------------

class DegenerateGeometry(MvasError, ValueError):
    """View geometry cannot determine a 3D point (e.g. fewer than 2 views)."""


class DivergedTriangulation(MvasError, RuntimeError):
    """Triangulation objective became non-finite."""


class NonFiniteState(MvasError, RuntimeError):
    """A sampler state stopped being finite (divergence guard)."""


class MissingTrace(MvasError, ValueError):
    """An operation needs a retained trace/history that was not recorded."""


# --- synthdata --------------------------------------------------------------

class BadFamily(MvasError, ValueError):
    """Unknown motion family id, or family incompatible with the skeleton."""


# --- eval -------------------------------------------------------------------

class TooShort(MvasError, ValueError):
    """A motion is too short for feature extraction."""


class InsufficientSamples(MvasError, ValueError):
    """Not enough samples to run a metric at the requested settings."""


# --- cli --------------------------------------------------------------------

class BadConfig(MvasError, ValueError):
    """A run configuration fails validation (unknown keys, bad values)."""
