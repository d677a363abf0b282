"""Exception types shared across the hamnav package."""


class HamNavError(Exception):
    """Base class for all hamnav errors."""


# --- sketch bundle parsing ---

class BundleError(HamNavError):
    """Base class for sketch-bundle validation failures."""


class MissingImage(BundleError):
    pass


class MissingPath(BundleError):
    pass


class PathTooShort(BundleError):
    pass


class OutOfBoundsCoordinate(BundleError):
    pass


class UnsupportedVersion(BundleError):
    pass


class ZeroLengthPath(HamNavError):
    """Path polyline has zero total arc length."""


# --- graph / map ---

class UnknownNode(HamNavError):
    """Node id not present in the topological map."""


# --- perception ---

class EmptyMask(HamNavError):
    """Traversable mask contains no traversable pixels."""


class NonPositiveDepth(HamNavError):
    """Depth must be > 0 for pinhole projection."""


# --- prompting / responses ---

class EmptyCandidateSet(HamNavError):
    """Pruned map has no robot nodes to render."""


class Unparseable(HamNavError):
    """No score block could be extracted from a backend response."""


class AllZero(HamNavError):
    """Every legal answer was scored zero."""


# --- memory ---

class NonMonotonicStep(HamNavError):
    """Experience steps must be strictly increasing."""


# --- reasoning backends ---

class BackendUnavailable(HamNavError):
    """Remote backend failed after exhausting retries."""


class MalformedPrediction(HamNavError):
    """Landmark-prediction response could not be parsed."""


# --- simulator ---

class SchemaError(HamNavError):
    """World file does not match the expected schema."""


class DisconnectedStartGoal(SchemaError):
    """No free path exists between start and goal."""
