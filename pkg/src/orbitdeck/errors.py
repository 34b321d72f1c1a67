"""Exception types shared across the package."""


class OrbitdeckError(Exception):
    """Base class for all package errors."""


# --- dynamics ---

class NonFiniteError(OrbitdeckError):
    """A propagated state contained NaN or infinity."""


class SurfaceImpactError(OrbitdeckError):
    """A vessel descended to or below the body radius."""


class DegenerateOrbitError(OrbitdeckError):
    """Position parallel to velocity; the orbit-local frame is undefined."""


class InvalidOrbitError(OrbitdeckError):
    """Requested orbit geometry violates its constraints."""


# --- scenarios ---

class UnsupportedScenarioError(OrbitdeckError):
    """Scenario identifier outside the supported set (e.g. lg3)."""


class EpisodeFinishedError(OrbitdeckError):
    """step() called on a finished episode."""


# --- telemetry / scoring ---

class ZeroRelativeVelocityError(OrbitdeckError):
    """Relative velocity below threshold; prograde undefined."""


class MissingGuardDistanceError(OrbitdeckError):
    """Score requested on a ledger that never tracked a guard distance."""


class EmptyRunSetError(OrbitdeckError):
    """Aggregation requested over zero episodes."""


# --- navball ---

class NotUnitError(OrbitdeckError):
    """Marker projection input is not a unit vector."""


# --- prompt codec ---

class NoExamplesError(OrbitdeckError):
    """Few-shot mode requested without any examples."""


class ResponseParseError(OrbitdeckError):
    """Base for model-response parsing failures."""


class UnparseableResponseError(ResponseParseError):
    """No recognizable action call in the response."""


class UnknownEnumValueError(ResponseParseError):
    """An action parameter carried a value outside its vocabulary."""


# --- remote agent ---

class RemoteError(OrbitdeckError):
    """Base for remote-endpoint failures."""


class RemoteTimeoutError(RemoteError):
    """The endpoint did not answer within the configured timeout."""


class TransportError(RemoteError):
    """Connection-level failure talking to the endpoint."""


class HttpStatusError(RemoteError):
    """Endpoint answered with a non-success HTTP status."""

    def __init__(self, status_code: int, detail: str = ""):
        self.status_code = status_code
        super().__init__(f"HTTP {status_code}: {detail}" if detail else f"HTTP {status_code}")


class ExhaustedRetriesError(RemoteError):
    """All transport or parse retries were consumed without a usable action."""


# --- episode store ---

class DuplicateSessionError(OrbitdeckError):
    """A session with the requested id already exists."""


class ClosedWriterError(OrbitdeckError):
    """append_frame() called on a closed session writer."""


class CorruptSessionError(OrbitdeckError):
    """Session manifest and on-disk frames disagree."""
