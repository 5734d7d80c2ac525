"""Exception types shared across the package."""


class SaltpeerError(Exception):
    """Base class for all package-specific errors."""


class InvalidParameterError(SaltpeerError, ValueError):
    """A parameter lies outside an operation's accepted domain."""


class UnsupportedParameterError(SaltpeerError, ValueError):
    """A parameter combination for which no closed form is defined."""


class ConfigurationError(SaltpeerError, ValueError):
    """A simulation configuration violates its invariants."""


class ChainExhaustedError(SaltpeerError):
    """The hash chain has no preceding element left to reveal."""


class VerificationRefusedError(SaltpeerError):
    """Salt verification refused because too many updates were claimed.

    Distinct from a failed verification: the verifier declines to do the
    work rather than judging the claim false.
    """


class SelfScoreError(SaltpeerError, ValueError):
    """A node asked for a peering score against itself."""


class ProtocolError(SaltpeerError):
    """A malformed or inconsistent protocol message."""
