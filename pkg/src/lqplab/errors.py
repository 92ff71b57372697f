"""Exception types shared across the package."""

from __future__ import annotations


class LqpError(Exception):
    """Base class for all domain errors raised by this package."""


class DimensionMismatch(LqpError):
    pass


class BoundedIntOverflow(LqpError, OverflowError):
    """An integer-ring computation left the supported 64-bit signed range."""


class CapExceeded(LqpError):
    """A desk-scale enumeration or certification cap was exceeded."""


class MissingEdge(LqpError):
    """A tree walk produced a measurement with no outgoing edge."""

    def __init__(self, node_id: int, measurement: tuple[int, ...]):
        self.node_id = node_id
        self.measurement = measurement
        super().__init__(f"node {node_id} has no edge for measurement {measurement}")


class NoSuchEdge(LqpError):
    """Requested root edge absent; upstream construction is broken."""


class TooSmall(LqpError):
    """Instance too small for the requested construction."""


class CertificationBudgetExceeded(LqpError):
    """Random search for a certifiable matrix ran out of attempts."""


class SunflowerSearchRefused(LqpError):
    """Family too large for exact search; a reliable 'none' cannot be given."""


class CodecError(LqpError):
    """Protocol file failed to parse or violated a structural invariant."""
