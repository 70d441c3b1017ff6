"""Exception hierarchy for schedshare.

Every error raised by the library derives from SchedShareError, so callers
(and the CLI exit-code mapping) can catch one base class.
"""


class SchedShareError(Exception):
    """Base class for all schedshare errors."""


class ValidationError(SchedShareError):
    """Bad input data (cost functions, instances, scenarios)."""


class DecreasingCost(ValidationError):
    """Step costs decrease along the segments of a cost function."""


class ZeroCostSegment(ValidationError):
    """A segment has non-positive step cost."""


class NotNondecreasing(ValidationError):
    """A tabulated cost sample is not non-decreasing."""


class NoFiniteCost(ValidationError):
    """No machine has any finite-cost segment."""


class InfeasibleDemand(SchedShareError):
    """More jobs requested than the instance can hold at finite cost."""


class OverCapacity(SchedShareError):
    """A per-machine load exceeds the machine's represented capacity."""


class UnrankedSegment(SchedShareError):
    """A segment reference is missing from the segment order."""


class TooFew(SchedShareError):
    """Asked for the i-th element of a set with fewer than i members."""


class WrongMechanism(SchedShareError):
    """A share rule was invoked with a spec of a different kind."""


class MissingProbabilities(ValidationError):
    """Arrival probabilities are required but absent."""


class ZeroProbability(ValidationError):
    """Automatic disruptor selection needs strictly positive probabilities."""


class MissingDisruptors(SchedShareError):
    """A construction requires the disruptors to be present."""


class ConstructionNotStable(SchedShareError):
    """A proof-derived profile failed the Nash check (should never happen)."""


class NoEquilibrium(SchedShareError):
    """Exhaustive enumeration found no pure Nash equilibrium."""


class TooLarge(SchedShareError):
    """The profile space exceeds the exhaustive-enumeration guard."""


class ParseError(ValidationError):
    """Scenario text is not well-formed JSON."""


class SchemaError(ValidationError):
    """Scenario JSON violates the schema; message names the offending path."""
