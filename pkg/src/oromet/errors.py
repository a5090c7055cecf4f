"""Exception hierarchy shared across the package.

Every domain error derives from :class:`OrometError` so batch drivers can
catch one base class, record the failure, and keep going.
"""


class OrometError(Exception):
    """Base class for all domain errors raised by this package."""


# --- session / manifest ---------------------------------------------------

class WrongItemCount(OrometError):
    pass


class ItemOutOfRange(OrometError):
    pass


class MissingAlsfrs(OrometError):
    pass


class ParseError(OrometError):
    pass


class DuplicateTask(OrometError):
    pass


class MissingFile(OrometError):
    pass


# --- audio / voice quality ------------------------------------------------

class ClipTooShort(OrometError):
    pass


class DegenerateSignal(OrometError):
    pass


class InsufficientVoicing(OrometError):
    pass


class TooFewPeriods(OrometError):
    pass


class TooFewAmplitudes(OrometError):
    pass


class NonPositiveAmplitude(OrometError):
    pass


class NoSpeechSegments(OrometError):
    pass


# --- timing / DDK -----------------------------------------------------------

class NoSpeechDetected(OrometError):
    pass


# --- facial kinematics ------------------------------------------------------

class NoValidFrames(OrometError):
    pass


class TrackTooShort(OrometError):
    pass


class TrackGapTooLong(OrometError):
    pass


class DegenerateContour(OrometError):
    pass


# --- statistics -------------------------------------------------------------

class DegenerateGroup(OrometError):
    pass


class AllValuesTied(OrometError):
    pass


class ZeroControlVariance(OrometError):
    pass


# --- predictive models --------------------------------------------------

class NonConvergence(OrometError):
    pass


class ClassTooSmall(OrometError):
    pass


class SingleClass(OrometError):
    pass


class TooFewSamples(OrometError):
    pass


# --- pipeline ---------------------------------------------------------------

class UnknownScenario(OrometError):
    pass
