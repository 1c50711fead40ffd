"""Exception hierarchy. Every error carries a stable ``code`` used by the CLI."""


class ManeuverKitError(Exception):
    code = "ManeuverKitError"

    def __init__(self, message="", **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def __str__(self):
        return self.message


def _make(name, doc, *bases):
    return type(name, (ManeuverKitError,) + bases, {"code": name, "__doc__": doc})


MalformedRecord = _make("MalformedRecord", "A line or row could not be parsed.")
EmptyInput = _make("EmptyInput", "Input contained nothing usable.")
RangeViolation = _make("RangeViolation", "A value lies outside its physical range.")
NonMonotonicTime = _make("NonMonotonicTime", "Timestamps are not strictly ascending.")
NonFiniteValue = _make("NonFiniteValue", "A sample is NaN or infinite.")
EmptySeries = _make("EmptySeries", "A series has no samples.")
TooFewSamples = _make("TooFewSamples", "Not enough knots for a cubic spline.")
GridOutOfRange = _make("GridOutOfRange", "A grid point would require extrapolation.")
MissingChannel = _make("MissingChannel", "A required channel is absent.")
InsufficientOverlap = _make("InsufficientOverlap", "Streams do not overlap long enough.")
IoFailure = _make("IoFailure", "Reading or writing a file failed.")
MissingFile = _make("MissingFile", "An expected file does not exist.")
LabelUnknown = _make("LabelUnknown", "A maneuver label is not recognised.")
SingleClass = _make("SingleClass", "Training data contains fewer than two classes.")
DimensionMismatch = _make("DimensionMismatch", "Vector lengths disagree.", ValueError)
NoConvergence = _make("NoConvergence", "The solver exhausted its budget.")
ClassTooSmall = _make("ClassTooSmall", "A class has too few rows to split.")
