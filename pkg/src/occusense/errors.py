"""Exception hierarchy shared by every occusense module."""


class OccusenseError(Exception):
    """Base class for all errors raised by the package."""


# acoustics
class MaterialNotFound(OccusenseError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class InvalidFrequency(OccusenseError, ValueError):
    pass


class EmptySurfaces(OccusenseError, ValueError):
    pass


class InvalidAbsorption(OccusenseError, ValueError):
    pass


class RoomConfigError(OccusenseError, ValueError):
    pass


# dataset
class IngestIOError(OccusenseError, OSError):
    pass


class SchemaError(OccusenseError, ValueError):
    pass


class ScheduleError(OccusenseError, ValueError):
    pass


class LabelCoverageError(OccusenseError, ValueError):
    pass


class ParamError(OccusenseError, ValueError):
    pass


# id3
class EmptyPartition(OccusenseError, ValueError):
    pass


class UnlabeledSample(OccusenseError, ValueError):
    pass


class MissingFeature(OccusenseError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class ModelFormatError(OccusenseError, ValueError):
    pass


class ConfigError(OccusenseError, ValueError):
    pass


# evaluation
class FoldError(OccusenseError, ValueError):
    pass


# detector
class InvalidFeature(OccusenseError, ValueError):
    pass


class StaleReading(OccusenseError):
    pass
