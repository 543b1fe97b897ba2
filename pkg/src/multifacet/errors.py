"""Exception hierarchy. Every error carries a stable code used by the CLI."""


class MultifacetError(Exception):
    code = "MF000"


class EmbeddingFormatError(MultifacetError, ValueError):
    code = "MF101"


class EmptyMatrixError(MultifacetError, ValueError):
    code = "MF102"


class NonFiniteError(MultifacetError, ValueError):
    code = "MF201"


class ShapeError(MultifacetError, ValueError):
    code = "MF202"


class ConfigError(MultifacetError, ValueError):
    code = "MF301"


class StaleRecordError(MultifacetError, RuntimeError):
    code = "MF302"


class CheckpointError(MultifacetError, IOError):
    code = "MF401"


class ChecksumError(CheckpointError):
    code = "MF402"


class CheckpointVersionError(CheckpointError):
    code = "MF403"


class CorpusError(MultifacetError, ValueError):
    code = "MF501"


class TrainingError(MultifacetError, RuntimeError):
    code = "MF502"


class ScoringError(MultifacetError, ValueError):
    code = "MF601"


class MetricError(MultifacetError, ValueError):
    code = "MF701"
