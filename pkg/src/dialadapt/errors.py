"""Shared exception types.

Every toolkit error derives from DialadaptError and carries a short
machine-readable code; the CLI prints it as ``dialadapt: error: <code>: ...``
so batch scripts can grep for specific failure kinds.
"""


class DialadaptError(Exception):
    code = "error"


class CorpusError(DialadaptError):
    code = "corpus"


class MalformedRecordError(CorpusError):
    """A corpus record that cannot be parsed or violates alignment."""

    code = "malformed-record"

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CleaningMapError(CorpusError):
    code = "cleaning-map"


class SplitError(CorpusError):
    code = "split"


class CodecError(DialadaptError):
    code = "codec"


class ReservedSymbolError(CodecError):
    code = "reserved-symbol"


class RuleError(DialadaptError):
    code = "rewrite-rule"


class IndistinguishableDialectsError(RuleError):
    code = "indistinguishable-dialects"


class VocabularyError(DialadaptError):
    code = "vocabulary"


class UnknownDialectError(DialadaptError):
    code = "unknown-dialect"


class ModelError(DialadaptError):
    code = "model"


class CheckpointError(ModelError):
    code = "checkpoint"


class NonFiniteGradientError(ModelError):
    code = "non-finite-gradient"


class TrainingError(DialadaptError):
    code = "training"


class TrainingDivergedError(TrainingError):
    code = "diverged"

    def __init__(self, step: int, message: str = ""):
        super().__init__(message or f"non-finite loss at step {step}")
        self.step = step


class EvalError(DialadaptError):
    code = "eval"


class EmptyReferenceError(EvalError):
    """WER is undefined when the reference contains no words."""

    code = "empty-reference"


class ConfigError(DialadaptError):
    code = "config"
