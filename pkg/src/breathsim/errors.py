"""Exception hierarchy. Everything derives from ``BreathsimError`` (a ValueError)."""


class BreathsimError(ValueError):
    pass


class InvalidSpec(BreathsimError):
    pass


class SynthesisFailure(BreathsimError):
    pass


class LengthMismatch(BreathsimError):
    pass


class TooShort(BreathsimError):
    pass


class InvalidCutoff(BreathsimError):
    pass


class InvalidTaps(BreathsimError):
    pass


class BadPadLength(BreathsimError):
    pass


class EmptyBand(BreathsimError):
    pass


class EmptyNode(BreathsimError):
    pass


class EmptyDataset(BreathsimError):
    pass


class DimensionMismatch(BreathsimError):
    pass


class SchemaViolation(BreathsimError):
    pass


class UnknownVersion(SchemaViolation):
    pass


class InvalidK(BreathsimError):
    pass


class ClassTooSmall(BreathsimError):
    def __init__(self, class_id: int, count: int, k: int):
        self.class_id = class_id
        self.count = count
        self.k = k
        super().__init__(
            f"ClassTooSmall: class {class_id} has {count} rows, fewer than k={k} folds"
        )
