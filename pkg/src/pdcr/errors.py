"""Exception hierarchy shared by every pdcr module."""

from __future__ import annotations


class PDCRError(ValueError):
    """Base class for all errors raised by pdcr."""


class EmptyInput(PDCRError):
    pass


class SchemaError(PDCRError):
    """A log record does not match the expected schema."""

    def __init__(self, line: int, field: str, detail: str = "") -> None:
        self.line = line
        self.field = field
        self.detail = detail
        msg = f"line {line}: field {field!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class InvariantError(PDCRError):
    """A parsed group violates a domain invariant."""

    def __init__(self, group_id: str, detail: str) -> None:
        self.group_id = group_id
        self.detail = detail
        super().__init__(f"group {group_id!r}: {detail}")


class EmptySeries(PDCRError):
    pass


class GammaOutOfRange(PDCRError):
    pass


class EmptyPool(PDCRError):
    pass


class TooFewValues(PDCRError):
    pass


class DegenerateSpread(PDCRError):
    pass


class FractionOutOfRange(PDCRError):
    pass


class CoverageMismatch(PDCRError):
    pass


class LengthMismatch(PDCRError):
    pass


class SpecInvalid(PDCRError):
    pass


class ConfigInvalid(PDCRError):
    pass
