"""Exception hierarchy shared by every eqsat module."""


class EqSatError(Exception):
    """Base class for all eqsat failures."""


class ParameterError(EqSatError, ValueError):
    """A parameter tuple or argument violates a feasibility rule."""


class ShapeError(EqSatError, ValueError):
    """Array lengths of a spectrum, key or block disagree."""


class MalformedClauseError(EqSatError, ValueError):
    """A clause references an out-of-range variable or repeats a variable."""


class GenerationError(EqSatError):
    """Key generation exhausted its retry budget."""


class EncryptionError(EqSatError):
    """No qualifying extraction was found within the resample budget."""


class CorruptCiphertextError(EqSatError, ValueError):
    """A block decrypts to a value outside the plaintext range."""

    def __init__(self, message: str, block_index: int | None = None):
        super().__init__(message)
        self.block_index = block_index


class FormatError(EqSatError, ValueError):
    """Serialized bytes or text could not be decoded."""


class ContractError(EqSatError):
    """An internal precondition was violated (a bug, not bad input)."""
