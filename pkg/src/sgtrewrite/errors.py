from __future__ import annotations


class SGTError(Exception):
    """Base class for all package errors."""


class MalformedLine(SGTError):
    pass


class EmptyField(MalformedLine):
    pass


class IoFailure(SGTError):
    pass


class EncodingFailure(SGTError):
    pass


class EmptyDialogue(SGTError):
    pass


class Uncoverable(SGTError):
    """The reference cannot be decomposed into fragments of the input.

    ``residue`` holds the reference tokens left unmatched.
    """

    def __init__(self, residue, reason="no match"):
        self.residue = list(residue)
        self.reason = reason
        text = "".join(t.text for t in self.residue[:20])
        super().__init__(f"uncoverable reference ({reason}); residue starts {text!r}")


class OrderOverflow(SGTError):
    pass


class SequenceTooLong(SGTError):
    pass


class LabelOutOfRange(SGTError):
    pass


class NonFiniteGradient(SGTError):
    pass


class NonFiniteLoss(SGTError):
    def __init__(self, message, params=None, epoch=None):
        super().__init__(message)
        self.params = params
        self.epoch = epoch


class VersionMismatch(SGTError):
    pass


class CorruptFile(SGTError):
    pass


class LengthMismatch(SGTError):
    pass
