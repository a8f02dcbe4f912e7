"""Exception types shared across the package.

Every failure mode that callers are expected to handle gets its own class so
tests and the CLI can match on type instead of message text.
"""


class NotegenError(Exception):
    """Base class for all package errors."""


# --- MIDI codec ---

class MidiError(NotegenError):
    """Base class for Standard MIDI File read/write failures."""


class TruncatedInput(MidiError):
    """Input ended in the middle of a field."""


class UnterminatedVlq(MidiError):
    """Four VLQ bytes in a row with the continuation bit set."""


class ValueTooLarge(MidiError):
    """Value does not fit in a 4-byte VLQ (>= 2**28)."""


class BadHeader(MidiError):
    """Missing or inconsistent MThd header."""


class UnsupportedFormat(MidiError):
    """SMF format other than 0 or 1."""


class SmpteDivisionUnsupported(MidiError):
    """SMPTE time division (high bit of the division word set)."""


class TruncatedChunk(MidiError):
    """Chunk body shorter than its declared length, or no End-of-Track."""


class BadEventStatus(MidiError):
    """Event status byte that cannot occur at this position."""


class InvariantViolation(NotegenError):
    """A value to be serialized is outside its legal range."""


# --- numerics / model / optim ---

class ShapeMismatch(NotegenError):
    """Operand shapes are incompatible for the requested operation."""


class BadProbability(NotegenError):
    """Probability outside its legal interval."""


class BadRate(NotegenError):
    """Dropout rate outside [0, 1)."""


class CacheMismatch(NotegenError):
    """Backward pass called with a cache from a non-matching forward pass."""


class NonFiniteGradient(NotegenError):
    """Gradient contains NaN or infinity; the update step is refused."""


# --- data / training ---

class EmptyCorpus(NotegenError):
    """No usable note data in the corpus."""


class NoSamples(NotegenError):
    """Every sequence is shorter than window + 1; nothing to train on."""


class NonFiniteLoss(NotegenError):
    """Training loss became NaN or infinite; the run is aborted."""


# --- checkpoints / generation ---

class CheckpointError(NotegenError):
    """Base class for checkpoint read failures."""


class CorruptCheckpoint(CheckpointError):
    """Bad magic, truncated data, or trailing bytes in a checkpoint file."""


class VersionMismatch(CheckpointError):
    """Checkpoint format version is not the one this code writes."""


class SeedTooShort(NotegenError):
    """Seed MIDI contains fewer notes than the model window."""
