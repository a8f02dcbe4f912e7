"""LSTM music generation over Standard MIDI Files.

Pipeline: parse MIDI into note-onset matrices, scale them into (0, 1),
train a single-layer LSTM regressor on sliding windows, then generate new
note sequences autoregressively and write them back out as MIDI.
"""

from .errors import NotegenError
from .generator import GenerateConfig, export, generate
from .midi_codec import MidiFile, merge_tracks, parse_midi, write_midi
from .note_matrix import NoteMatrix, NoteRow, ScalingParams
from .trainer import TrainConfig, ingest_corpus, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "GenerateConfig",
    "MidiFile",
    "NoteMatrix",
    "NoteRow",
    "NotegenError",
    "ScalingParams",
    "TrainConfig",
    "export",
    "generate",
    "ingest_corpus",
    "load_checkpoint",
    "merge_tracks",
    "parse_midi",
    "save_checkpoint",
    "train",
    "write_midi",
    "__version__",
]
