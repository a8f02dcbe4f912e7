"""Autoregressive note generation from a trained checkpoint.

Generation is deterministic: the linear-head regression output is taken as
the next row (clamped into [0, 1]), appended, and the window slides by one.
The seed window comes either from a MIDI file's opening notes or from
uniform random rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SeedTooShort
from .midi_codec import MidiFile, merge_tracks, parse_midi, write_midi
from .note_matrix import (
    NoteMatrix,
    NoteRow,
    events_to_matrix,
    matrix_to_midi,
    scale,
    unscale,
)
from .numerics import Rng
from .model import model_forward
from .trainer import Checkpoint, load_checkpoint


@dataclass
class GenerateConfig:
    checkpoint_path: str
    output_path: str
    length: int = 100
    seed_midi: str | None = None  # None: uniform random seed window
    rng_seed: int = 0
    note_duration_ticks: int | None = None  # None: division // 2

    def validate(self) -> None:
        if self.length < 1:
            raise ValueError(f"length must be >= 1, got {self.length}")
        if self.note_duration_ticks is not None and self.note_duration_ticks < 1:
            raise ValueError("note duration must be >= 1 tick")


def _seed_window(config: GenerateConfig, checkpoint: Checkpoint) -> np.ndarray:
    window = checkpoint.window
    if config.seed_midi is None:
        return Rng(config.rng_seed).uniform((window, 3))
    midi = parse_midi(Path(config.seed_midi).read_bytes())
    events, _ = merge_tracks(midi)
    matrix = events_to_matrix(events, midi.division)
    if len(matrix.rows) < window:
        raise SeedTooShort(
            f"seed MIDI has {len(matrix.rows)} notes, need >= {window}")
    return scale(matrix, checkpoint.scaling)[:window]


def generate(config: GenerateConfig) -> NoteMatrix:
    """Predict `length` new rows, sliding the window one row at a time."""
    config.validate()
    checkpoint = load_checkpoint(config.checkpoint_path)
    params = checkpoint.model_params()
    window = _seed_window(config, checkpoint)

    generated = []
    for _ in range(config.length):
        prediction, _ = model_forward(params, window[None, :, :], "infer")
        row = np.clip(prediction[0], 0.0, 1.0)
        generated.append(row)
        window = np.concatenate([window[1:], row[None, :]])

    rows = [unscale(row, checkpoint.scaling) for row in generated]
    # the exported file has no note before the first one, so its gap is 0
    rows[0] = NoteRow(rows[0].pitch, rows[0].velocity, 0)
    return NoteMatrix(rows=rows, division=checkpoint.division)


def export(matrix: NoteMatrix, config: GenerateConfig) -> MidiFile:
    """Write the generated matrix as a format-0 MIDI file at the output path."""
    duration = config.note_duration_ticks
    if duration is None:
        duration = max(1, matrix.division // 2)
    midi = matrix_to_midi(matrix, matrix.division, duration)
    Path(config.output_path).write_bytes(write_midi(midi))
    return midi
