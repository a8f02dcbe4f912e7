"""Note-matrix encoding: note events <-> scaled (0,1) training tensors.

A note matrix is the per-song list of (pitch, velocity, inter-onset ticks)
rows. Pitch and velocity scale by their fixed 0-127 range; the time column
scales by the corpus-wide maximum inter-onset gap, clamped at 1.0. Both maps
are exactly invertible for in-range rows, which the generation path relies
on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyCorpus, InvariantViolation
from .midi_codec import (
    DEFAULT_TEMPO,
    END_OF_TRACK,
    AbsoluteNoteEvent,
    MidiEvent,
    MidiFile,
    NoteOff,
    NoteOn,
    TempoChange,
)
from .numerics import Rng, Tensor, as_tensor

PITCH_RANGE = 127
VELOCITY_RANGE = 127
ROW_WIDTH = 3


@dataclass(frozen=True)
class NoteRow:
    pitch: int      # 0-127
    velocity: int   # 1-127
    dt_ticks: int   # ticks since previous onset; 0 for the first row


@dataclass
class NoteMatrix:
    rows: list[NoteRow] = field(default_factory=list)
    division: int = 480


@dataclass(frozen=True)
class ScalingParams:
    dt_max_ticks: int
    pitch_divisor: int = PITCH_RANGE
    velocity_divisor: int = VELOCITY_RANGE


@dataclass
class Sample:
    input: Tensor   # [window, 3]
    target: Tensor  # [3]


@dataclass
class Batch:
    inputs: Tensor   # [batch, window, 3]
    targets: Tensor  # [batch, 3]


def events_to_matrix(events: list[AbsoluteNoteEvent], division: int) -> NoteMatrix:
    """Difference absolute onset ticks into per-row gaps."""
    rows = []
    prev_tick = None
    for ev in events:
        dt = 0 if prev_tick is None else ev.tick - prev_tick
        rows.append(NoteRow(ev.pitch, ev.velocity, dt))
        prev_tick = ev.tick
    return NoteMatrix(rows=rows, division=division)


def fit_scaling(matrices: list[NoteMatrix]) -> ScalingParams:
    """Scan the corpus for the largest inter-onset gap (floored at 1 tick)."""
    dt_max = 0
    seen_rows = False
    for matrix in matrices:
        for row in matrix.rows:
            seen_rows = True
            if row.dt_ticks > dt_max:
                dt_max = row.dt_ticks
    if not seen_rows:
        raise EmptyCorpus("no note rows in corpus")
    return ScalingParams(dt_max_ticks=max(dt_max, 1))


def scale(matrix: NoteMatrix, params: ScalingParams) -> Tensor:
    """Map a note matrix into a [T, 3] tensor with entries in [0, 1]."""
    if not matrix.rows:
        return np.zeros((0, ROW_WIDTH))
    raw = as_tensor([[r.pitch, r.velocity, r.dt_ticks] for r in matrix.rows])
    out = np.empty_like(raw)
    out[:, 0] = raw[:, 0] / params.pitch_divisor
    out[:, 1] = raw[:, 1] / params.velocity_divisor
    out[:, 2] = np.minimum(raw[:, 2], params.dt_max_ticks) / params.dt_max_ticks
    return out


def unscale(row: Tensor, params: ScalingParams) -> NoteRow:
    """Invert `scale` for one row; out-of-range inputs are clamped first."""
    x = np.clip(np.asarray(row, dtype=np.float64), 0.0, 1.0)
    pitch = int(np.rint(x[0] * params.pitch_divisor))
    velocity = max(1, int(np.rint(x[1] * params.velocity_divisor)))
    dt = int(np.rint(x[2] * params.dt_max_ticks))
    return NoteRow(pitch=pitch, velocity=velocity, dt_ticks=dt)


def make_samples(scaled: Tensor, window: int) -> list[Sample]:
    """Slide a window over the rows; each sample predicts the next row."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    n_rows = scaled.shape[0]
    return [
        Sample(input=scaled[i : i + window], target=scaled[i + window])
        for i in range(max(0, n_rows - window))
    ]


def make_batches(samples: list[Sample], batch_size: int, rng: Rng) -> list[Batch]:
    """Shuffle samples with the given RNG and stack them into batches.

    The final batch is kept even when short. With the same RNG state the
    batch order is identical, which the resume path depends on.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = rng.permutation(len(samples))
    batches = []
    for start in range(0, len(samples), batch_size):
        chunk = [samples[i] for i in order[start : start + batch_size]]
        inputs = np.stack([s.input for s in chunk])
        targets = np.stack([s.target for s in chunk])
        batches.append(Batch(inputs=inputs, targets=targets))
    return batches


def matrix_to_midi(matrix: NoteMatrix, division: int,
                   note_duration_ticks: int) -> MidiFile:
    """Lay a note matrix out as a single-track format-0 file.

    Each row becomes a NoteOn at its cumulative onset tick and a NoteOff
    note_duration_ticks later.
    """
    if note_duration_ticks < 1:
        raise InvariantViolation(f"note duration {note_duration_ticks} < 1 tick")
    for row in matrix.rows:
        if not (0 <= row.pitch <= 127 and 1 <= row.velocity <= 127
                and row.dt_ticks >= 0):
            raise InvariantViolation(f"row out of range: {row}")

    # (tick, off_first, seq) ordering keeps NoteOff ahead of a same-tick
    # NoteOn so back-to-back repeats of a pitch survive playback
    timeline: list[tuple[int, int, int, NoteOn | NoteOff]] = []
    seq = 0
    tick = 0
    for row in matrix.rows:
        tick += row.dt_ticks
        timeline.append((tick, 1, seq, NoteOn(0, row.pitch, row.velocity)))
        timeline.append((tick + note_duration_ticks, 0, seq,
                         NoteOff(0, row.pitch, 0)))
        seq += 1
    timeline.sort(key=lambda item: item[:3])

    events = [MidiEvent(0, TempoChange(DEFAULT_TEMPO))]
    prev_tick = 0
    for abs_tick, _, _, kind in timeline:
        events.append(MidiEvent(abs_tick - prev_tick, kind))
        prev_tick = abs_tick
    events.append(MidiEvent(0, END_OF_TRACK))
    return MidiFile(format=0, division=division, tracks=[events])
