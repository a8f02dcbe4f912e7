"""Shared test utilities: deterministic corpora, random MIDI files, and the
finite-difference gradient oracle."""

from __future__ import annotations

import random
from pathlib import Path

import numpy as np

from notegen.midi_codec import (
    END_OF_TRACK,
    MidiEvent,
    MidiFile,
    NoteOff,
    NoteOn,
    OtherChannel,
    OtherMeta,
    TempoChange,
    write_midi,
)
from notegen.note_matrix import NoteMatrix, NoteRow, matrix_to_midi

# --- deterministic corpora -------------------------------------------------

_MELODY_PITCHES = [60, 64, 67, 72, 67, 64, 62, 65, 69, 74, 69, 65]
_MELODY_VELOCITIES = [70, 85, 100, 115, 100, 85, 75, 90, 105, 120, 105, 90]
_MELODY_DT = [120, 60, 60, 120, 60, 60, 120, 60, 60, 120, 60, 60]


def make_melody_matrix(n_notes: int = 60, division: int = 480) -> NoteMatrix:
    """A strictly periodic melody: continuation is fully determined by any
    window, which is what the memorization tests rely on."""
    rows = []
    for i in range(n_notes):
        k = i % len(_MELODY_PITCHES)
        dt = 0 if i == 0 else _MELODY_DT[k]
        rows.append(NoteRow(_MELODY_PITCHES[k], _MELODY_VELOCITIES[k], dt))
    return NoteMatrix(rows=rows, division=division)


_PROGRESSIONS = [
    # (root offsets, chord intervals) per bar, looped
    [(0, (0, 4, 7)), (7, (0, 4, 7)), (9, (0, 3, 7)), (5, (0, 4, 7))],
    [(0, (0, 3, 7)), (8, (0, 4, 7)), (3, (0, 4, 7)), (10, (0, 4, 7))],
    [(0, (0, 4, 7)), (5, (0, 4, 7)), (7, (0, 4, 7)), (0, (0, 4, 7))],
]


def make_pop_matrices(bars: int = 24, division: int = 480) -> list[NoteMatrix]:
    """Three synthetic pop-piano pieces: block chords on the bar, a cycling
    melody on top, patterned velocities. Same-tick chord notes ascend in
    pitch so the MIDI round trip is exact."""
    matrices = []
    for song, (base, progression) in enumerate(zip((48, 50, 45), _PROGRESSIONS)):
        rows = []
        for bar in range(bars):
            root, intervals = progression[bar % len(progression)]
            chord = sorted(base + root + iv for iv in intervals)
            for j, pitch in enumerate(chord):
                dt = (240 if rows else 0) if j == 0 else 0
                rows.append(NoteRow(pitch, 56 + 8 * j, dt))
            for j in range(4):
                melody = chord[j % 3] + 12 + (j % 2) * 7
                velocity = 72 + 12 * (j % 3) + 4 * (bar % 2)
                rows.append(NoteRow(melody, velocity, 120))
        matrices.append(NoteMatrix(rows=rows, division=division))
    return matrices


def write_corpus(corpus_dir: Path, matrices: list[NoteMatrix],
                 note_duration: int = 240) -> list[Path]:
    corpus_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for idx, matrix in enumerate(matrices):
        midi = matrix_to_midi(matrix, matrix.division, note_duration)
        path = corpus_dir / f"{idx:02d}.mid"
        path.write_bytes(write_midi(midi))
        paths.append(path)
    return paths


# --- random valid MIDI files -----------------------------------------------

def random_midi_file(rnd: random.Random) -> MidiFile:
    """A random MidiFile already in the parser's normalized form, so
    parse(write(f)) must reproduce it exactly."""
    fmt = rnd.choice((0, 1))
    n_tracks = 1 if fmt == 0 else rnd.randint(1, 4)
    division = rnd.randint(1, 0x7FFF)
    tracks = []
    for _ in range(n_tracks):
        events = []
        for _ in range(rnd.randint(0, 30)):
            delta = rnd.choice((0, rnd.randint(0, 1000), rnd.randint(0, 2**28 - 1)))
            roll = rnd.random()
            if roll < 0.45:
                kind = NoteOn(rnd.randint(0, 15), rnd.randint(0, 127),
                              rnd.randint(1, 127))
            elif roll < 0.7:
                kind = NoteOff(rnd.randint(0, 15), rnd.randint(0, 127),
                               rnd.randint(0, 127))
            elif roll < 0.8:
                kind = TempoChange(rnd.randint(1, 0xFFFFFF))
            elif roll < 0.9:
                # 0x2F and 0x51 have dedicated representations
                meta_type = rnd.choice([t for t in range(0x80)
                                        if t not in (0x2F, 0x51)])
                payload = bytes(rnd.randrange(256)
                                for _ in range(rnd.randint(0, 8)))
                kind = OtherMeta(meta_type, payload)
            else:
                status = rnd.choice((0xA0, 0xB3, 0xC5, 0xD9, 0xEF))
                n_data = 1 if (status >> 4) in (0xC, 0xD) else 2
                kind = OtherChannel(status,
                                    bytes(rnd.randrange(128)
                                          for _ in range(n_data)))
            events.append(MidiEvent(delta, kind))
        events.append(MidiEvent(rnd.randint(0, 1000), END_OF_TRACK))
        tracks.append(events)
    return MidiFile(format=fmt, division=division, tracks=tracks)


# --- finite differences ----------------------------------------------------

def numeric_gradient(loss_fn, tensor: np.ndarray,
                     eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of loss_fn() w.r.t. each tensor entry.

    Perturbs the tensor in place and restores it; loss_fn must read the
    tensor on every call.
    """
    grad = np.zeros_like(tensor)
    flat = tensor.ravel()
    grad_flat = grad.ravel()
    for idx in range(flat.size):
        saved = flat[idx]
        flat[idx] = saved + eps
        loss_plus = loss_fn()
        flat[idx] = saved - eps
        loss_minus = loss_fn()
        flat[idx] = saved
        grad_flat[idx] = (loss_plus - loss_minus) / (2.0 * eps)
    return grad


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray,
                  floor: float = 1e-2) -> float:
    """Guarded relative error: exact relative error for entries above the
    floor, absolute error scaled by the floor below it (keeps finite-
    difference noise on near-zero gradients from dominating)."""
    diff = np.abs(analytic - numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float((diff / denom).max()) if diff.size else 0.0
