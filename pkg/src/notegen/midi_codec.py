"""Standard MIDI File reader/writer (formats 0 and 1).

Covers exactly what the pipeline needs: note events in and out, tempo, and
faithful preservation of everything else as opaque payloads. Running status
is accepted on read; the writer always emits explicit status bytes. SMPTE
time divisions and format-2 files are rejected.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Union

from .errors import (
    BadEventStatus,
    BadHeader,
    InvariantViolation,
    SmpteDivisionUnsupported,
    TruncatedChunk,
    TruncatedInput,
    UnsupportedFormat,
    UnterminatedVlq,
    ValueTooLarge,
)

VLQ_MAX = (1 << 28) - 1
DEFAULT_TEMPO = 500_000  # microseconds per quarter note
META_END_OF_TRACK = 0x2F
META_TEMPO = 0x51

# data byte counts per channel-message high nibble
_CHANNEL_DATA_LEN = {0x8: 2, 0x9: 2, 0xA: 2, 0xB: 2, 0xC: 1, 0xD: 1, 0xE: 2}


@dataclass(frozen=True)
class NoteOn:
    channel: int
    pitch: int
    velocity: int


@dataclass(frozen=True)
class NoteOff:
    channel: int
    pitch: int
    velocity: int


@dataclass(frozen=True)
class TempoChange:
    microseconds_per_quarter: int


@dataclass(frozen=True)
class OtherMeta:
    meta_type: int
    data: bytes


@dataclass(frozen=True)
class OtherChannel:
    status: int
    data: bytes


EventKind = Union[NoteOn, NoteOff, TempoChange, OtherMeta, OtherChannel]

END_OF_TRACK = OtherMeta(META_END_OF_TRACK, b"")


@dataclass(frozen=True)
class MidiEvent:
    delta_ticks: int
    kind: EventKind


@dataclass
class MidiFile:
    format: int
    division: int  # ticks per quarter note
    tracks: list[list[MidiEvent]] = field(default_factory=list)


@dataclass(frozen=True, order=True)
class AbsoluteNoteEvent:
    tick: int
    pitch: int
    velocity: int


def decode_vlq(data: bytes, offset: int = 0) -> tuple[int, int]:
    """Decode a variable-length quantity; returns (value, bytes consumed)."""
    value = 0
    for i in range(4):
        if offset + i >= len(data):
            raise TruncatedInput("input ended inside a variable-length quantity")
        byte = data[offset + i]
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, i + 1
    raise UnterminatedVlq("no terminator within 4 VLQ bytes")


def encode_vlq(value: int) -> bytes:
    """Minimal-length variable-length encoding of value < 2**28."""
    if value < 0 or value > VLQ_MAX:
        raise ValueTooLarge(f"value {value} does not fit in a 4-byte VLQ")
    groups = [value & 0x7F]
    value >>= 7
    while value:
        groups.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(groups))


class _Reader:
    """Bounded cursor over a byte buffer; never reads past its limit."""

    def __init__(self, data: bytes, start: int, end: int):
        self.data = data
        self.pos = start
        self.end = end

    def remaining(self) -> int:
        return self.end - self.pos

    def take(self, n: int) -> bytes:
        if self.pos + n > self.end:
            raise TruncatedChunk("chunk body shorter than its declared length")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def byte(self) -> int:
        return self.take(1)[0]

    def vlq(self) -> int:
        value = 0
        for _ in range(4):
            if self.pos >= self.end:
                raise TruncatedChunk("chunk ended inside a variable-length quantity")
            byte = self.data[self.pos]
            self.pos += 1
            value = (value << 7) | (byte & 0x7F)
            if not byte & 0x80:
                return value
        raise UnterminatedVlq("no terminator within 4 VLQ bytes")


def _data_byte(reader: _Reader) -> int:
    byte = reader.byte()
    if byte & 0x80:
        raise BadEventStatus(f"expected data byte, got status 0x{byte:02X}")
    return byte


def _parse_track(reader: _Reader) -> list[MidiEvent]:
    events: list[MidiEvent] = []
    running_status: int | None = None
    while True:
        if reader.remaining() == 0:
            raise TruncatedChunk("track ended without an End-of-Track event")
        delta = reader.vlq()
        status = reader.byte()
        if status < 0x80:
            if running_status is None:
                raise BadEventStatus("data byte with no running status")
            reader.pos -= 1
            status = running_status

        if status == 0xFF:
            running_status = None
            meta_type = reader.byte()
            length = reader.vlq()
            payload = bytes(reader.take(length))
            if meta_type == META_END_OF_TRACK:
                events.append(MidiEvent(delta, END_OF_TRACK))
                return events
            if meta_type == META_TEMPO:
                if length != 3:
                    raise BadEventStatus(f"tempo meta with length {length}")
                mpq = int.from_bytes(payload, "big")
                if mpq == 0:
                    raise BadEventStatus("tempo of zero microseconds per quarter")
                events.append(MidiEvent(delta, TempoChange(mpq)))
            else:
                events.append(MidiEvent(delta, OtherMeta(meta_type, payload)))
        elif status in (0xF0, 0xF7):
            running_status = None
            length = reader.vlq()
            payload = bytes(reader.take(length))
            events.append(MidiEvent(delta, OtherChannel(status, payload)))
        elif status >= 0xF0:
            raise BadEventStatus(f"system message 0x{status:02X} in a track chunk")
        else:
            running_status = status
            kind_nibble = status >> 4
            channel = status & 0x0F
            n_data = _CHANNEL_DATA_LEN[kind_nibble]
            if kind_nibble == 0x9:
                pitch = _data_byte(reader)
                velocity = _data_byte(reader)
                if velocity == 0:
                    events.append(MidiEvent(delta, NoteOff(channel, pitch, 0)))
                else:
                    events.append(MidiEvent(delta, NoteOn(channel, pitch, velocity)))
            elif kind_nibble == 0x8:
                pitch = _data_byte(reader)
                velocity = _data_byte(reader)
                events.append(MidiEvent(delta, NoteOff(channel, pitch, velocity)))
            else:
                payload = bytes(_data_byte(reader) for _ in range(n_data))
                events.append(MidiEvent(delta, OtherChannel(status, payload)))


def parse_midi(data: bytes) -> MidiFile:
    """Parse Standard MIDI File bytes into a MidiFile."""
    if len(data) < 4 or data[:4] != b"MThd":
        raise BadHeader("input does not start with an MThd chunk")
    if len(data) < 14:
        raise BadHeader("MThd chunk truncated")
    header_len = struct.unpack(">I", data[4:8])[0]
    if header_len < 6:
        raise BadHeader(f"MThd payload length {header_len} < 6")
    fmt, n_tracks, division = struct.unpack(">HHH", data[8:14])
    if fmt not in (0, 1):
        raise UnsupportedFormat(f"SMF format {fmt} not supported")
    if division & 0x8000:
        raise SmpteDivisionUnsupported("SMPTE time division not supported")
    if division == 0:
        raise BadHeader("time division of zero")
    if fmt == 0 and n_tracks != 1:
        raise BadHeader(f"format 0 declares {n_tracks} tracks")

    pos = 8 + header_len
    tracks: list[list[MidiEvent]] = []
    while len(tracks) < n_tracks:
        if pos + 8 > len(data):
            raise TruncatedChunk("file ended before all declared tracks")
        tag = data[pos : pos + 4]
        length = struct.unpack(">I", data[pos + 4 : pos + 8])[0]
        body_start = pos + 8
        if body_start + length > len(data):
            raise TruncatedChunk(f"{tag!r} chunk overruns the file")
        if tag == b"MTrk":
            # events after End-of-Track within the declared length are padding
            tracks.append(_parse_track(_Reader(data, body_start, body_start + length)))
        pos = body_start + length
    return MidiFile(format=fmt, division=division, tracks=tracks)


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise InvariantViolation(message)


def _encode_event(event: MidiEvent, out: bytearray) -> None:
    _require(event.delta_ticks >= 0, f"negative delta {event.delta_ticks}")
    out += encode_vlq(event.delta_ticks)
    kind = event.kind
    if isinstance(kind, (NoteOn, NoteOff)):
        _require(0 <= kind.channel <= 15, f"channel {kind.channel} out of range")
        _require(0 <= kind.pitch <= 127, f"pitch {kind.pitch} out of range")
        _require(0 <= kind.velocity <= 127, f"velocity {kind.velocity} out of range")
        base = 0x90 if isinstance(kind, NoteOn) else 0x80
        out += bytes((base | kind.channel, kind.pitch, kind.velocity))
    elif isinstance(kind, TempoChange):
        mpq = kind.microseconds_per_quarter
        _require(0 < mpq <= 0xFFFFFF, f"tempo {mpq} does not fit in 3 bytes")
        out += bytes((0xFF, META_TEMPO, 3)) + mpq.to_bytes(3, "big")
    elif isinstance(kind, OtherMeta):
        _require(0 <= kind.meta_type <= 0x7F, f"meta type {kind.meta_type} out of range")
        out += bytes((0xFF, kind.meta_type)) + encode_vlq(len(kind.data)) + kind.data
    elif isinstance(kind, OtherChannel):
        status = kind.status
        if status in (0xF0, 0xF7):
            out += bytes((status,)) + encode_vlq(len(kind.data)) + kind.data
        else:
            _require(0x80 <= status < 0xF0, f"bad status byte 0x{status:02X}")
            expected = _CHANNEL_DATA_LEN[status >> 4]
            _require(len(kind.data) == expected,
                     f"status 0x{status:02X} needs {expected} data bytes")
            _require(all(b < 0x80 for b in kind.data), "data byte with high bit set")
            out += bytes((status,)) + kind.data
    else:
        raise InvariantViolation(f"unknown event kind {kind!r}")


def write_midi(midi: MidiFile) -> bytes:
    """Serialize a MidiFile; never uses running status."""
    _require(midi.format in (0, 1), f"format {midi.format} not writable")
    _require(0 < midi.division <= 0x7FFF, f"division {midi.division} out of range")
    _require(midi.format != 0 or len(midi.tracks) == 1,
             "format 0 requires exactly one track")
    out = bytearray(b"MThd")
    out += struct.pack(">IHHH", 6, midi.format, len(midi.tracks), midi.division)
    for track in midi.tracks:
        _require(bool(track) and track[-1].kind == END_OF_TRACK,
                 "track does not end with End-of-Track")
        body = bytearray()
        for event in track:
            _encode_event(event, body)
        out += b"MTrk" + struct.pack(">I", len(body)) + body
    return bytes(out)


def merge_tracks(midi: MidiFile) -> tuple[list[AbsoluteNoteEvent], int]:
    """Flatten all tracks into note onsets sorted by (tick, pitch).

    Returns the onset list plus the tempo in effect at the first onset
    (DEFAULT_TEMPO when no TempoChange precedes it).
    """
    notes: list[AbsoluteNoteEvent] = []
    tempos: list[tuple[int, int]] = []
    for track in midi.tracks:
        tick = 0
        for event in track:
            tick += event.delta_ticks
            kind = event.kind
            if isinstance(kind, NoteOn) and kind.velocity > 0:
                notes.append(AbsoluteNoteEvent(tick, kind.pitch, kind.velocity))
            elif isinstance(kind, TempoChange):
                tempos.append((tick, kind.microseconds_per_quarter))
    notes.sort(key=lambda n: (n.tick, n.pitch))
    tempo = DEFAULT_TEMPO
    if notes:
        first_tick = notes[0].tick
        tempos.sort(key=lambda t: t[0])
        for tick, mpq in tempos:
            if tick <= first_tick:
                tempo = mpq
            else:
                break
    return notes, tempo
