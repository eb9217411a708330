"""Standard MIDI File reading and writing.

Supports format 0 and 1 files with PPQN time division. Reading follows
the usual robustness conventions: running status, note-on velocity 0 as
note-off, unknown chunks skipped, unmatched note-ons closed at end of
track. All tracks and channels are merged into a single event stream in
absolute ticks.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass

log = logging.getLogger(__name__)


class MidiError(ValueError):
    """Base class for SMF decoding problems."""


class MalformedHeader(MidiError):
    """Bad chunk magic or header length."""


class TruncatedChunk(MidiError):
    """Chunk or event data runs past the end of the buffer."""


class UnsupportedFormat(MidiError):
    """SMF type 2 or SMPTE time division."""


@dataclass(frozen=True, slots=True)
class NoteEvent:
    """One note with absolute tick timing.

    Velocity is the note-on velocity, always at least 1: a note-on with
    velocity 0 is decoded as a note-off and never stored as an event.
    """

    pitch: int
    onset_tick: int
    offset_tick: int
    velocity: int

    def __post_init__(self):
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch {self.pitch} outside 0..127")
        if self.offset_tick <= self.onset_tick:
            raise ValueError(f"note must end after it starts: {self.onset_tick}..{self.offset_tick}")
        if not 1 <= self.velocity <= 127:
            raise ValueError(f"velocity {self.velocity} outside 1..127")


@dataclass(frozen=True, slots=True)
class QuantGrid:
    """Quantization grid: q steps per bar on the file's tick resolution."""

    steps_per_bar: int
    ticks_per_quarter: int

    def __post_init__(self):
        if self.steps_per_bar < 1:
            raise ValueError(f"steps_per_bar must be >= 1, got {self.steps_per_bar}")
        if self.ticks_per_quarter < 1:
            raise ValueError(f"ticks_per_quarter must be >= 1, got {self.ticks_per_quarter}")

    def ticks_per_step(self) -> int:
        """Exact integer tick length of one step, assuming 4/4 bars."""
        num = 4 * self.ticks_per_quarter
        if num % self.steps_per_bar != 0:
            raise ValueError(
                f"{self.ticks_per_quarter} ticks/quarter not divisible into "
                f"{self.steps_per_bar} steps/bar"
            )
        return num // self.steps_per_bar


def read_varlen(data: bytes, pos: int) -> tuple[int, int]:
    """Decode a variable-length quantity; returns (value, next position)."""
    value = 0
    for _ in range(4):
        if pos >= len(data):
            raise TruncatedChunk("variable-length quantity runs past end of data")
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise MidiError("variable-length quantity longer than 4 bytes")


def write_varlen(value: int) -> bytes:
    if value < 0:
        raise ValueError("variable-length quantity must be non-negative")
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(chunks))


_DATA_BYTES = {0x8: 2, 0x9: 2, 0xA: 2, 0xB: 2, 0xC: 1, 0xD: 1, 0xE: 2}


def _parse_track(data: bytes, warnings: list[str]) -> list[NoteEvent]:
    """Decode one MTrk payload into closed notes.

    Open notes are keyed by (channel, pitch); a note-off closes the oldest
    open onset for its key, a leftover onset is closed at end of track.
    """
    events: list[NoteEvent] = []
    open_notes: dict[tuple[int, int], list[tuple[int, int]]] = {}
    pos = 0
    tick = 0
    status = None
    while pos < len(data):
        delta, pos = read_varlen(data, pos)
        tick += delta
        if pos >= len(data):
            raise TruncatedChunk("event status runs past end of track")
        byte = data[pos]
        if byte == 0xFF:
            status = None
            if pos + 1 >= len(data):
                raise TruncatedChunk("meta event type missing")
            meta_type = data[pos + 1]
            length, pos = read_varlen(data, pos + 2)
            if pos + length > len(data):
                raise TruncatedChunk("meta event data runs past end of track")
            if meta_type == 0x58 and length >= 2:
                numer, denom_pow = data[pos], data[pos + 1]
                if (numer, denom_pow) != (4, 2):
                    warnings.append(f"ignoring non-4/4 time signature {numer}/{2 ** denom_pow}")
            pos += length
            if meta_type == 0x2F:
                break
            continue
        if byte in (0xF0, 0xF7):
            status = None
            length, pos = read_varlen(data, pos + 1)
            if pos + length > len(data):
                raise TruncatedChunk("sysex data runs past end of track")
            pos += length
            continue
        if byte & 0x80:
            status = byte
            pos += 1
        elif status is None:
            raise MidiError(f"data byte 0x{byte:02x} with no running status")
        kind = status >> 4
        channel = status & 0x0F
        n_data = _DATA_BYTES.get(kind)
        if n_data is None:
            raise MidiError(f"unexpected status byte 0x{status:02x}")
        if pos + n_data > len(data):
            raise TruncatedChunk("channel event data runs past end of track")
        d1 = data[pos]
        d2 = data[pos + 1] if n_data == 2 else 0
        pos += n_data
        if kind == 0x9 and d2 > 0:
            open_notes.setdefault((channel, d1), []).append((tick, d2))
        elif kind == 0x8 or (kind == 0x9 and d2 == 0):
            queue = open_notes.get((channel, d1))
            if not queue:
                warnings.append(f"unmatched note-off for pitch {d1} at tick {tick}, skipped")
                continue
            onset, velocity = queue.pop(0)
            events.append(NoteEvent(d1, onset, max(tick, onset + 1), velocity))
    for (channel, pitch), queue in open_notes.items():
        for onset, velocity in queue:
            warnings.append(f"note-on pitch {pitch} never released, closed at end of track")
            events.append(NoteEvent(pitch, onset, max(tick, onset + 1), velocity))
    return events


def parse_midi(data: bytes, steps_per_bar: int = 16) -> tuple[list[NoteEvent], QuantGrid]:
    """Decode an SMF byte string into note events and its timing grid.

    Events are merged across all tracks and channels and sorted by onset.
    Raises MalformedHeader, UnsupportedFormat, or TruncatedChunk on broken
    input; pairing anomalies only log warnings.
    """
    if len(data) < 14:
        raise MalformedHeader("file shorter than an SMF header")
    if data[:4] != b"MThd":
        raise MalformedHeader(f"bad header magic {data[:4]!r}")
    (header_len,) = struct.unpack(">I", data[4:8])
    if header_len != 6:
        raise MalformedHeader(f"header length {header_len}, expected 6")
    fmt, ntrks, division = struct.unpack(">HHH", data[8:14])
    if fmt == 2:
        raise UnsupportedFormat("SMF type 2 is not supported")
    if fmt not in (0, 1):
        raise UnsupportedFormat(f"unknown SMF type {fmt}")
    if division & 0x8000:
        raise UnsupportedFormat("SMPTE time division is not supported")
    if division == 0:
        raise MalformedHeader("time division of 0 ticks per quarter")

    warnings: list[str] = []
    events: list[NoteEvent] = []
    pos = 14
    tracks_seen = 0
    while pos < len(data) and tracks_seen < ntrks:
        if pos + 8 > len(data):
            raise TruncatedChunk("chunk header runs past end of file")
        magic = data[pos : pos + 4]
        (length,) = struct.unpack(">I", data[pos + 4 : pos + 8])
        pos += 8
        if pos + length > len(data):
            raise TruncatedChunk(f"{magic!r} chunk of {length} bytes runs past end of file")
        if magic == b"MTrk":
            events.extend(_parse_track(data[pos : pos + length], warnings))
            tracks_seen += 1
        else:
            warnings.append(f"skipping unknown chunk {magic!r}")
        pos += length
    if tracks_seen < ntrks:
        warnings.append(f"header declared {ntrks} tracks, found {tracks_seen}")
    for message in warnings:
        log.warning("%s", message)
    events.sort(key=lambda e: (e.onset_tick, e.pitch, e.offset_tick, e.velocity))
    return events, QuantGrid(steps_per_bar, division)


def write_midi(events: list[NoteEvent], grid: QuantGrid, tempo_bpm: float = 120.0) -> bytes:
    """Encode note events as a single-track format 0 file.

    All notes land on channel 0; note-offs are emitted as velocity-0
    note-ons so the whole track shares one running status. At equal ticks,
    offs precede ons so back-to-back repeats re-attack cleanly.
    """
    if tempo_bpm <= 0:
        raise ValueError(f"tempo must be positive, got {tempo_bpm}")
    moments: list[tuple[int, int, int, int]] = []  # (tick, off_first, pitch, velocity)
    for ev in events:
        moments.append((ev.onset_tick, 1, ev.pitch, ev.velocity))
        moments.append((ev.offset_tick, 0, ev.pitch, 0))
    moments.sort(key=lambda m: (m[0], m[1], m[2]))

    track = bytearray()
    tempo = round(60_000_000 / tempo_bpm)
    track += write_varlen(0) + bytes([0xFF, 0x51, 0x03]) + tempo.to_bytes(3, "big")
    track += write_varlen(0) + bytes([0xFF, 0x58, 0x04, 0x04, 0x02, 0x18, 0x08])
    last_tick = 0
    status_written = False
    for tick, _, pitch, velocity in moments:
        track += write_varlen(tick - last_tick)
        if not status_written:
            track.append(0x90)
            status_written = True
        track += bytes([pitch, velocity])
        last_tick = tick
    track += write_varlen(0) + bytes([0xFF, 0x2F, 0x00])

    out = bytearray()
    out += b"MThd" + struct.pack(">IHHH", 6, 0, 1, grid.ticks_per_quarter)
    out += b"MTrk" + struct.pack(">I", len(track)) + bytes(track)
    return bytes(out)
