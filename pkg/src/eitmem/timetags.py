"""Time-tag file I/O: the TTG1 binary format and a CSV alternative.

TTG1 layout (little-endian):

    header   magic "TTG1" (4 bytes) | version u16 | reserved u16
    records  channel u8 | padding u8 x 3 | timestamp_ns u64   (12 bytes each)

Channel codes: 0=G, 1=T, 2=R, 3=AS.  Writing is bit-exact and records are
emitted in stream order; reading re-sorts with a warning if a file is not
time-ordered.  CSV files (``channel,timestamp_ns`` with either channel
names or codes) are accepted on ingest.
"""

from __future__ import annotations

import io
import struct
import warnings
from pathlib import Path

import numpy as np

from .errors import TimeTagParseError
from .stats import CHANNEL_AS, CHANNEL_CODES, CHANNEL_NAMES, EventStream

MAGIC = b"TTG1"
VERSION = 1
_HEADER = struct.Struct("<4sHH")
_RECORD_DTYPE = np.dtype(
    [("channel", "u1"), ("pad", "3u1"), ("timestamp_ns", "<u8")]
)


def write_timetag_file(stream: EventStream, path: str | Path) -> None:
    """Serialize a stream to the TTG1 binary format."""
    records = np.zeros(len(stream), dtype=_RECORD_DTYPE)
    records["channel"] = stream.channels
    records["timestamp_ns"] = stream.timestamps_ns
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, 0))
        fh.write(records.tobytes())


def read_timetag_file(path: str | Path) -> EventStream:
    """Parse a TTG1 or CSV time-tag file into a sorted stream."""
    raw = Path(path).read_bytes()
    if raw[:4] == MAGIC:
        return _read_binary(raw)
    return _read_csv(raw)


def _read_binary(raw: bytes) -> EventStream:
    if len(raw) < _HEADER.size:
        raise TimeTagParseError(0, "truncated header")
    magic, version, _reserved = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise TimeTagParseError(0, f"bad magic {magic!r}")
    if version != VERSION:
        raise TimeTagParseError(4, f"unsupported version {version}")
    body = raw[_HEADER.size :]
    n_complete, remainder = divmod(len(body), _RECORD_DTYPE.itemsize)
    if remainder:
        raise TimeTagParseError(
            _HEADER.size + n_complete * _RECORD_DTYPE.itemsize,
            f"truncated record ({remainder} trailing bytes)",
        )
    records = np.frombuffer(body, dtype=_RECORD_DTYPE)
    if np.any(records["channel"] > CHANNEL_AS):
        bad = int(np.argmax(records["channel"] > CHANNEL_AS))
        raise TimeTagParseError(
            _HEADER.size + bad * _RECORD_DTYPE.itemsize,
            f"unknown channel code {int(records['channel'][bad])}",
        )
    ts = records["timestamp_ns"]
    if len(ts) > 1 and np.any(np.diff(ts.astype(np.int64)) < 0):
        warnings.warn("time-tag records were not sorted; re-sorting", stacklevel=2)
    return EventStream(records["channel"].copy(), ts.copy())


def _read_csv(raw: bytes) -> EventStream:
    channels: list[int] = []
    times: list[int] = []
    offset = 0
    text = io.StringIO(raw.decode("utf-8", errors="replace"))
    sorted_ok = True
    last = -1
    for lineno, line in enumerate(text, start=1):
        stripped = line.strip()
        line_offset = offset
        offset += len(line.encode("utf-8", errors="replace"))
        if not stripped or stripped.startswith("#"):
            continue
        if lineno == 1 and stripped.lower().replace(" ", "") == "channel,timestamp_ns":
            continue
        parts = stripped.split(",")
        if len(parts) != 2:
            raise TimeTagParseError(
                line_offset, f"line {lineno}: expected 'channel,timestamp_ns'"
            )
        ch_raw, ts_raw = parts[0].strip(), parts[1].strip()
        if ch_raw.upper() in CHANNEL_CODES:
            ch = CHANNEL_CODES[ch_raw.upper()]
        else:
            try:
                ch = int(ch_raw)
            except ValueError:
                raise TimeTagParseError(
                    line_offset, f"line {lineno}: bad channel {ch_raw!r}"
                ) from None
            if ch not in CHANNEL_NAMES:
                raise TimeTagParseError(
                    line_offset, f"line {lineno}: unknown channel code {ch}"
                )
        try:
            ts = int(ts_raw)
        except ValueError:
            raise TimeTagParseError(
                line_offset, f"line {lineno}: bad timestamp {ts_raw!r}"
            ) from None
        if ts < 0:
            raise TimeTagParseError(line_offset, f"line {lineno}: negative timestamp")
        if ts < last:
            sorted_ok = False
        last = ts
        channels.append(ch)
        times.append(ts)
    if not sorted_ok:
        warnings.warn("time-tag records were not sorted; re-sorting", stacklevel=2)
    return EventStream(
        np.array(channels, dtype=np.uint8), np.array(times, dtype=np.uint64)
    )


def write_timetag_csv(stream: EventStream, path: str | Path) -> None:
    """CSV form of a stream (``channel,timestamp_ns`` with channel names)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("channel,timestamp_ns\n")
        for ch, ts in zip(stream.channels, stream.timestamps_ns):
            fh.write(f"{CHANNEL_NAMES[int(ch)]},{int(ts)}\n")
