"""
EDF / EDF+ header and signal decoding

The header is 256 bytes of fixed-width ASCII fields followed by 256 bytes per
signal, stored field-major (all labels, then all transducers, ...). Data
records hold each signal's samples as 16-bit little-endian two's complement
integers, signals interleaved record by record.
"""

import logging
from dataclasses import dataclass, field
from datetime import datetime
from typing import List

import numpy as np

from .errors import ChannelNotFound, MalformedField, TruncatedHeader, TruncatedRecords

logger = logging.getLogger(__name__)

FIXED_HEADER_BYTES = 256
SIGNAL_HEADER_BYTES = 256
UNKNOWN_RECORDS = -1
ANNOTATION_LABEL = "EDF Annotations"

# (field name, width) in on-disk order
_SIGNAL_FIELDS = [
    ("label", 16),
    ("transducer", 80),
    ("physical_dim", 8),
    ("physical_min", 8),
    ("physical_max", 8),
    ("digital_min", 8),
    ("digital_max", 8),
    ("prefilter", 80),
    ("samples_per_record", 8),
    ("reserved", 32),
]


@dataclass(frozen=True)
class SignalSpec:
    """Per-signal header block"""

    label: str
    transducer: str
    physical_dim: str
    physical_min: float
    physical_max: float
    digital_min: int
    digital_max: int
    prefilter: str
    samples_per_record: int
    reserved: str = ""

    @property
    def is_annotation(self) -> bool:
        return self.label == ANNOTATION_LABEL

    def to_physical(self, digital: np.ndarray) -> np.ndarray:
        """Affine map from digital counts to physical units"""
        gain = (self.physical_max - self.physical_min) / (
            self.digital_max - self.digital_min
        )
        return self.physical_min + (digital.astype(np.float64) - self.digital_min) * gain


@dataclass(frozen=True)
class EdfHeader:
    """Decoded EDF/EDF+ header"""

    version: str
    patient_id: str
    recording_id: str
    start_datetime: datetime
    header_bytes: int
    reserved: str
    num_records: int
    record_duration_s: float
    num_signals: int
    signals: List[SignalSpec] = field(default_factory=list)

    @property
    def labels(self) -> List[str]:
        return [s.label for s in self.signals]

    @property
    def record_bytes(self) -> int:
        return 2 * sum(s.samples_per_record for s in self.signals)

    @property
    def is_edf_plus(self) -> bool:
        return self.reserved.startswith("EDF+")

    def sampling_rate(self, label: str) -> float:
        """Samples per second of the named signal"""
        spec = self.signals[self.signal_index(label)]
        # zero-length records only occur in annotation-only files
        if self.record_duration_s == 0:
            raise MalformedField(f"Signal '{label}' has no sampling rate: record duration is 0")
        return spec.samples_per_record / self.record_duration_s

    def signal_index(self, label: str) -> int:
        """Index of the signal whose label matches exactly"""
        matches = [i for i, s in enumerate(self.signals) if s.label == label]
        if len(matches) != 1:
            raise ChannelNotFound(
                f"Channel '{label}' not found exactly once. Available: {', '.join(self.labels)}"
            )
        return matches[0]

    def to_bytes(self) -> bytes:
        """Serialize back to the fixed-width on-disk layout"""
        parts = [
            _pad(self.version, 8),
            _pad(self.patient_id, 80),
            _pad(self.recording_id, 80),
            _pad(self.start_datetime.strftime("%d.%m.%y"), 8),
            _pad(self.start_datetime.strftime("%H.%M.%S"), 8),
            _pad(str(self.header_bytes), 8),
            _pad(self.reserved, 44),
            _pad(str(self.num_records), 8),
            _pad(_format_number(self.record_duration_s), 8),
            _pad(str(self.num_signals), 4),
        ]
        for name, width in _SIGNAL_FIELDS:
            for spec in self.signals:
                value = getattr(spec, name)
                if isinstance(value, float):
                    value = _format_number(value)
                parts.append(_pad(str(value), width))
        return b"".join(parts)


def _pad(text: str, width: int) -> bytes:
    raw = text.encode("latin-1")
    if len(raw) > width:
        raise MalformedField(f"Value '{text}' does not fit in a {width}-byte field")
    return raw.ljust(width, b" ")


def _format_number(value: float) -> str:
    """Shortest text for a real that fits an 8-byte field"""
    if float(value).is_integer():
        return str(int(value))
    text = repr(float(value))
    if len(text) > 8:
        text = f"{value:.8g}"[:8]
    return text


def _text(data: bytes, start: int, width: int) -> str:
    return data[start:start + width].decode("latin-1").rstrip(" \x00")


def _parse_int(text: str, name: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise MalformedField(f"Field '{name}' is not an integer: '{text}'")


def _parse_float(text: str, name: str) -> float:
    try:
        value = float(text.strip())
    except ValueError:
        raise MalformedField(f"Field '{name}' is not a number: '{text}'")
    if not np.isfinite(value):
        raise MalformedField(f"Field '{name}' is not finite: '{text}'")
    return value


def _parse_datetime(date_text: str, time_text: str) -> datetime:
    try:
        day, month, year = (int(part) for part in date_text.split("."))
        hour, minute, second = (int(part) for part in time_text.split("."))
        # EDF clipping date: yy >= 85 is 19yy
        year += 1900 if year >= 85 else 2000
        return datetime(year, month, day, hour, minute, second)
    except ValueError:
        raise MalformedField(
            f"Invalid start date/time fields: '{date_text}' '{time_text}'"
        )


def parse_edf_header(data: bytes) -> EdfHeader:
    """
    Decode an EDF/EDF+ header

    Args:
        data: File bytes, at least the full header

    Returns:
        The decoded header with per-signal specs in signal order
    """
    if len(data) < FIXED_HEADER_BYTES:
        raise TruncatedHeader(
            f"Header needs at least {FIXED_HEADER_BYTES} bytes, got {len(data)}"
        )

    num_signals = _parse_int(_text(data, 252, 4), "num_signals")
    if num_signals < 1:
        raise MalformedField(f"num_signals must be positive, got {num_signals}")
    header_bytes = _parse_int(_text(data, 184, 8), "header_bytes")
    expected = FIXED_HEADER_BYTES + SIGNAL_HEADER_BYTES * num_signals
    if header_bytes != expected:
        raise MalformedField(
            f"header_bytes is {header_bytes}, expected {expected} for {num_signals} signals"
        )
    if len(data) < header_bytes:
        raise TruncatedHeader(f"Header needs {header_bytes} bytes, got {len(data)}")

    num_records = _parse_int(_text(data, 236, 8), "num_records")
    if num_records < 1 and num_records != UNKNOWN_RECORDS:
        raise MalformedField(f"num_records must be >= 1 or -1, got {num_records}")
    record_duration_s = _parse_float(_text(data, 244, 8), "record_duration_s")
    if record_duration_s < 0:
        raise MalformedField(f"record duration must be >= 0, got {record_duration_s}")

    columns = {}
    offset = FIXED_HEADER_BYTES
    for name, width in _SIGNAL_FIELDS:
        columns[name] = [
            _text(data, offset + i * width, width) for i in range(num_signals)
        ]
        offset += width * num_signals

    signals = []
    for i in range(num_signals):
        spec = SignalSpec(
            label=columns["label"][i],
            transducer=columns["transducer"][i],
            physical_dim=columns["physical_dim"][i],
            physical_min=_parse_float(columns["physical_min"][i], "physical_min"),
            physical_max=_parse_float(columns["physical_max"][i], "physical_max"),
            digital_min=_parse_int(columns["digital_min"][i], "digital_min"),
            digital_max=_parse_int(columns["digital_max"][i], "digital_max"),
            prefilter=columns["prefilter"][i],
            samples_per_record=_parse_int(
                columns["samples_per_record"][i], "samples_per_record"
            ),
            reserved=columns["reserved"][i],
        )
        if spec.digital_min >= spec.digital_max:
            raise MalformedField(
                f"Signal '{spec.label}': digital_min {spec.digital_min} >= digital_max {spec.digital_max}"
            )
        if spec.physical_min == spec.physical_max:
            raise MalformedField(
                f"Signal '{spec.label}': physical_min equals physical_max ({spec.physical_min})"
            )
        if spec.samples_per_record < 1:
            raise MalformedField(
                f"Signal '{spec.label}': samples_per_record must be positive"
            )
        signals.append(spec)

    return EdfHeader(
        version=_text(data, 0, 8),
        patient_id=_text(data, 8, 80),
        recording_id=_text(data, 88, 80),
        start_datetime=_parse_datetime(_text(data, 168, 8), _text(data, 176, 8)),
        header_bytes=header_bytes,
        reserved=_text(data, 192, 44),
        num_records=num_records,
        record_duration_s=record_duration_s,
        num_signals=num_signals,
        signals=signals,
    )


def resolve_num_records(data: bytes, header: EdfHeader) -> int:
    """Record count, inferring it from the file size when the header says -1"""
    if header.num_records != UNKNOWN_RECORDS:
        return header.num_records
    available = (len(data) - header.header_bytes) // header.record_bytes
    logger.debug(f"Resolved unknown record count to {available} from file size")
    return available


def _records(data: bytes, header: EdfHeader) -> np.ndarray:
    """All data records as an int16 array of shape (records, samples per record)"""
    num_records = resolve_num_records(data, header)
    needed = header.header_bytes + num_records * header.record_bytes
    if len(data) < needed or num_records < 1:
        raise TruncatedRecords(
            f"File has {len(data)} bytes but {num_records} records need {needed}"
        )
    per_record = header.record_bytes // 2
    return np.frombuffer(
        data, dtype="<i2", count=num_records * per_record, offset=header.header_bytes
    ).reshape(num_records, per_record)


def _signal_slice(header: EdfHeader, index: int) -> slice:
    start = sum(s.samples_per_record for s in header.signals[:index])
    return slice(start, start + header.signals[index].samples_per_record)


def read_signal(data: bytes, header: EdfHeader, channel_label: str) -> np.ndarray:
    """
    Read one channel in physical units

    Args:
        data: Whole file bytes
        header: Header decoded from the same bytes
        channel_label: Exact signal label, e.g. "EEG Fpz-Cz"

    Returns:
        float64 samples with all data records concatenated
    """
    index = header.signal_index(channel_label)
    digital = _records(data, header)[:, _signal_slice(header, index)].reshape(-1)
    return header.signals[index].to_physical(digital)


def read_annotation_bytes(data: bytes, header: EdfHeader) -> bytes:
    """Raw bytes of every 'EDF Annotations' signal, record by record"""
    indices = [i for i, s in enumerate(header.signals) if s.is_annotation]
    if not indices:
        raise ChannelNotFound(f"No '{ANNOTATION_LABEL}' signal in file")
    records = _records(data, header)
    chunks = [
        records[r, _signal_slice(header, i)].tobytes()
        for r in range(records.shape[0])
        for i in indices
    ]
    return b"".join(chunks)
