from datetime import datetime

import numpy as np
import pytest

from sleepstack.core.edf import (
    UNKNOWN_RECORDS,
    EdfHeader,
    SignalSpec,
    parse_edf_header,
    read_annotation_bytes,
    read_signal,
    resolve_num_records,
)
from sleepstack.core.errors import (
    ChannelNotFound,
    DataFormatError,
    MalformedField,
    TruncatedHeader,
    TruncatedRecords,
)

from edf_factory import build_edf, eeg_spec, hypnogram_edf_bytes, make_header, psg_bytes


def _two_channel_file(num_records=2, spr=3000):
    header = make_header([eeg_spec("EEG Fpz-Cz", spr), eeg_spec("EEG Pz-Oz", spr)], num_records)
    first = np.arange(num_records * spr).reshape(num_records, spr) % 4096 - 2048
    second = -first - 1
    records = np.concatenate([first, second], axis=1)
    return header, build_edf(header, records), first.reshape(-1), second.reshape(-1)


def test_header_roundtrip_fields():
    header, data, _, _ = _two_channel_file()
    parsed = parse_edf_header(data)

    assert parsed.num_signals == 2
    assert parsed.labels == ["EEG Fpz-Cz", "EEG Pz-Oz"]
    assert parsed.num_records == 2
    assert parsed.record_duration_s == 30
    assert parsed.header_bytes == 768
    assert parsed.start_datetime == header.start_datetime
    assert parsed.sampling_rate("EEG Fpz-Cz") == 100
    assert not parsed.is_edf_plus


def test_read_signal_selects_channel_and_scales():
    _, data, first, second = _two_channel_file()
    header = parse_edf_header(data)
    gain = 400.0 / 4095.0

    fpz = read_signal(data, header, "EEG Fpz-Cz")
    pz = read_signal(data, header, "EEG Pz-Oz")

    assert fpz.shape == (6000,)
    np.testing.assert_allclose(fpz, -200.0 + (first + 2048) * gain)
    np.testing.assert_allclose(pz, -200.0 + (second + 2048) * gain)
    assert fpz.min() == pytest.approx(-200.0)


def test_digital_extremes_map_to_physical_extremes():
    header = make_header([eeg_spec(samples_per_record=2)], 1, record_duration_s=0.02)
    data = build_edf(header, np.array([[-2048, 2047]]))
    signal = read_signal(data, parse_edf_header(data), "EEG Fpz-Cz")
    np.testing.assert_allclose(signal, [-200.0, 200.0])


def test_unknown_record_count_is_inferred_from_size():
    header, data, _, _ = _two_channel_file(num_records=3)
    raw = bytearray(data)
    raw[236:244] = b"-1      "
    parsed = parse_edf_header(bytes(raw))

    assert parsed.num_records == UNKNOWN_RECORDS
    assert resolve_num_records(bytes(raw), parsed) == 3
    assert read_signal(bytes(raw), parsed, "EEG Fpz-Cz").shape == (9000,)


def test_missing_channel_lists_available_labels():
    _, data, _, _ = _two_channel_file()
    header = parse_edf_header(data)
    with pytest.raises(ChannelNotFound, match="EEG Pz-Oz"):
        read_signal(data, header, "EEG Cz")


def test_short_header_is_truncated():
    _, data, _, _ = _two_channel_file()
    with pytest.raises(TruncatedHeader):
        parse_edf_header(data[:100])
    with pytest.raises(TruncatedHeader):
        parse_edf_header(data[:400])


def test_missing_records_are_truncated():
    _, data, _, _ = _two_channel_file()
    header = parse_edf_header(data)
    with pytest.raises(TruncatedRecords):
        read_signal(data[:-10], header, "EEG Fpz-Cz")


@pytest.mark.parametrize(
    "offset,width,value",
    [
        (252, 4, b"x   "),
        (252, 4, b"0   "),
        (184, 8, b"512     "),
        (236, 8, b"0       "),
        (244, 8, b"-30     "),
        (244, 8, b"nan     "),
        (168, 8, b"32.13.89"),
    ],
)
def test_malformed_fixed_fields(offset, width, value):
    _, data, _, _ = _two_channel_file()
    raw = bytearray(data)
    raw[offset:offset + width] = value
    with pytest.raises(MalformedField):
        parse_edf_header(bytes(raw))


def test_digital_range_must_be_ordered():
    header = make_header([eeg_spec()], 1)
    raw = bytearray(build_edf(header, np.zeros((1, 3000))))
    # digital_min column starts after label, transducer, dimension and both physical fields
    offset = 256 + 16 + 80 + 8 + 8 + 8
    raw[offset:offset + 8] = b"4000    "
    with pytest.raises(MalformedField, match="digital_min"):
        parse_edf_header(bytes(raw))


def test_corrupted_headers_never_escape_the_error_family(rng):
    _, data, _, _ = _two_channel_file(num_records=1)
    for _ in range(200):
        raw = bytearray(data)
        start = int(rng.integers(0, 768))
        raw[start:start + 4] = rng.integers(0, 256, size=4, dtype=np.uint8).tobytes()
        cut = int(rng.integers(0, len(raw) + 1))
        try:
            header = parse_edf_header(bytes(raw[:cut]))
            read_signal(bytes(raw[:cut]), header, header.labels[0])
        except DataFormatError:
            pass


def test_annotation_bytes_from_edf_plus_file():
    data = hypnogram_edf_bytes([(0, 30, "Sleep stage W")])
    header = parse_edf_header(data)
    assert header.is_edf_plus
    assert header.record_duration_s == 0
    raw = read_annotation_bytes(data, header)
    assert raw.startswith(b"+0\x14\x14\x00+0\x1530\x14Sleep stage W\x14\x00")


def test_annotation_file_has_no_sampling_rate():
    data = hypnogram_edf_bytes([(0, 30, "Sleep stage W")])
    header = parse_edf_header(data)
    with pytest.raises(MalformedField):
        header.sampling_rate("EDF Annotations")


def test_psg_without_annotations_has_no_annotation_bytes():
    data = psg_bytes(np.zeros(3000))
    with pytest.raises(ChannelNotFound):
        read_annotation_bytes(data, parse_edf_header(data))


TEXT_CHARS = list("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789 -_.:/")


def random_text(rng, width):
    return "".join(rng.choice(TEXT_CHARS, size=int(rng.integers(0, width + 1)))).rstrip(" ")


def random_real(rng):
    return float(rng.choice([round(float(rng.uniform(-999.0, 999.0)), 2), float(rng.integers(-5000, 5000))]))


def random_header(rng):
    signals = []
    for _ in range(int(rng.integers(1, 5))):
        physical_min = random_real(rng)
        digital_min = int(rng.integers(-32768, 32767))
        signals.append(
            SignalSpec(
                label=random_text(rng, 16),
                transducer=random_text(rng, 80),
                physical_dim=random_text(rng, 8),
                physical_min=physical_min,
                physical_max=round(physical_min + float(rng.integers(1, 1000)), 2),
                digital_min=digital_min,
                digital_max=int(rng.integers(digital_min + 1, 32768)),
                prefilter=random_text(rng, 80),
                samples_per_record=int(rng.integers(1, 10000)),
                reserved=random_text(rng, 32),
            )
        )
    return EdfHeader(
        version="0",
        patient_id=random_text(rng, 80),
        recording_id=random_text(rng, 80),
        start_datetime=datetime(
            int(rng.integers(1985, 2085)),
            int(rng.integers(1, 13)),
            int(rng.integers(1, 29)),
            int(rng.integers(0, 24)),
            int(rng.integers(0, 60)),
            int(rng.integers(0, 60)),
        ),
        header_bytes=256 * (len(signals) + 1),
        reserved=str(rng.choice(["", "EDF+C", "EDF+D"])),
        num_records=int(rng.choice([UNKNOWN_RECORDS, int(rng.integers(1, 10 ** 7))])),
        record_duration_s=float(rng.choice([0.0, 0.5, 1.0, 30.0])),
        num_signals=len(signals),
        signals=signals,
    )


def test_random_headers_roundtrip_bit_exact():
    rng = np.random.default_rng(61)
    for _ in range(200):
        header = random_header(rng)
        data = header.to_bytes()
        assert len(data) == header.header_bytes
        parsed = parse_edf_header(data)
        assert parsed == header
        assert parsed.to_bytes() == data
