"""
Hypnogram parsing from EDF+ annotation signals or the plain-text TSV fallback
"""

import enum
import logging
import math
from dataclasses import dataclass
from typing import List

from .edf import parse_edf_header, read_annotation_bytes
from .errors import MalformedField, OverlappingAnnotations, UnknownStageString

logger = logging.getLogger(__name__)

EPOCH_SECONDS = 30
TSV_HEADER = "onset_s\tduration_s\tstage"


class Stage(enum.Enum):
    W = "W"
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    S4 = "S4"
    REM = "REM"
    MVT = "MVT"
    UNSCORED = "UNSCORED"


STAGE_STRINGS = {
    "Sleep stage W": Stage.W,
    "Sleep stage 1": Stage.S1,
    "Sleep stage 2": Stage.S2,
    "Sleep stage 3": Stage.S3,
    "Sleep stage 4": Stage.S4,
    "Sleep stage R": Stage.REM,
    "Movement time": Stage.MVT,
    "Sleep stage ?": Stage.UNSCORED,
}


@dataclass(frozen=True)
class HypnogramAnnotation:
    """One scored interval"""

    onset_s: float
    duration_s: float
    stage: Stage

    @property
    def end_s(self) -> float:
        return self.onset_s + self.duration_s

    @property
    def num_epochs(self) -> int:
        return int(round(self.duration_s / EPOCH_SECONDS))


def stage_from_string(text: str) -> Stage:
    """Map an annotation text to its stage"""
    try:
        return STAGE_STRINGS[text.strip()]
    except KeyError:
        raise UnknownStageString(f"Unknown stage annotation: '{text}'")


def _make_annotation(onset_s: float, duration_s: float, text: str) -> HypnogramAnnotation:
    stage = stage_from_string(text)
    if onset_s < 0:
        raise MalformedField(f"Annotation onset must be >= 0, got {onset_s}")
    if not duration_s > 0:
        raise MalformedField(f"Annotation '{text}' at {onset_s}s has no positive duration")
    epochs = duration_s / EPOCH_SECONDS
    if not math.isclose(epochs, round(epochs), abs_tol=1e-9):
        raise MalformedField(
            f"Annotation '{text}' at {onset_s}s lasts {duration_s}s, not a multiple of {EPOCH_SECONDS}s"
        )
    return HypnogramAnnotation(onset_s=onset_s, duration_s=duration_s, stage=stage)


def _parse_seconds(text: str, name: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MalformedField(f"Invalid {name}: '{text}'")
    if not math.isfinite(value):
        raise MalformedField(f"Invalid {name}: '{text}'")
    return value


def parse_tal_stream(raw: bytes) -> List[HypnogramAnnotation]:
    """Decode time-stamped annotation lists, skipping record timekeeping TALs"""
    annotations = []
    for chunk in raw.split(b"\x00"):
        if not chunk:
            continue
        try:
            tal = chunk.decode("utf-8")
        except UnicodeDecodeError:
            raise MalformedField("Annotation list is not valid UTF-8")
        parts = tal.split("\x14")
        timing = parts[0].split("\x15")
        if not timing[0] or timing[0][0] not in "+-":
            raise MalformedField(f"Annotation onset must start with a sign: '{timing[0]}'")
        onset_s = _parse_seconds(timing[0], "onset")
        duration_s = _parse_seconds(timing[1], "duration") if len(timing) > 1 and timing[1] else 0.0
        for text in parts[1:]:
            if text:
                annotations.append(_make_annotation(onset_s, duration_s, text))
    return annotations


def parse_tsv(text: str) -> List[HypnogramAnnotation]:
    """Decode the onset_s/duration_s/stage table"""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or lines[0].strip() != TSV_HEADER:
        raise MalformedField(f"Hypnogram TSV must start with header '{TSV_HEADER}'")
    annotations = []
    for number, line in enumerate(lines[1:], start=2):
        cells = line.split("\t")
        if len(cells) != 3:
            raise MalformedField(f"Line {number}: expected 3 tab-separated fields")
        annotations.append(
            _make_annotation(
                _parse_seconds(cells[0], "onset_s"),
                _parse_seconds(cells[1], "duration_s"),
                cells[2],
            )
        )
    return annotations


def _is_edf(data: bytes) -> bool:
    return data[:8] == b"0       "


def parse_hypnogram(data: bytes) -> List[HypnogramAnnotation]:
    """
    Parse a hypnogram from EDF+ or TSV bytes

    Args:
        data: Contents of a *-Hypnogram.edf file or a TSV fallback file

    Returns:
        Annotations sorted by onset, with no overlaps
    """
    if _is_edf(data):
        header = parse_edf_header(data)
        annotations = parse_tal_stream(read_annotation_bytes(data, header))
    else:
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError:
            raise MalformedField("Hypnogram is neither EDF nor UTF-8 text")
        annotations = parse_tsv(text)

    annotations.sort(key=lambda a: a.onset_s)
    for previous, current in zip(annotations, annotations[1:]):
        if current.onset_s < previous.end_s - 1e-9:
            raise OverlappingAnnotations(
                f"Annotation at {current.onset_s}s overlaps the one at {previous.onset_s}s"
            )
    logger.debug(f"Parsed {len(annotations)} hypnogram annotations")
    return annotations


def to_tsv(annotations: List[HypnogramAnnotation]) -> str:
    """Render annotations in the TSV fallback format"""
    inverse = {stage: text for text, stage in STAGE_STRINGS.items()}
    rows = [TSV_HEADER]
    for a in annotations:
        rows.append(f"{a.onset_s:g}\t{a.duration_s:g}\t{inverse[a.stage]}")
    return "\n".join(rows) + "\n"
