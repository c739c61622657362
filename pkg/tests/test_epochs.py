import numpy as np
import pytest

from sleepstack.core.epochs import (
    EPOCH_SAMPLES,
    LabelScheme,
    SplitManifest,
    Subset,
    Task,
    build_split,
    class_count_summary,
    discover_recordings,
    ingest_directory,
    map_label,
    parse_recording_name,
    random_split_manifest,
    segment_epochs,
)
from sleepstack.core.errors import (
    EpochOutOfBounds,
    MissingRecordings,
    SubjectLeakage,
    UnknownRecordingId,
    UsageError,
)
from sleepstack.core.hypnogram import HypnogramAnnotation, Stage

from conftest import RECORDINGS


META = parse_recording_name("SC4001E0-PSG.edf")


def test_recording_names():
    assert META.recording_id == "SC4001"
    assert META.subject_id == "SC00"
    assert META.subset is Subset.SC
    st = parse_recording_name("ST7132J0")
    assert (st.subject_id, st.subset) == ("ST13", Subset.ST)
    assert parse_recording_name("SC4002E0").subject_id == META.subject_id
    with pytest.raises(UsageError):
        parse_recording_name("XX1234")


def test_six_and_five_stage_schemes():
    six = LabelScheme.six_stage()
    five = LabelScheme.five_stage()

    assert six.class_names == ("S1", "S2", "S3", "S4", "REM", "W")
    assert five.class_names == ("S1", "S2", "S3", "REM", "W")
    assert map_label(Stage.S4, six) == 3
    assert map_label(Stage.S4, five) == map_label(Stage.S3, five) == 2
    assert map_label(Stage.W, five) == 4
    for scheme in (six, five):
        assert map_label(Stage.MVT, scheme) is None
        assert map_label(Stage.UNSCORED, scheme) is None
    assert LabelScheme.for_classes(5) == five
    with pytest.raises(UsageError):
        LabelScheme.for_classes(4)


def test_task_aliases():
    assert Task.parse("rs") is Task.RS_TASK
    assert Task.parse("SC_TASK") is Task.SC_TASK
    with pytest.raises(UsageError):
        Task.parse("xx")


def test_segment_epochs_labels_and_positions():
    signal = np.arange(5 * EPOCH_SAMPLES, dtype=np.float64)
    hypnogram = [
        HypnogramAnnotation(0.0, 60.0, Stage.W),
        HypnogramAnnotation(60.0, 30.0, Stage.MVT),
        HypnogramAnnotation(90.0, 60.0, Stage.S4),
    ]
    epochs = segment_epochs(signal, hypnogram, LabelScheme.five_stage(), META)

    assert [e.label for e in epochs] == [4, 4, 2, 2]
    assert [e.position_index for e in epochs] == [0, 1, 3, 4]
    assert all(e.samples.shape == (EPOCH_SAMPLES,) for e in epochs)
    assert epochs[2].samples[0] == 3 * EPOCH_SAMPLES
    assert not epochs[0].samples.flags.writeable


def test_dropped_intervals_are_not_bounds_checked():
    signal = np.zeros(2 * EPOCH_SAMPLES)
    hypnogram = [
        HypnogramAnnotation(0.0, 60.0, Stage.S2),
        HypnogramAnnotation(60.0, 3600.0, Stage.UNSCORED),
    ]
    assert len(segment_epochs(signal, hypnogram, LabelScheme.six_stage(), META)) == 2


def test_kept_interval_past_signal_end():
    signal = np.zeros(2 * EPOCH_SAMPLES)
    hypnogram = [HypnogramAnnotation(0.0, 90.0, Stage.S2)]
    with pytest.raises(EpochOutOfBounds):
        segment_epochs(signal, hypnogram, LabelScheme.six_stage(), META)


def test_discover_pairs_edf_and_tsv_hypnograms(recording_dir):
    found = discover_recordings(recording_dir)
    assert sorted(found) == sorted(name[:6] for name in RECORDINGS)
    assert found["SC4002"].hypnogram_path.endswith(".tsv")
    assert found["SC4001"].hypnogram_path.endswith(".edf")


def test_ingest_directory(epochs):
    # each synthetic night keeps 11 of 12 epochs (one movement epoch)
    assert len(epochs) == 11 * len(RECORDINGS)
    assert [e.recording_id for e in epochs] == sorted(e.recording_id for e in epochs)
    first = [e for e in epochs if e.recording_id == "SC4001"]
    assert [e.label for e in first] == [5, 5, 0, 1, 1, 2, 3, 3, 4, 0, 5]
    assert first[-1].position_index == 11


def test_ingest_reports_missing_recordings(recording_dir):
    with pytest.raises(MissingRecordings, match="SC4099"):
        ingest_directory(recording_dir, ["SC4001", "SC4099"], LabelScheme.six_stage())


def test_ingest_is_thread_count_independent(recording_dir):
    ids = ["SC4001", "SC4011", "ST7021"]
    one = ingest_directory(recording_dir, ids, LabelScheme.six_stage(), threads=1)
    four = ingest_directory(recording_dir, ids, LabelScheme.six_stage(), threads=4)
    assert [(e.recording_id, e.position_index, e.label) for e in one] == [
        (e.recording_id, e.position_index, e.label) for e in four
    ]
    assert all(np.array_equal(a.samples, b.samples) for a, b in zip(one, four))


def test_manifest_rejects_shared_subjects():
    with pytest.raises(SubjectLeakage, match="SC00"):
        SplitManifest(Task.SC_TASK, ("SC4001",), ("SC4002",))


def test_sc_manifest_rejects_st_recordings():
    with pytest.raises(UsageError):
        SplitManifest(Task.SC_TASK, ("SC4001",), ("ST7021",))


def test_manifest_roundtrip(tmp_path):
    manifest = SplitManifest(Task.RS_TASK, ("SC4001", "ST7011"), ("SC4011",))
    path = str(tmp_path / "m.json")
    manifest.save(path)
    assert SplitManifest.load(path) == manifest


def test_manifest_missing_file(tmp_path):
    with pytest.raises(UsageError):
        SplitManifest.load(str(tmp_path / "absent.json"))


def test_build_split(epochs, manifest_path):
    train, test = build_split(epochs, SplitManifest.load(manifest_path))
    assert {e.recording_id for e in test} == {"SC4021", "ST7021"}
    assert len(train) + len(test) == len(epochs)
    assert not {e.subject_id for e in train} & {e.subject_id for e in test}


def test_build_split_unknown_recording(epochs):
    manifest = SplitManifest(Task.SC_TASK, ("SC4001",), ("SC4091",))
    with pytest.raises(UnknownRecordingId, match="SC4091"):
        build_split(epochs, manifest)


def test_random_split_is_seeded_and_subject_independent():
    ids = ["SC4001", "SC4002", "SC4011", "SC4012", "SC4021", "SC4031", "ST7011", "ST7021"]
    a = random_split_manifest(ids, Task.RS_TASK, 0.5, seed=3)
    b = random_split_manifest(ids, Task.RS_TASK, 0.5, seed=3)

    assert a == b
    assert sorted(a.recordings) == sorted(ids)
    assert any(r.startswith("ST") for r in a.test_recordings)
    assert any(r.startswith("ST") for r in a.train_recordings)

    sc = random_split_manifest(ids, Task.SC_TASK, 0.3, seed=3)
    assert all(r.startswith("SC") for r in sc.recordings)


def test_class_count_summary(epochs, manifest_path):
    rows = class_count_summary(epochs, LabelScheme.six_stage(), SplitManifest.load(manifest_path))
    by_name = {row["subset"]: row for row in rows}

    assert [row["subset"] for row in rows] == ["SC", "ST", "Total", "Train", "Test"]
    assert by_name["SC"]["subjects"] == 3
    assert by_name["ST"]["W"] == 6
    assert by_name["Total"]["total"] == 66
    assert by_name["Train"]["total"] + by_name["Test"]["total"] == 66


def test_class_count_summary_without_st(epochs):
    sc_only = [e for e in epochs if e.subset is Subset.SC]
    rows = class_count_summary(sc_only, LabelScheme.five_stage())
    assert rows[1] == {"subset": "ST", "subjects": 0, "S1": 0, "S2": 0, "S3": 0, "REM": 0, "W": 0, "total": 0}
