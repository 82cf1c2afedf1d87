"""Trace parsing and bundle directory round trips.

The independent oracle for the parser is render_trace in conftest: a direct
textual inverse with no code shared with the parser.
"""

import gzip

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parklabel import ingest
from parklabel.ingest import (
    BundleError,
    BundleFormatError,
    TraceError,
    discover_bundles,
    parse_trace,
    read_bundle,
    write_bundle,
)
from parklabel.model import ClassScores, Detection, DriveBundle

from conftest import render_trace, simple_bundle

BASIC = """\
# odometry plus one detection and two camera frames
1000000 ODO 10.0
1000100 NRC 0 img/000.jpg
1100100 NRC 1 img/001.jpg
2000000 ODO 10.0
1900000 USS 4 1.5 6.0
"""


def test_parse_basic_trace_rebases_to_zero():
    b = parse_trace(BASIC.encode(), drive_id="basic")
    assert b.drive_id == "basic"
    assert [s.t_us for s in b.odometry] == [0, 1_000_000]
    assert [s.v_mps for s in b.odometry] == [10.0, 10.0]
    assert len(b.detections) == 1
    det = b.detections[0]
    assert (det.id, det.t_det_us, det.ps_xpos_m, det.length_m) == (4, 900_000, 1.5, 6.0)
    assert [(f.frame_id, f.t_us, f.image_ref) for f in b.frames] == [
        (0, 100, "img/000.jpg"),
        (1, 100_100, "img/001.jpg"),
    ]
    assert b.duration_us == 1_000_000


def test_parse_gzip_equals_plain():
    plain = parse_trace(BASIC.encode())
    zipped = parse_trace(gzip.compress(BASIC.encode()))
    assert plain == zipped


def test_parse_skips_comments_and_blank_lines():
    noisy = "#header\n\n" + BASIC + "\n# trailing\n"
    assert parse_trace(noisy.encode()) == parse_trace(BASIC.encode())


def test_parse_missing_uss_field_names_line():
    bad = "0 ODO 5.0\n500000 USS 7 3.2\n1000000 ODO 5.0\n"
    with pytest.raises(TraceError) as err:
        parse_trace(bad.encode())
    assert "line 2" in str(err.value)


def test_parse_unknown_channel():
    bad = "0 ODO 5.0\n10 GPS 1 2\n1000000 ODO 5.0\n"
    with pytest.raises(TraceError) as err:
        parse_trace(bad.encode())
    assert "GPS" in str(err.value)
    assert err.value.line_no == 2


def test_parse_non_monotone_channel_timestamps():
    bad = "0 ODO 5.0\n2000000 ODO 5.0\n1000000 ODO 5.0\n"
    with pytest.raises(TraceError) as err:
        parse_trace(bad.encode())
    assert err.value.line_no == 3


def test_parse_duplicate_frame_id_cites_both_lines():
    bad = (
        "0 ODO 5.0\n"
        "100 NRC 9 a.jpg\n"
        "200 NRC 9 b.jpg\n"
        "1000000 ODO 5.0\n"
    )
    with pytest.raises(TraceError) as err:
        parse_trace(bad.encode())
    msg = str(err.value)
    assert "9" in msg and "line 2" in msg and "line 3" in msg


def test_parse_bad_number():
    bad = "0 ODO fast\n1000000 ODO 5.0\n"
    with pytest.raises(TraceError) as err:
        parse_trace(bad.encode())
    assert err.value.line_no == 1


@st.composite
def bundles(draw):
    from parklabel.model import Frame, OdometrySample

    n_odo = draw(st.integers(min_value=2, max_value=6))
    duration = (n_odo - 1) * 1_000_000
    odo = tuple(
        OdometrySample(i * 1_000_000, draw(st.floats(0, 30)))
        for i in range(n_odo)
    )
    n_frames = draw(st.integers(min_value=0, max_value=5))
    frames = tuple(
        Frame(i, i * 200_000 + 100, f"f/{i:03d}.jpg")
        for i in range(n_frames)
    )
    det_times = draw(
        st.lists(st.integers(0, duration), max_size=3, unique=True)
    )
    dets = tuple(
        Detection(i + 1, t, draw(st.floats(0, 5)), draw(st.floats(0.1, 20)))
        for i, t in enumerate(sorted(det_times))
    )
    return DriveBundle("prop", duration, odo, dets, frames)


@given(bundles(), st.integers(min_value=0, max_value=10**12))
@settings(max_examples=60)
def test_parse_render_round_trip(bundle, offset):
    parsed = parse_trace(render_trace(bundle, offset_us=offset).encode(), drive_id="prop")
    assert parsed.odometry == bundle.odometry
    assert parsed.frames == bundle.frames
    assert parsed.detections == bundle.detections


def _scored_bundle(seed: int) -> DriveBundle:
    import random

    rng = random.Random(seed)
    dets = tuple(
        Detection(i + 1, rng.randrange(0, 10_000_000), rng.uniform(0, 3),
                  rng.uniform(0.5, 15))
        for i in range(rng.randint(0, 4))
    )
    base = simple_bundle(v_mps=rng.uniform(1, 20), detections=dets,
                         drive_id=f"seed-{seed}")
    scores = {}
    for f in base.frames[:: rng.randint(1, 7)]:
        raw = [rng.random() for _ in range(4)]
        total = sum(raw)
        scores[f.frame_id] = ClassScores(*(x / total for x in raw))
    truth = {d.id: rng.choice(("parking", "non_parking", "cross")) for d in dets}
    return DriveBundle(
        base.drive_id, base.duration_us, base.odometry, base.detections,
        base.frames, recorded_scores=scores or None, ground_truth=truth or None,
    )


@pytest.mark.parametrize("seed", range(12))
def test_bundle_round_trip(tmp_path, seed):
    bundle = _scored_bundle(seed)
    write_bundle(bundle, tmp_path)
    assert read_bundle(tmp_path) == bundle


def test_write_bundle_minimal_files(tmp_path):
    b = simple_bundle(detections=(Detection(1, 5_000_000, 1.0, 6.0),))
    write_bundle(b, tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["detections.csv", "drive.json", "frames.csv", "odometry.csv"]
    assert (tmp_path / "odometry.csv").read_text().splitlines()[0] == "t_us,v_mps"
    assert (tmp_path / "detections.csv").read_text().splitlines()[0] == \
        "id,t_det_us,ps_xpos_m,length_m"
    assert (tmp_path / "frames.csv").read_text().splitlines()[0] == \
        "frame_id,t_us,image_ref"


def test_read_bundle_missing_odometry(tmp_path):
    b = simple_bundle()
    write_bundle(b, tmp_path)
    (tmp_path / "odometry.csv").unlink()
    with pytest.raises(BundleFormatError) as err:
        read_bundle(tmp_path)
    assert "odometry.csv" in str(err.value)


def test_read_bundle_rejects_wrong_header(tmp_path):
    b = simple_bundle()
    write_bundle(b, tmp_path)
    path = tmp_path / "odometry.csv"
    body = path.read_text().splitlines()[1:]
    path.write_text("\n".join(["time,speed"] + body) + "\n")
    with pytest.raises(BundleFormatError) as err:
        read_bundle(tmp_path)
    assert "odometry.csv" in str(err.value)


def test_read_bundle_rejects_unnormalized_scores(tmp_path):
    b = simple_bundle()
    write_bundle(b, tmp_path)
    (tmp_path / "scores.csv").write_text(
        "frame_id,car,construction,non_parking,parking\n0,0.2,0.2,0.2,0.2\n"
    )
    with pytest.raises((BundleFormatError, BundleError)) as err:
        read_bundle(tmp_path)
    assert "0" in str(err.value)


def test_parse_large_trace_round_trips(tmp_path):
    # 50k lines, >10 MB thanks to the padded image refs.
    pad = "x" * 180
    lines = []
    t = 0
    n_frames = 49_000
    for i in range(n_frames):
        t += 2_000
        lines.append(f"{t} NRC {i} img/{pad}/{i:07d}.jpg")
    for i in range(1_000):
        lines.append(f"{i * 100_000} ODO {5.0 + (i % 7) * 0.25!r}")
    text = "\n".join(lines) + "\n"
    assert len(text) > 10 * 1024 * 1024
    assert len(lines) == 50_000

    bundle = parse_trace(text.encode(), drive_id="big")
    assert len(bundle.frames) == n_frames
    write_bundle(bundle, tmp_path / "a")
    again = read_bundle(tmp_path / "a")
    assert again == bundle
    write_bundle(again, tmp_path / "b")
    for name in ("drive.json", "odometry.csv", "detections.csv", "frames.csv"):
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes()


def test_discover_bundles_single_and_nested(tmp_path):
    write_bundle(simple_bundle(drive_id="one"), tmp_path / "one")
    write_bundle(simple_bundle(drive_id="two"), tmp_path / "two")
    assert discover_bundles([tmp_path / "one"]) == [tmp_path / "one"]
    assert discover_bundles([tmp_path]) == [tmp_path / "one", tmp_path / "two"]


def test_discover_bundles_missing_path():
    with pytest.raises(FileNotFoundError) as err:
        discover_bundles(["/no/such/bundle"])
    assert "/no/such/bundle" in str(err.value)
