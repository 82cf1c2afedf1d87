"""Street layouts, the geometric truth oracle, and drive generation."""

import json

import pytest

from parklabel.classifier import SyntheticNoiseModel
from parklabel.kinematics import build_profile
from parklabel.model import (
    TRUTH_CROSS,
    TRUTH_NON_PARKING,
    TRUTH_PARKING,
    validate_bundle,
)
from parklabel.scenario import (
    RawSpace,
    ScenarioSpec,
    Segment,
    StreetLayout,
    dump_scenario,
    generate,
    load_scenario,
    oracle_label,
    random_scenario,
    read_frame_truth,
    rescue_scenario,
    traffic_light_scenario,
    validate_layout,
    write_frame_truth,
)

NP = Segment(6.0, "non_parking")


def layout(*segments, detections=()):
    return StreetLayout(tuple(segments), tuple(detections))


# ----------------------------------------------------------------- oracle

def test_oracle_cross_by_length_alone():
    lay = layout(NP, Segment(10.0, "parking"), NP)
    assert oracle_label(lay, RawSpace(6.0, 3.0)) == TRUTH_CROSS
    assert oracle_label(lay, RawSpace(6.0, 2.1)) == TRUTH_CROSS
    # Half-open range: 3.5 is an ordinary space again, and a 3.5 m overlap
    # is not strictly more than the minimum stretch.
    assert oracle_label(lay, RawSpace(6.0, 3.5)) == TRUTH_NON_PARKING
    assert oracle_label(lay, RawSpace(6.0, 3.6)) == TRUTH_PARKING
    assert oracle_label(lay, RawSpace(6.0, 2.0)) == TRUTH_NON_PARKING


def test_oracle_space_fully_over_parking():
    lay = layout(NP, Segment(10.0, "parking"), NP)
    assert oracle_label(lay, RawSpace(7.0, 6.0)) == TRUTH_PARKING


def test_oracle_needs_more_than_the_minimum_stretch():
    lay = layout(NP, Segment(3.4, "parking"), NP)
    assert oracle_label(lay, RawSpace(5.5, 4.0)) == TRUTH_NON_PARKING
    exact = layout(NP, Segment(3.5, "parking"), NP)
    assert oracle_label(exact, RawSpace(5.5, 4.0)) == TRUTH_NON_PARKING
    enough = layout(NP, Segment(3.6, "parking"), NP)
    assert oracle_label(enough, RawSpace(5.5, 4.5)) == TRUTH_PARKING


def test_oracle_parking_area_at_end_of_large_gap():
    # 10 m raw space: 6 m free curb, then a 4 m parking area.
    lay = layout(NP, Segment(6.0, "non_parking"), Segment(4.0, "parking"), NP)
    assert oracle_label(lay, RawSpace(6.0, 10.0)) == TRUTH_PARKING


def test_oracle_sixty_percent_is_not_enough():
    # 5 m raw space, 3 m of it parking: below the minimum stretch.
    lay = layout(NP, Segment(2.0, "non_parking"), Segment(3.0, "parking"), NP)
    assert oracle_label(lay, RawSpace(6.0, 5.0)) == TRUTH_NON_PARKING


def test_oracle_merges_adjacent_parking_segments():
    lay = layout(NP, Segment(2.0, "parking"), Segment(2.0, "parking"), NP)
    assert oracle_label(lay, RawSpace(5.0, 6.0)) == TRUTH_PARKING


def test_oracle_cross_slot_segments_do_not_count_as_parking():
    lay = layout(NP, Segment(4.0, "cross_slot"), NP)
    assert oracle_label(lay, RawSpace(5.0, 6.0)) == TRUTH_NON_PARKING


# ----------------------------------------------------------------- layout

def test_class_at_boundaries():
    lay = layout(Segment(5.0, "non_parking"), Segment(5.0, "parking"))
    assert lay.class_at(0.0) == "non_parking"
    assert lay.class_at(4.999) == "non_parking"
    assert lay.class_at(5.0) == "parking"
    assert lay.class_at(9.999) == "parking"
    # Past the end: clamps to the last segment.
    assert lay.class_at(10.5) == "parking"


def test_parking_intervals_merge():
    lay = layout(
        Segment(2.0, "non_parking"),
        Segment(3.0, "parking"),
        Segment(1.0, "parking"),
        Segment(2.0, "non_parking"),
        Segment(2.0, "parking"),
    )
    assert lay.parking_intervals() == [(2.0, 6.0), (8.0, 10.0)]


def test_validate_layout():
    assert validate_layout(layout(NP)) == []
    problems = validate_layout(layout())
    assert problems == ["layout has no segments"]

    bad = layout(Segment(-1.0, "parking"), Segment(4.0, "lawn"))
    problems = validate_layout(bad)
    assert any("length -1.0" in p for p in problems)
    assert any("lawn" in p for p in problems)

    outside = layout(NP, detections=(RawSpace(4.0, 5.0),))
    problems = validate_layout(outside)
    assert any("outside" in p for p in problems)


# --------------------------------------------------------------- generate

def simple_spec():
    lay = layout(
        Segment(20.0, "non_parking"),
        Segment(6.0, "parking"),
        Segment(74.0, "non_parking"),
        detections=(RawSpace(19.0, 8.0),),
    )
    return lay


def test_generate_well_formed_bundle():
    drive = generate(simple_spec(), speed=10.0, seed=3, drive_id="gen-test")
    bundle = drive.bundle
    assert validate_bundle(bundle) == []
    assert bundle.drive_id == "gen-test"
    # 100 m at 10 m/s, 10 Hz frames.
    assert bundle.duration_us == 10_000_000
    assert len(bundle.frames) == 101
    assert set(drive.frame_truth) == {f.frame_id for f in bundle.frames}
    assert set(bundle.recorded_scores) == set(drive.frame_truth)


def test_generate_frame_truth_matches_geometry():
    drive = generate(simple_spec(), speed=10.0)
    profile = build_profile(drive.bundle.odometry)
    frame_class = {"parking": "parking", "non_parking": "non_parking",
                   "cross_slot": "parking"}
    for frame in drive.bundle.frames:
        pos = profile.distance_at(frame.t_us)
        assert drive.frame_truth[frame.frame_id] == \
            frame_class[drive.layout.class_at(pos)]


def test_generate_detection_placement():
    drive = generate(simple_spec(), speed=10.0, seed=3)
    [det] = drive.bundle.detections
    assert det.id == 1
    assert det.length_m == 8.0
    assert 0.3 <= det.ps_xpos_m <= 1.2
    profile = build_profile(drive.bundle.odometry)
    reported_at = profile.distance_at(det.t_det_us)
    assert reported_at == pytest.approx(27.0 + det.ps_xpos_m, abs=1e-3)
    assert drive.bundle.ground_truth[1] == TRUTH_PARKING


def test_generate_is_deterministic():
    noise = SyntheticNoiseModel(seed=5, flip_prob=0.1, concentration=15.0)
    a = generate(simple_spec(), speed=10.0, seed=5, noise=noise)
    b = generate(simple_spec(), speed=10.0, seed=5, noise=noise)
    assert a.bundle == b.bundle
    assert a.frame_truth == b.frame_truth

    c = generate(simple_spec(), speed=10.0, seed=6)
    assert c.bundle.detections[0].ps_xpos_m != a.bundle.detections[0].ps_xpos_m


def test_generate_rejects_bad_input():
    with pytest.raises(ValueError, match="no segments"):
        generate(layout(), speed=10.0)
    with pytest.raises(ValueError, match="positive"):
        generate(simple_spec(), speed=0.0)
    with pytest.raises(ValueError, match="never covers"):
        generate(simple_spec(), speed=[(0.0, 5.0), (1.0, 0.0)])
    with pytest.raises(ValueError, match="start at t=0"):
        generate(simple_spec(), speed=[(1.0, 5.0), (2.0, 5.0)])
    with pytest.raises(ValueError, match="increase"):
        generate(simple_spec(), speed=[(0.0, 5.0), (0.0, 6.0)])


# ---------------------------------------------------------------- presets

def test_traffic_light_floods_identical_frames():
    spec = traffic_light_scenario(stall_s=90.0)
    noise = SyntheticNoiseModel(seed=3, flip_prob=0.05, concentration=20.0)
    drive = generate(spec.layout, spec.speed, seed=spec.seed,
                     drive_id=spec.drive_id, noise=noise)

    profile = build_profile(drive.bundle.odometry)
    stall_frames = [
        f for f in drive.bundle.frames
        if abs(profile.distance_at(f.t_us) - 8.15) < 5e-3
    ]
    # 90 s at 10 Hz parked mid-patch.
    assert len(stall_frames) >= 895
    assert all(drive.frame_truth[f.frame_id] == "parking" for f in stall_frames)
    rows = {drive.bundle.recorded_scores[f.frame_id].as_tuple()
            for f in stall_frames}
    # One scene, one score row, regardless of noise.
    assert len(rows) == 1

    [det] = drive.bundle.detections
    assert det.length_m == 5.0
    assert drive.bundle.ground_truth[det.id] == TRUTH_NON_PARKING


def test_rescue_preset_truth():
    spec = rescue_scenario()
    drive = generate(spec.layout, spec.speed, seed=spec.seed)
    [det] = drive.bundle.detections
    assert det.length_m == 11.5
    assert drive.bundle.ground_truth[det.id] == TRUTH_PARKING
    parking_frames = [f for f, c in drive.frame_truth.items() if c == "parking"]
    assert parking_frames  # 4.5 m at 8 m/s, 10 Hz: a handful of frames
    assert len(parking_frames) <= 8


# --------------------------------------------------------------- scenarios

def test_random_scenarios_are_valid_and_deterministic():
    for seed in range(40):
        spec = random_scenario(seed)
        assert validate_layout(spec.layout) == []
        assert spec.layout.detections
        again = random_scenario(seed)
        assert dump_scenario(again) == dump_scenario(spec)
        for space in spec.layout.detections:
            assert oracle_label(spec.layout, space) in (
                TRUTH_PARKING, TRUTH_NON_PARKING, TRUTH_CROSS)


def test_scenario_json_round_trip(tmp_path):
    for spec in (random_scenario(7), traffic_light_scenario(), rescue_scenario()):
        raw = dump_scenario(spec)
        path = tmp_path / f"{spec.drive_id}.json"
        path.write_text(json.dumps(raw))
        loaded = load_scenario(path)
        assert dump_scenario(loaded) == raw
        assert loaded.layout == spec.layout


def test_load_scenario_defaults():
    spec = load_scenario({"segments": [{"length_m": 30.0, "class": "non_parking"}]})
    assert spec.speed == 8.0
    assert spec.frame_period_ms == 100
    assert spec.layout.detections == ()


# -------------------------------------------------------------- frame truth

def test_frame_truth_round_trip(tmp_path):
    truth = {0: "parking", 1: "non_parking", 7: "parking"}
    write_frame_truth(tmp_path, truth)
    assert read_frame_truth(tmp_path) == truth
    text = (tmp_path / "frame_truth.csv").read_text()
    assert text.startswith("frame_id,class\n")


def test_frame_truth_missing_is_none(tmp_path):
    assert read_frame_truth(tmp_path) is None


def test_frame_truth_bad_header(tmp_path):
    (tmp_path / "frame_truth.csv").write_text("id,klass\n0,parking\n")
    with pytest.raises(ValueError, match="bad header"):
        read_frame_truth(tmp_path)
