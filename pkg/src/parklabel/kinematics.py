"""Mapping between drive time and street position.

The vehicle's street position is the integral of the sampled speed signal
(trapezoidal rule at the sample knots, linear interpolation in between).
Detections are reported behind the vehicle, so locating their camera frames
means inverting that distance profile.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass

from .model import Detection, Frame, OdometrySample, Timestamp, US_PER_SECOND


class WindowError(ValueError):
    """A detection that cannot be mapped onto camera frames."""


@dataclass(frozen=True)
class DistanceProfile:
    """Cumulative distance at each odometry knot, in meters."""

    times_us: tuple[int, ...]
    dist_m: tuple[float, ...]

    @property
    def total_m(self) -> float:
        return self.dist_m[-1]

    def distance_at(self, t_us: float) -> float:
        """Distance at time t (piecewise linear between knots)."""
        times = self.times_us
        if not times[0] <= t_us <= times[-1]:
            raise ValueError(
                f"t={t_us} us outside profile [{times[0]}, {times[-1]}]"
            )
        i = bisect_right(times, t_us)
        if i == len(times):
            return self.dist_m[-1]
        lo, hi = times[i - 1], times[i]
        frac = (t_us - lo) / (hi - lo)
        return self.dist_m[i - 1] + frac * (self.dist_m[i] - self.dist_m[i - 1])


def build_profile(odometry: tuple[OdometrySample, ...] | list[OdometrySample]) -> DistanceProfile:
    """Integrate the speed signal into a distance profile.

    Requires at least two samples with strictly increasing timestamps and
    non-negative speeds.
    """
    if len(odometry) < 2:
        raise ValueError("need at least 2 odometry samples")
    times = [odometry[0].t_us]
    dist = [0.0]
    total = 0.0
    for prev, cur in zip(odometry, odometry[1:]):
        if cur.t_us <= prev.t_us:
            raise ValueError(
                f"odometry timestamps not strictly increasing at {cur.t_us} us"
            )
        if prev.v_mps < 0 or cur.v_mps < 0:
            raise ValueError("negative speed in odometry")
        dt_s = (cur.t_us - prev.t_us) / US_PER_SECOND
        total += 0.5 * (prev.v_mps + cur.v_mps) * dt_s
        times.append(cur.t_us)
        dist.append(total)
    return DistanceProfile(tuple(times), tuple(dist))


def invert_profile(profile: DistanceProfile, s_target: float) -> Timestamp:
    """Earliest time at which the vehicle has covered s_target meters.

    On plateaus (standstill) this is the plateau start. Result is rounded
    to whole microseconds.
    """
    if not 0.0 <= s_target <= profile.total_m + 1e-9:
        raise ValueError(
            f"target {s_target} m outside profile [0, {profile.total_m}]"
        )
    dist = profile.dist_m
    i = bisect_left(dist, s_target)
    if i >= len(dist):
        return profile.times_us[-1]
    if i == 0:
        return profile.times_us[0]
    lo_d, hi_d = dist[i - 1], dist[i]
    lo_t, hi_t = profile.times_us[i - 1], profile.times_us[i]
    # bisect_left guarantees lo_d < s_target <= hi_d, so the segment rises.
    t = lo_t + (s_target - lo_d) / (hi_d - lo_d) * (hi_t - lo_t)
    return round(t)


@dataclass(frozen=True)
class WindowFrame:
    frame_id: int
    t_us: Timestamp
    length_weight_m: float


@dataclass(frozen=True)
class DetectionWindow:
    """Frames that saw a detection's raw space, with per-frame street share."""

    detection_id: int
    t0_us: Timestamp
    tend_us: Timestamp
    frames: tuple[WindowFrame, ...]


def compute_window(
    profile: DistanceProfile,
    detection: Detection,
    frames: tuple[Frame, ...] | list[Frame],
    mount_offset_m: float = 0.0,
) -> DetectionWindow:
    """Locate the camera frames covering a detection's raw space.

    The raw space ends ps_xpos meters behind the vehicle position at report
    time (plus the configured camera mounting offset) and extends length
    meters further back. Each window frame gets a length weight: the stretch
    of raw space between the midpoints to its neighbor frames, clamped to
    the window edges, so the weights always sum to the detection length.
    """
    s_det = profile.distance_at(detection.t_det_us)
    s_end = s_det - detection.ps_xpos_m - mount_offset_m
    s_start = s_end - detection.length_m
    if s_start < -1e-9:
        raise WindowError(
            f"detection {detection.id}: raw space starts {-s_start:.3f} m "
            "before drive start"
        )
    s_start = max(s_start, 0.0)
    if s_end > profile.total_m + 1e-9:
        raise WindowError(
            f"detection {detection.id}: raw space ends past the drive"
        )

    t0 = invert_profile(profile, s_start)
    tend = invert_profile(profile, min(s_end, profile.total_m))

    times = [f.t_us for f in frames]
    lo = bisect_left(times, t0)
    hi = bisect_right(times, tend)
    inside = list(frames[lo:hi])
    if not inside:
        raise WindowError(
            f"detection {detection.id}: no frames in window "
            f"[{t0}, {tend}] us; camera and odometry look desynchronized"
        )

    # Midpoint boundaries between neighbor frames; the outer frames take the
    # window edge instead, which makes the weights tile the raw space.
    bounds = [float(t0)]
    for a, b in zip(inside, inside[1:]):
        bounds.append((a.t_us + b.t_us) / 2.0)
    bounds.append(float(tend))

    window_frames = []
    for i, frame in enumerate(inside):
        w = profile.distance_at(bounds[i + 1]) - profile.distance_at(bounds[i])
        window_frames.append(WindowFrame(frame.frame_id, frame.t_us, w))

    return DetectionWindow(detection.id, t0, tend, tuple(window_frames))
