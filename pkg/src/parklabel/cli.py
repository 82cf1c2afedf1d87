"""Console driver: batch analysis, threshold sweeps, scenario generation.

Ties ingest, kinematics, scoring, decision and metrics together. Every
subcommand is non-interactive given flags; `guide` wraps the same paths in
prompts for terminal use. Exit codes: 0 ok, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import ingest, scenario
from .classifier import (
    RecordedScores,
    SyntheticNoiseModel,
    SyntheticScores,
    score_detection,
)
from .decision import DecisionConfig, decide
from .ingest import BundleError, BundleFormatError, discover_bundles, read_bundle
from .kinematics import WindowError, build_profile, compute_window
from .metrics import (
    ConfusionTable,
    EffortModel,
    SweepItem,
    effort,
    lc_sweep,
    render_report,
    render_sweep_csv,
    tabulate,
)
from .model import (
    DriveBundle,
    LABEL_CROSS,
    LABEL_PARKING,
    LABEL_PARKING_LC,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class AnalysisError(Exception):
    """A bundle could not be analyzed; other bundles continue."""


@dataclass
class DriveAnalysis:
    """Everything the reports and the review service need for one drive."""

    bundle: DriveBundle
    config: DecisionConfig
    outcomes: dict[int, object]
    windows: dict[int, object]
    records: dict[int, list]
    frame_truth: dict[int, str] | None
    table: ConfusionTable | None

    @property
    def n_reviewable(self) -> int:
        return sum(1 for o in self.outcomes.values() if o.label != LABEL_CROSS)

    @property
    def n_flagged(self) -> int:
        return sum(1 for o in self.outcomes.values() if o.flagged())


def analyze_drive(
    bundle: DriveBundle,
    config: DecisionConfig,
    provider_kind: str = "recorded",
    noise: SyntheticNoiseModel | None = None,
    frame_truth: dict[int, str] | None = None,
    require_truth: bool = False,
) -> DriveAnalysis:
    profile = build_profile(bundle.odometry)

    if provider_kind == "recorded":
        if not bundle.recorded_scores:
            raise AnalysisError(
                f"{bundle.drive_id}: recorded provider needs a scores table"
            )
        provider = RecordedScores(bundle.recorded_scores)
    elif provider_kind == "synthetic":
        if frame_truth is None:
            raise AnalysisError(
                f"{bundle.drive_id}: synthetic provider needs per-frame truth "
                f"({scenario.FRAME_TRUTH_CSV})"
            )
        provider = SyntheticScores(noise or SyntheticNoiseModel())
    else:
        raise AnalysisError(f"unknown provider {provider_kind!r}")

    outcomes = {}
    windows = {}
    records = {}
    for det in bundle.detections:
        try:
            window = compute_window(profile, det, bundle.frames)
        except WindowError as exc:
            raise AnalysisError(
                f"{bundle.drive_id}: detection {det.id}: {exc}"
            ) from exc
        recs = score_detection(provider, window, frame_truth)
        windows[det.id] = window
        records[det.id] = recs
        outcomes[det.id] = decide(det, recs, config)

    table = None
    if bundle.ground_truth is not None:
        labels = {i: o.label for i, o in outcomes.items()}
        try:
            table = tabulate(labels, bundle.ground_truth)
        except ValueError as exc:
            raise AnalysisError(f"{bundle.drive_id}: {exc}") from exc
    elif require_truth:
        raise AnalysisError(f"{bundle.drive_id}: no ground truth in bundle")

    return DriveAnalysis(
        bundle=bundle,
        config=config,
        outcomes=outcomes,
        windows=windows,
        records=records,
        frame_truth=frame_truth,
        table=table,
    )


def _load_one(path: Path, args, config: DecisionConfig) -> DriveAnalysis:
    try:
        bundle = read_bundle(path)
    except (BundleFormatError, BundleError, OSError) as exc:
        raise AnalysisError(f"{path}: {exc}") from exc
    frame_truth = scenario.read_frame_truth(path)
    noise = SyntheticNoiseModel(
        seed=args.seed,
        flip_prob=args.flip_prob,
        concentration=args.concentration,
    )
    try:
        return analyze_drive(
            bundle,
            config,
            provider_kind=args.provider,
            noise=noise,
            frame_truth=frame_truth,
            require_truth=args.truth,
        )
    except AnalysisError as exc:
        raise AnalysisError(f"{path}: {exc}") from exc


def _analyze_paths(args, config: DecisionConfig):
    """Analyze every requested bundle, collecting per-path failures."""
    try:
        paths = discover_bundles(args.paths)
    except (FileNotFoundError, BundleFormatError) as exc:
        raise AnalysisError(str(exc)) from exc

    analyses: list[DriveAnalysis | None] = [None] * len(paths)
    failures: list[tuple[Path, str]] = []
    jobs = max(1, args.jobs)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = {
            pool.submit(_load_one, path, args, config): i
            for i, path in enumerate(paths)
        }
        for future, i in futures.items():
            try:
                analyses[i] = future.result()
            except AnalysisError as exc:
                failures.append((paths[i], str(exc)))
    done = [a for a in analyses if a is not None]
    return done, failures


def _timestamp(args) -> str:
    if args.pin_timestamp is not None:
        return args.pin_timestamp
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _effort_inputs(analyses) -> tuple[int, int, float]:
    n_lc = sum(a.n_flagged for a in analyses)
    n_total = sum(a.n_reviewable for a in analyses)
    duration_s = sum(a.bundle.duration_s for a in analyses)
    return n_lc, n_total, duration_s


def _outcomes_csv(analyses) -> str:
    lines = ["drive_id,detection_id,label,confidence,flagged,rule_trace"]
    for a in analyses:
        for det_id in sorted(a.outcomes):
            o = a.outcomes[det_id]
            lines.append(
                f"{a.bundle.drive_id},{det_id},{o.label:g},{o.confidence!r},"
                f"{int(o.flagged())},{';'.join(o.rule_trace)}"
            )
    return "\n".join(lines) + "\n"


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    )


def _build_report(analyses, effort_model: EffortModel, generated_at: str):
    tables = [(a.bundle.drive_id, a.table) for a in analyses if a.table]
    n_lc, n_total, duration_s = _effort_inputs(analyses)
    effort_result = None
    if n_total and duration_s > 0:
        effort_result = effort(n_lc, n_total, duration_s, effort_model)
    if tables:
        payload, text = render_report(
            tables, effort_result=effort_result, generated_at=generated_at
        )
    else:
        payload = {
            "generated_at": generated_at,
            "drive_ids": [a.bundle.drive_id for a in analyses],
        }
        if effort_result is not None:
            payload["effort"] = dataclasses.asdict(effort_result)
        text = ""
    payload["n_detections"] = sum(len(a.outcomes) for a in analyses)
    payload["n_flagged"] = n_lc
    summary = (
        f"{payload['n_detections']} detections in {len(analyses)} drives, "
        f"{n_lc} flagged for review"
    )
    text = (text + "\n" + summary + "\n") if text else summary + "\n"
    return payload, text


def _sweep_items(analyses) -> list[SweepItem]:
    from .model import TRUTH_CROSS

    items = []
    for a in analyses:
        truth = a.bundle.ground_truth or {}
        for det_id, outcome in a.outcomes.items():
            if outcome.label == LABEL_CROSS:
                continue
            t = truth.get(det_id)
            if t is None or t == TRUTH_CROSS:
                continue
            raw = (
                1.0
                if outcome.label in (LABEL_PARKING, LABEL_PARKING_LC)
                else 0.0
            )
            items.append(SweepItem(outcome.confidence, raw, t))
    return items


def _decision_config(args, file_cfg: dict) -> DecisionConfig:
    config = DecisionConfig(**file_cfg.get("decision", {}))
    overrides = {}
    if args.lc_threshold is not None:
        overrides["lc_threshold"] = args.lc_threshold
    if args.length_weighted is not None:
        overrides["length_weighted_average"] = args.length_weighted
    return dataclasses.replace(config, **overrides) if overrides else config


def _effort_model(file_cfg: dict) -> EffortModel:
    return EffortModel(**file_cfg.get("effort", {}))


def _file_config(args) -> dict:
    if not args.config:
        return {}
    try:
        raw = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise AnalysisError(f"config {args.config}: {exc}") from exc
    if not isinstance(raw, dict):
        raise AnalysisError(f"config {args.config}: expected a JSON object")
    return raw


def cmd_analyze(args) -> int:
    try:
        file_cfg = _file_config(args)
        config = _decision_config(args, file_cfg)
        effort_model = _effort_model(file_cfg)
        analyses, failures = _analyze_paths(args, config)
    except AnalysisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TypeError, ValueError) as exc:
        print(f"error: bad configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE

    for path, message in failures:
        print(f"error: {message}", file=sys.stderr)

    if analyses:
        payload, text = _build_report(analyses, effort_model, _timestamp(args))
        print(text, end="")
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            _write_json(out / "report.json", payload)
            (out / "report.txt").write_text(text)
            (out / "outcomes.csv").write_text(_outcomes_csv(analyses))

    if failures:
        return EXIT_DATA
    if args.serve:
        return _serve_analyses(analyses, args)
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        file_cfg = _file_config(args)
        config = _decision_config(args, file_cfg)
        effort_model = _effort_model(file_cfg)
        args.truth = True
        analyses, failures = _analyze_paths(args, config)
    except AnalysisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TypeError, ValueError) as exc:
        print(f"error: bad configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE

    for path, message in failures:
        print(f"error: {message}", file=sys.stderr)
    if failures or not analyses:
        if not analyses:
            print("error: no analyzable bundles", file=sys.stderr)
        return EXIT_DATA

    if args.thresholds:
        try:
            thresholds = [float(x) for x in args.thresholds.split(",")]
        except ValueError:
            print("error: bad --thresholds list", file=sys.stderr)
            return EXIT_USAGE
    else:
        thresholds = []
        t = args.lo
        while t <= args.hi + 1e-9:
            thresholds.append(round(t, 10))
            t += args.step

    items = _sweep_items(analyses)
    _, _, duration_s = _effort_inputs(analyses)
    points = lc_sweep(items, thresholds, duration_s, effort_model)
    csv_text = render_sweep_csv(points)
    print(csv_text, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(csv_text)
    return EXIT_OK


def _serve_analyses(analyses, args) -> int:
    # Imported on use: keeps plain batch runs free of HTTP dependencies.
    from . import review

    state = review.ReviewState(analyses, labels_path=args.labels)
    print(f"review service on http://{args.host}:{args.port}/", file=sys.stderr)
    try:
        review.serve(state, host=args.host, port=args.port)
    except (OSError, SystemExit) as exc:
        print(f"error: server failed to start: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def cmd_serve(args) -> int:
    try:
        file_cfg = _file_config(args)
        config = _decision_config(args, file_cfg)
        analyses, failures = _analyze_paths(args, config)
    except AnalysisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    for path, message in failures:
        print(f"error: {message}", file=sys.stderr)
    if failures or not analyses:
        return EXIT_DATA
    return _serve_analyses(analyses, args)


def cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    specs = []
    if args.spec:
        try:
            specs.append(scenario.load_scenario(args.spec))
        except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
            print(f"error: scenario spec {args.spec}: {exc}", file=sys.stderr)
            return EXIT_DATA
    elif args.preset == "traffic-light":
        specs.append(scenario.traffic_light_scenario())
    elif args.preset == "rescue":
        specs.append(scenario.rescue_scenario())
    else:
        for k in range(args.count):
            specs.append(scenario.random_scenario(args.seed + k))

    noise = SyntheticNoiseModel(
        seed=args.seed,
        flip_prob=args.flip_prob,
        concentration=args.concentration,
    )
    for spec in specs:
        generated = scenario.generate(
            spec.layout,
            spec.speed,
            frame_period_ms=spec.frame_period_ms,
            seed=spec.seed,
            drive_id=spec.drive_id,
            noise=noise,
        )
        target = out / spec.drive_id
        target.mkdir(parents=True, exist_ok=True)
        ingest.write_bundle(generated.bundle, target)
        scenario.write_frame_truth(target, generated.frame_truth)
        _write_json(target / "scenario.json", scenario.dump_scenario(spec))
        print(target)
    return EXIT_OK


def _prompt(text: str, default: str | None = None) -> str:
    """EOF counts as accepting the default; None default lets EOF escape."""
    try:
        answer = input(text).strip()
    except EOFError:
        if default is None:
            raise
        print()
        return default
    return answer or (default or "")


def cmd_guide(args) -> int:
    print("parklabel guided analysis (blank answers take the default)")
    try:
        while True:
            raw = _prompt("work directory [.]: ") or "."
            workdir = Path(raw)
            if workdir.is_dir():
                break
            print(f"  {raw} is not a directory, try again")
    except EOFError:
        print("\naborted", file=sys.stderr)
        return EXIT_USAGE

    while True:
        names = _prompt("bundle names, space separated [all]: ", default="")
        if not names:
            paths = [str(workdir)]
            break
        candidates = [workdir / n for n in names.split()]
        missing = [str(p) for p in candidates if not p.is_dir()]
        if missing:
            print(f"  not found: {', '.join(missing)}, try again")
            continue
        paths = [str(p) for p in candidates]
        break

    while True:
        action = _prompt("action (analyze, sweep, quit) [analyze]: ",
                         default="analyze") or "analyze"
        if action in ("analyze", "sweep", "quit"):
            break
        print(f"  unknown action {action!r}, try again")

    if action == "quit":
        return EXIT_OK
    argv = [action] + paths
    if args.lc_threshold is not None:
        argv += ["--lc-threshold", str(args.lc_threshold)]
    if args.length_weighted is not None:
        argv += ["--length-weighted" if args.length_weighted
                 else "--no-length-weighted"]
    return main(argv)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage problems by default; this tool reserves 2
    # for data errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser, with_paths: bool = True) -> None:
    if with_paths:
        p.add_argument("paths", nargs="+", help="bundle directories")
    p.add_argument("--config", help="JSON config file (decision/effort)")
    p.add_argument("--lc-threshold", type=float, default=None)
    p.add_argument("--length-weighted", action=argparse.BooleanOptionalAction,
                   default=None)
    p.add_argument("--provider", choices=("recorded", "synthetic"),
                   default="recorded")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--flip-prob", type=float, default=0.0)
    p.add_argument("--concentration", type=float, default=40.0)
    p.add_argument("--out", help="directory for report files")
    p.add_argument("--jobs", type=int, default=4)
    p.add_argument("--pin-timestamp", default=None,
                   help="fixed generated_at value for reproducible reports")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="parklabel",
                     description="ground-truth analysis for parking detection")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[], help="batch-analyze bundles")
    _add_common(p)
    p.add_argument("--truth", action="store_true",
                   help="require ground truth and emit confusion metrics")
    p.add_argument("--serve", action="store_true",
                   help="start the review service after analysis")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--labels", default=None,
                   help="JSON-lines audit file for review labels")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="vary the low-confidence threshold")
    _add_common(p)
    p.add_argument("--lo", type=float, default=0.5)
    p.add_argument("--hi", type=float, default=1.0)
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--thresholds", default=None,
                   help="comma-separated explicit threshold list")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("serve", help="serve analysis for human review")
    _add_common(p)
    p.add_argument("--truth", action="store_true")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--labels", default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("gen", help="generate synthetic scenario bundles")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--preset", choices=("traffic-light", "rescue"))
    p.add_argument("--spec", help="scenario JSON file")
    p.add_argument("--flip-prob", type=float, default=0.0)
    p.add_argument("--concentration", type=float, default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("guide", help="interactive prompts around analyze")
    p.add_argument("--lc-threshold", type=float, default=None)
    p.add_argument("--length-weighted", action=argparse.BooleanOptionalAction,
                   default=None)
    p.set_defaults(func=cmd_guide)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
