"""Batch command-line interface wiring the pipeline end to end.

Exit codes: 0 success, 1 runtime failure, 2 usage error.  stdout carries
human-readable summaries only; machine-readable output goes to files.  When
a --seed flag is omitted the WATCHPED_SEED environment variable is consulted
before falling back to 0.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import nn
from .data import SyncError, WindowConfig, parse_episode, sync_sensor_to_frames, write_episode
from .model import (
    ModelParams,
    desk_config,
    load_cnn1_file,
    predict,
    window_probability,
)
from .model.config import ArchConfig
from .synth import generate_suite, read_activity
from .train import (
    TrainConfig,
    activity_streams,
    evaluate_model,
    load_suite,
    long_format_rows,
    read_report_csv,
    split_dataset,
    stratified_report,
    train_full,
    train_sensor_cnn1,
    train_sensor_cnn2,
    windows_from_episode,
    write_report_csv,
)
from .train.loop import cut_stream_windows, evaluate_cnn1
from .v2p import ChannelConfig, STATS_CSV_HEADER, packetize, receive_resync, stats_csv_row, transmit

__all__ = ["main", "build_parser"]


def _default_seed() -> int:
    return int(os.environ.get("WATCHPED_SEED", "0"))


def _load_bundle(path: str | None) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _arch_from(bundle: dict) -> ArchConfig:
    return ArchConfig.from_dict(bundle.get("arch", {}))


def _train_cfg_from(bundle: dict, seed: int | None = None) -> TrainConfig:
    raw = dict(bundle.get("train", {}))
    if seed is not None:
        raw.setdefault("seed", seed)
    fields = {f for f in TrainConfig.__dataclass_fields__}
    return TrainConfig(**{k: v for k, v in raw.items() if k in fields})


def _window_cfg_from(bundle: dict) -> tuple[WindowConfig, int]:
    raw = dict(bundle.get("window", {}))
    stride = int(raw.pop("stride", 25))
    fields = {f for f in WindowConfig.__dataclass_fields__}
    return WindowConfig(**{k: v for k, v in raw.items() if k in fields}), stride


def _episode_dirs(data: Path) -> list[Path]:
    if (data / "meta.json").is_file():
        return [data]
    dirs = sorted(p for p in data.iterdir() if p.is_dir() and (p / "meta.json").is_file())
    if not dirs:
        raise FileNotFoundError(f"{data}: no episode directories found")
    return dirs


def _collect_windows(data: Path, wcfg: WindowConfig, stride: int):
    records = []
    for d in _episode_dirs(data):
        records.extend(windows_from_episode(parse_episode(d), wcfg, stride))
    if not records:
        raise ValueError(f"{data}: no usable observation windows")
    return records


# ---- subcommands ----

def _cmd_gen(args) -> int:
    records = generate_suite(args.n, args.out, args.seed, context_size=args.context_size)
    print(f"generated {len(records)} episodes under {args.out} (seed {args.seed})")
    return 0


def _cmd_ingest(args) -> int:
    dirs = _episode_dirs(Path(args.data))
    bad = 0
    for d in dirs:
        try:
            episode = parse_episode(d)
            note = f"{episode.n_frames} frames, {len(episode.bboxes)} boxes, " \
                   f"{len(episode.poses)} poses, {len(episode.sensor)} samples"
            if args.check:
                sync_sensor_to_frames(episode.sensor, episode.frame_timestamps, 20)
            print(f"ok    {d.name}: {note}")
        except (ValueError, SyncError) as exc:
            bad += 1
            print(f"FAIL  {d.name}: {exc}")
    print(f"{len(dirs) - bad}/{len(dirs)} episodes valid")
    return 1 if bad else 0


def _cmd_sync(args) -> int:
    rows = []
    for d in _episode_dirs(Path(args.data)):
        episode = parse_episode(d)
        ts = np.array([s.timestamp_ms for s in episode.sensor])
        try:
            assignment, _ = sync_sensor_to_frames(episode.sensor, episode.frame_timestamps,
                                                  args.tolerance_ms)
            worst = int(np.max(np.abs(ts[assignment] - episode.frame_timestamps)))
            rows.append([episode.id, episode.n_frames, worst, "ok"])
            print(f"{episode.id}: {episode.n_frames} frames, max |dt| = {worst} ms")
        except SyncError as exc:
            rows.append([episode.id, episode.n_frames, "", f"fail: {exc}"])
            print(f"{episode.id}: SYNC FAILED ({exc})")
    if args.out:
        with Path(args.out).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "frames", "max_abs_dt_ms", "status"])
            writer.writerows(rows)
    return 1 if any(r[3] != "ok" for r in rows) else 0


def _override_cfg(cfg: TrainConfig, bundle: dict, seed: int) -> TrainConfig:
    raw = dict(bundle.get("train", {}))
    raw.setdefault("seed", seed)
    known = {k: v for k, v in raw.items() if k in TrainConfig.__dataclass_fields__}
    return dataclasses.replace(cfg, **known)


def _cmd_train_sensor(args) -> int:
    bundle = _load_bundle(args.config)
    arch = _arch_from(bundle)
    episodes = load_suite(args.data)
    if args.which == "cnn1":
        cfg = _override_cfg(TrainConfig.cnn1_defaults(), bundle, args.seed)
        activities = [read_activity(d) for d in _episode_dirs(Path(args.data))]
        streams = activity_streams(episodes, activities)
        params, history = train_sensor_cnn1(streams, cfg, arch)
        xs, ys = [], []
        for values, labels in streams:
            x, y = cut_stream_windows(values, labels, arch.cnn1_frame, arch.cnn1_frame // 2)
            xs.append(x)
            ys.append(y)
        acc = evaluate_cnn1(params, arch, np.concatenate(xs), np.concatenate(ys))
        nn.save_weights(args.out_weights, dict(params.named("cnn1")))
        print(f"trained activity classifier: {len(history)} epochs, "
              f"final loss {history[-1]:.4f}, training-set accuracy {acc:.3f}")
    else:
        if not args.cnn1_weights:
            raise ValueError("--cnn1-weights is required when training cnn2")
        cfg = _override_cfg(TrainConfig.cnn2_defaults(), bundle, args.seed)
        cnn1 = load_cnn1_file(args.cnn1_weights, arch)
        params, history = train_sensor_cnn2(episodes, cnn1, cfg, arch)
        nn.save_weights(args.out_weights, dict(params.named("cnn2")))
        print(f"trained direction encoder: {len(history)} epochs, final loss {history[-1]:.4f}")
    if args.out_history:
        _write_history(args.out_history, history)
    return 0


def _write_history(path, history) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        for i, loss in enumerate(history):
            writer.writerow([i, f"{loss:.6f}"])


def _cmd_train(args) -> int:
    bundle = _load_bundle(args.config)
    arch = _arch_from(bundle)
    cfg = _train_cfg_from(bundle, seed=args.seed)
    wcfg, stride = _window_cfg_from(bundle)
    records = _collect_windows(Path(args.data), wcfg, stride)
    train_recs, test_recs = split_dataset(records, cfg.test_split, cfg.seed)
    cnn1 = None
    cnn1_path = bundle.get("cnn1_weights")
    if cnn1_path:
        cnn1 = load_cnn1_file(cnn1_path, arch)
    params, history = train_full(train_recs, cfg, arch, cnn1=cnn1)
    params.save(args.out_weights)
    if args.out_history:
        _write_history(args.out_history, history)
    preds = evaluate_model(test_recs, params, cfg.mode)
    hits = sum((p.predicted == "crossing") == (r.label == 1)
               for p, r in zip(preds, test_recs))
    print(f"trained {cfg.mode} model on {len(train_recs)} windows "
          f"({cfg.epochs} epochs, lr {cfg.learning_rate:g}); final BCE {history[-1]:.4f}; "
          f"held-out accuracy {hits / len(test_recs):.3f} on {len(test_recs)} windows")
    return 0


def _cmd_eval(args) -> int:
    bundle = _load_bundle(args.config)
    arch = _arch_from(bundle)
    wcfg, stride = _window_cfg_from(bundle)
    records = _collect_windows(Path(args.data), wcfg, stride)
    params = ModelParams.init(arch, seed=0)
    params.load(args.weights)
    preds = evaluate_model(records, params, args.mode)
    report = stratified_report(records, preds, args.abstention)
    write_report_csv(report, args.out)
    overall = report.row("overall")
    print(f"evaluated {overall.n} windows in mode {args.mode}; "
          f"accuracy {overall.accuracy:.4f}, recall {overall.recall:.4f}, "
          f"{overall.abstained} abstained -> {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    channel = ChannelConfig.from_json(args.channel)
    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    stats_rows = []
    for i, d in enumerate(_episode_dirs(Path(args.data))):
        episode = parse_episode(d)
        packets = packetize(episode.sensor, episode.gps, args.batch_size)
        cfg_i = ChannelConfig(channel.base_latency_ms, channel.jitter_ms,
                              channel.loss_probability, channel.seed + i)
        delivered = transmit(packets, cfg_i)
        stream, stats = receive_resync(delivered, episode.frame_timestamps,
                                       args.tolerance_ms)
        if stream:
            write_episode(episode.with_sensor(stream), out_root / d.name)
        stats_rows.append([episode.id] + stats_csv_row(stats))
        print(f"{episode.id}: delivered {stats.delivered_fraction:.3f}, "
              f"max staleness {stats.max_staleness_ms:.1f} ms, "
              f"{stats.gap_count} gaps, {stats.stale_frames} stale frames")
    with (out_root / "channel_stats.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + STATS_CSV_HEADER)
        writer.writerows(stats_rows)
    return 0


def _cmd_gradcheck(args) -> int:
    from .data import extract_windows
    from .synth import build_scenario, generate_episode

    bundle = _load_bundle(args.config)
    arch = _arch_from(bundle)
    gc = bundle.get("gradcheck", {})
    epsilon = float(gc.get("epsilon", 1e-5))
    max_coords = gc.get("max_coords_per_param", 3)
    threshold = float(gc.get("threshold", 1e-4))

    scenario = build_scenario("close", "sunny", args.seed, episode_id="gradcheck",
                              context_size=arch.context_size)
    episode = generate_episode(scenario)
    _, inp = extract_windows(episode, WindowConfig(m=arch.m), stride=37)[1]
    params = ModelParams.init(arch, seed=args.seed)
    named = params.named_parameters()

    def loss_fn():
        return nn.bce_loss(window_probability(inp, params, "full"), inp.label)

    err = nn.grad_check(loss_fn, named, epsilon=epsilon,
                        max_coords_per_param=max_coords, seed=args.seed)
    print(f"max relative gradient error: {err:.3e} "
          f"({'pass' if err < threshold else 'FAIL'} at {threshold:g})")
    return 0 if err < threshold else 1


def _cmd_report(args) -> int:
    rows = read_report_csv(args.in_path)
    long_rows = long_format_rows(rows)
    with Path(args.plot_data).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stratum", "metric", "value"])
        writer.writerows(long_rows)
    print(f"wrote {len(long_rows)} plot rows to {args.plot_data}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="watchped",
        description="Pedestrian crossing-intention pipeline: synthesize, train, evaluate, simulate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic episode suite")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", required=True)
    p.add_argument("--context-size", type=int, default=32)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("ingest", help="parse episodes and validate invariants")
    p.add_argument("--data", required=True)
    p.add_argument("--check", action="store_true")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("sync", help="report sensor-to-frame alignment per episode")
    p.add_argument("--data", required=True)
    p.add_argument("--tolerance-ms", type=int, default=20)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sync)

    p = sub.add_parser("train-sensor", help="train the sensor-branch CNNs")
    p.add_argument("--data", required=True)
    p.add_argument("--which", choices=["cnn1", "cnn2"], required=True)
    p.add_argument("--out-weights", required=True)
    p.add_argument("--cnn1-weights")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out-history")
    p.set_defaults(func=_cmd_train_sensor)

    p = sub.add_parser("train", help="train the full model")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--out-weights", required=True)
    p.add_argument("--out-history")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate weights and write the stratified report")
    p.add_argument("--data", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--config")
    p.add_argument("--mode", choices=["full", "vision_only", "sensor_only"], default="full")
    p.add_argument("--abstention", choices=["as_not_crossing", "excluded"],
                   default="as_not_crossing")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("simulate", help="run sensor streams through the V2P channel")
    p.add_argument("--data", required=True)
    p.add_argument("--channel", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--batch-size", type=int, default=10)
    p.add_argument("--tolerance-ms", type=int, default=20)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("gradcheck", help="finite-difference check of the full model")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("report", help="convert a report to plot-ready long format")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--plot-data", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
