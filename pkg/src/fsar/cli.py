"""Command-line front end.

Subcommands: train, eval, ablate, scale-bench, gradcheck, synth.
Exit codes: 0 ok, 2 config error, 3 dimension/compatibility error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .bench import loglog_slope, run_scale_bench
from .config import RunConfig
from .episodic import TrainConfig, evaluate, train
from .errors import (
    ConfigurationError,
    DivergenceError,
    EvaluationError,
    FsarError,
    InconsistencyError,
    ShapeMismatchError,
)
from .interchange import (
    dataset_to_features,
    load_checkpoint,
    load_dataset,
    save_checkpoint,
    write_features,
)
from .model import init_model
from .synthetic import generate_synthetic
from .verification import full_suite

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIMENSION = 3
EXIT_NUMERIC = 4


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    # command-line flags take precedence over file fields
    if getattr(args, "metric", None):
        cfg.metric = args.metric
    if getattr(args, "seed", None) is not None:
        cfg.training.seed = args.seed
    if getattr(args, "episodes", None) is not None:
        cfg.training.episodes = args.episodes
    if getattr(args, "lr", None) is not None:
        cfg.training.lr = args.lr
    if getattr(args, "tasks", None) is not None:
        cfg.protocol.tasks = args.tasks
    if getattr(args, "output_dir", None):
        cfg.output_dir = args.output_dir
    if getattr(args, "strides", None):
        cfg.model.strides = [int(s) for s in args.strides.split(",")]
    for item in getattr(args, "toggle", None) or []:
        name, _, state = item.partition("=")
        if state not in ("on", "off") or not hasattr(cfg.toggles, name):
            raise ConfigurationError(f"bad --toggle value {item!r}")
        setattr(cfg.toggles, name, state == "on")
    cfg.validate()
    return cfg


def _build_dataset(cfg: RunConfig):
    if cfg.dataset.source == "file":
        return load_dataset(cfg.dataset.feature_file)
    return generate_synthetic(cfg.dataset.synthetic, cfg.dataset.seed)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _train_once(cfg: RunConfig, dataset):
    spec = cfg.model_spec()
    params = init_model(spec, cfg.training.seed)
    tc = TrainConfig(episodes=cfg.training.episodes, lr=cfg.training.lr,
                     way=cfg.protocol.way, shot=cfg.protocol.shot,
                     queries=cfg.protocol.queries, seed=cfg.training.seed,
                     milestones=tuple(cfg.training.milestones))
    curve = train(params, dataset, tc, spec)
    return params, curve


def _write_report(report, path: Path):
    path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2)
                    + "\n")


def cmd_train(args) -> int:
    cfg = _load_config(args)
    dataset = _build_dataset(cfg)
    out = _out_dir(cfg)
    params, curve = _train_once(cfg, dataset)
    with open(out / "loss_curve.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "loss"])
        for i, loss in enumerate(curve):
            writer.writerow([i, f"{loss:.17g}"])
    save_checkpoint(out / "checkpoint.starck", params, cfg.to_dict(),
                    step=cfg.training.episodes)
    print(f"trained {cfg.training.episodes} episodes; "
          f"final loss {curve[-1]:.4f}; checkpoint in {out}")
    return EXIT_OK


def _check_checkpoint_dims(params, cfg: RunConfig):
    expected = dict(ad.tree_flatten(init_model(cfg.model_spec(),
                                               cfg.training.seed)))
    got = dict(ad.tree_flatten(params))
    if set(expected) != set(got):
        raise InconsistencyError("checkpoint parameter names do not match config")
    for name, arr in expected.items():
        if got[name].shape != arr.shape:
            raise InconsistencyError(
                f"checkpoint tensor {name} has shape {got[name].shape}, "
                f"config implies {arr.shape}")


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    dataset = _build_dataset(cfg)
    spec = cfg.model_spec()
    if args.checkpoint:
        params, _, _ = load_checkpoint(args.checkpoint)
        _check_checkpoint_dims(params, cfg)
    else:
        params = init_model(spec, cfg.training.seed)
    report = evaluate(params, dataset, cfg.protocol.way, cfg.protocol.shot,
                      cfg.protocol.queries, cfg.protocol.tasks,
                      cfg.protocol.eval_seed, spec)
    out = _out_dir(cfg)
    _write_report(report, out / f"report_{cfg.metric}.json")
    ci = "n/a" if report.ci95_half_width is None else f"{report.ci95_half_width:.4f}"
    print(f"accuracy {report.mean_accuracy:.4f} +/- {ci} "
          f"({report.tasks} tasks, metric={cfg.metric})")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _load_config(args)
    dataset = _build_dataset(cfg)
    out = _out_dir(cfg)
    rows = []
    if cfg.ablate.axis == "strides":
        cells = [("strides=" + "+".join(map(str, g)), {"strides": g})
                 for g in cfg.ablate.stride_grid]
    elif cfg.ablate.axis == "modules":
        grid = cfg.ablate.toggle_grid or [
            {"tcr": a, "tsa": b, "stpr": c}
            for a in (False, True) for b in (False, True) for c in (False, True)]
        cells = [("+".join(k for k, v in sorted(t.items()) if v) or "none", t)
                 for t in grid]
    else:
        raise ConfigurationError(f"unknown ablation axis {cfg.ablate.axis!r}")

    for label, patch in cells:
        cell_cfg = RunConfig.from_dict(cfg.to_dict())
        if "strides" in patch:
            cell_cfg.model.strides = list(patch["strides"])
        else:
            for k, v in patch.items():
                setattr(cell_cfg.toggles, k, v)
        if cell_cfg.toggles.stpr or cell_cfg.toggles.tsa:
            params, _ = _train_once(cell_cfg, dataset)
        else:
            # nothing trainable reaches the matching path; evaluate fresh
            params = init_model(cell_cfg.model_spec(), cell_cfg.training.seed)
        report = evaluate(params, dataset, cell_cfg.protocol.way,
                          cell_cfg.protocol.shot, cell_cfg.protocol.queries,
                          cell_cfg.protocol.tasks, cell_cfg.protocol.eval_seed,
                          cell_cfg.model_spec())
        _write_report(report, out / f"report_{label.replace('=', '_')}.json")
        rows.append((label, report.mean_accuracy, report.ci95_half_width))
        print(f"{label}: {report.mean_accuracy:.4f}")

    with open(out / "ablation_summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["config", "accuracy", "ci95_half_width"])
        for label, acc, ci in rows:
            writer.writerow([label, f"{acc:.6f}",
                             "" if ci is None else f"{ci:.6f}"])
    return EXIT_OK


def cmd_scale_bench(args) -> int:
    cfg = _load_config(args)
    lengths = [int(s) for s in args.lengths.split(",")]
    rows = run_scale_bench(lengths, dim=cfg.model.dim,
                           seed=cfg.training.seed, repeats=args.repeats)
    out = _out_dir(cfg)
    with open(out / "scale_bench.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["frames", "stpr_seconds",
                                                "attention_seconds"])
        writer.writeheader()
        writer.writerows(rows)
    if len(rows) > 1:
        fs = [r["frames"] for r in rows]
        s1 = loglog_slope(fs, [r["stpr_seconds"] for r in rows])
        s2 = loglog_slope(fs, [r["attention_seconds"] for r in rows])
        print(f"refiner log-log slope {s1:.2f}; attention reference {s2:.2f}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    results = full_suite()
    failed = False
    for name, (err, tol) in sorted(results.items()):
        ok = err < tol
        failed |= not ok
        print(f"{'PASS' if ok else 'FAIL'} {name}: rel err {err:.2e} "
              f"(tol {tol:.0e})")
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    dataset = generate_synthetic(cfg.dataset.synthetic, cfg.dataset.seed)
    videos, classes = dataset_to_features(dataset)
    write_features(args.out, videos, classes)
    print(f"wrote {len(videos)} videos / {len(classes)} classes to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsar",
        description="Few-shot action recognition on frame features: "
                    "semantic-temporal refinement, episodic training, "
                    "temporal-alignment matching.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        p.add_argument("--config", required=needs_config,
                       help="JSON run configuration")
        p.add_argument("--metric", choices=["otam", "bimhm"])
        p.add_argument("--seed", type=int)
        p.add_argument("--episodes", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--tasks", type=int)
        p.add_argument("--strides")
        p.add_argument("--output-dir")
        p.add_argument("--toggle", action="append",
                       help="module toggle, e.g. --toggle tsa=off")

    p = sub.add_parser("train", help="episodic training run")
    common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint (or a fresh model)")
    common(p)
    p.add_argument("--checkpoint")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("ablate", help="train+eval over an ablation grid")
    common(p)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("scale-bench", help="frame-length scaling benchmark")
    common(p, needs_config=False)
    p.add_argument("--lengths", default="8,16,32,64,128")
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(fn=cmd_scale_bench)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    common(p, needs_config=False)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("synth", help="write a synthetic dataset feature file")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigurationError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ShapeMismatchError, InconsistencyError) as e:
        print(f"dimension error: {e}", file=sys.stderr)
        return EXIT_DIMENSION
    except (EvaluationError, DivergenceError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except FsarError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
