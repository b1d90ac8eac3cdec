"""Command-line frontend: gen | train | predict | eval | sweep.

Every subcommand is deterministic given its flags; all randomness is
derived from --seed. Human-readable summaries go to stdout, machine
products (datasets, models, CSVs, series) only to files.

Exit codes: 0 success, 1 validation or usage error, 2 data or model
format error, 3 internal error.

Flags may also come from a JSON config file (--config); explicit flags
override file values. ``predict`` can either load a model file locally
or act as a thin client against a running service (--server).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .dataio import MarkovSpec, generate_synthetic, load_sessions, save_sessions
from .codebook import build_codebook
from .errors import (
    AdaptationDisabledError,
    ArityError,
    ConfigError,
    DataFormatError,
    EmptyDatasetError,
    EmptyTrainingError,
    HyperseqError,
    InsufficientSessionsError,
    InsufficientUsersError,
    ModelFormatError,
    UnknownLabelError,
)
from .evaluation import SweepGrid, run_protocol, run_sweep, sliding_window_accuracy
from .model import Model, ModelConfig, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

_USAGE_ERRORS = (
    ConfigError,
    ArityError,
    UnknownLabelError,
    EmptyTrainingError,
    EmptyDatasetError,
    InsufficientUsersError,
    InsufficientSessionsError,
    AdaptationDisabledError,
)
_DATA_ERRORS = (DataFormatError, ModelFormatError)

DEFAULT_LABELS = [f"s{i}" for i in range(9)]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage failures map to exit code 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    p.add_argument("--dim", type=int, default=None, help="hypervector dimensionality (default 10000)")
    p.add_argument("--ngram", type=int, default=None, help="window length n (default 3)")
    p.add_argument("--shift", type=int, default=None, help="cyclic shift step (default 4)")
    p.add_argument("--adaptive", action="store_true", default=None, help="enable the adaptive memory")
    p.add_argument("--adapt-weight", type=int, default=None, help="bundle weight per adaptation event")
    p.add_argument("--entry-bits", type=int, default=None, choices=(8, 16, 32), help="memory entry width")


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=str, default=None, help="JSON file of flag defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hyperseq", description="hyperdimensional next-state prediction")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic session dataset", parents=[])
    gen.add_argument("--spec", type=str, default=None, help="chain spec JSON (default: uniform 9 states)")
    gen.add_argument("--users", type=int, default=None, help="number of users (default 21)")
    gen.add_argument("--sessions", type=int, default=None, help="sessions per user (default 5)")
    gen.add_argument("--len", dest="session_len", type=int, default=None, help="states per session (default 100)")
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--perturbation", type=float, default=None, help="per-user chain blend in [0,1]")
    gen.add_argument("--out", type=str, required=True, help="output JSONL path")
    _add_common_flags(gen)
    gen.set_defaults(func=cmd_gen)

    tr = sub.add_parser("train", help="train a model from a session dataset")
    tr.add_argument("--data", type=str, required=True, help="JSONL session dataset")
    tr.add_argument("--exclude", type=str, default=None, help="comma-separated labels to drop")
    tr.add_argument(
        "--exclusion-mode", choices=("splice", "break-session"), default=None,
        help="how excluded labels reshape sessions (default splice)",
    )
    tr.add_argument("--out", type=str, required=True, help="output model path")
    _add_model_flags(tr)
    _add_common_flags(tr)
    tr.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="predict the next state for a prefix")
    pr.add_argument("--model", type=str, default=None, help="model file path")
    pr.add_argument("--prefix", type=str, default=None, help="comma-separated (n-1)-prefix")
    pr.add_argument("--labels", action="store_true", help="print the label set as a JSON array and exit")
    pr.add_argument("--server", type=str, default=None, help="service base URL for thin-client mode")
    pr.add_argument("--model-id", type=str, default=None, help="model id on the service")
    _add_common_flags(pr)
    pr.set_defaults(func=cmd_predict)

    ev = sub.add_parser("eval", help="split, train, and evaluate under one strategy")
    ev.add_argument("--data", type=str, required=True)
    ev.add_argument("--model", type=str, default=None, help="model file supplying the configuration")
    ev.add_argument("--strategy", choices=("disjoint", "overlapping", "kfold"), default=None)
    ev.add_argument("--train-user-fraction", type=float, default=None)
    ev.add_argument("--train-session-fraction", type=float, default=None)
    ev.add_argument("--chronological", action="store_true", default=None,
                    help="overlapping split takes earliest sessions instead of shuffling")
    ev.add_argument("--window", type=int, default=None, help="sliding-window size (default 30)")
    ev.add_argument("--exclude", type=str, default=None)
    ev.add_argument("--exclusion-mode", choices=("splice", "break-session"), default=None)
    ev.add_argument("--out", type=str, required=True, help="report CSV path")
    _add_model_flags(ev)
    _add_common_flags(ev)
    ev.set_defaults(func=cmd_eval)

    sw = sub.add_parser("sweep", help="run a hyperparameter grid over a dataset")
    sw.add_argument("--data", type=str, required=True)
    sw.add_argument("--grid", type=str, default=None, help="grid JSON (default: full reference grid)")
    sw.add_argument("--out-dir", type=str, required=True)
    sw.add_argument("--jobs", type=int, default=None, help="parallel cells (default 1)")
    sw.add_argument("--window", type=int, default=None)
    sw.add_argument("--seed", type=int, default=None, help="grid seed when no grid file names seeds")
    sw.add_argument("--entry-bits", type=int, default=None, choices=(8, 16, 32))
    sw.add_argument("--progress", action="store_true", help="print one line per finished cell")
    _add_common_flags(sw)
    sw.set_defaults(func=cmd_sweep)

    return parser


def _load_config_file(args: argparse.Namespace) -> dict:
    path = getattr(args, "config", None)
    if not path:
        return {}
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"config file {path}: invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise DataFormatError(f"config file {path}: expected a JSON object")
    return obj


def _resolve(args: argparse.Namespace, file_cfg: dict, key: str, default):
    value = getattr(args, key, None)
    if value is None:
        value = file_cfg.get(key, default)
    return value


def _model_config(args: argparse.Namespace, file_cfg: dict) -> ModelConfig:
    return ModelConfig(
        dim=int(_resolve(args, file_cfg, "dim", 10000)),
        n=int(_resolve(args, file_cfg, "ngram", 3)),
        shift=int(_resolve(args, file_cfg, "shift", 4)),
        seed=int(_resolve(args, file_cfg, "seed", 0)),
        adaptive=bool(_resolve(args, file_cfg, "adaptive", False)),
        adapt_weight=int(_resolve(args, file_cfg, "adapt_weight", 1)),
        entry_bits=int(_resolve(args, file_cfg, "entry_bits", 16)),
    )


def _excluded(args: argparse.Namespace, file_cfg: dict) -> set[str]:
    raw = _resolve(args, file_cfg, "exclude", "")
    return {s.strip() for s in raw.split(",") if s.strip()} if raw else set()


def cmd_gen(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args)
    spec_path = _resolve(args, file_cfg, "spec", None)
    spec = MarkovSpec.from_json(spec_path) if spec_path else MarkovSpec.uniform(DEFAULT_LABELS)
    users = int(_resolve(args, file_cfg, "users", 21))
    sessions = int(_resolve(args, file_cfg, "sessions", 5))
    session_len = int(_resolve(args, file_cfg, "session_len", 100))
    seed = int(_resolve(args, file_cfg, "seed", 0))
    rho = float(_resolve(args, file_cfg, "perturbation", 0.0))
    dataset = generate_synthetic(spec, users, sessions, session_len, seed, rho)
    save_sessions(dataset, args.out)
    print(f"wrote {len(dataset)} sessions for {len(dataset.users())} users to {args.out}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args)
    config = _model_config(args, file_cfg)
    mode = _resolve(args, file_cfg, "exclusion_mode", "splice")
    data = load_sessions(args.data, _excluded(args, file_cfg), mode)
    codebook = build_codebook(data.label_universe, config.dim, config.seed)
    started = time.perf_counter()
    model = train(data.state_sequences(), config, codebook)
    wall_ms = (time.perf_counter() - started) * 1000.0
    model.save(args.out)
    print(f"trained on {model.train_ngram_count} windows in {wall_ms:.1f} ms")
    print(f"saved model ({config.dim} dims, n={config.n}) to {args.out}")
    return EXIT_OK


def _predict_remote(args: argparse.Namespace) -> int:
    import httpx

    if not args.model_id:
        raise ConfigError("--server mode needs --model-id")
    base = args.server.rstrip("/")
    if args.labels:
        resp = httpx.get(f"{base}/models/{args.model_id}")
        resp.raise_for_status()
        print(json.dumps(resp.json()["labels"]))
        return EXIT_OK
    if not args.prefix:
        raise ConfigError("predict needs --prefix")
    prefix = [s.strip() for s in args.prefix.split(",") if s.strip()]
    resp = httpx.post(f"{base}/models/{args.model_id}/predict", json={"prefix": prefix})
    if resp.status_code != 200:
        raise HyperseqError(f"service error {resp.status_code}: {resp.text}")
    body = resp.json()
    print(body["predicted"])
    for label, score in sorted(body["scores"].items(), key=lambda kv: (-kv[1], kv[0])):
        print(f"{label}\t{score:.6f}")
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    if args.server:
        return _predict_remote(args)
    if not args.model:
        raise ConfigError("predict needs --model (or --server with --model-id)")
    model = Model.load(args.model)
    if args.labels:
        print(json.dumps(model.codebook.label_list()))
        return EXIT_OK
    if not args.prefix:
        raise ConfigError("predict needs --prefix")
    prefix = [s.strip() for s in args.prefix.split(",") if s.strip()]
    result = model.predict_next(prefix)
    print(result.predicted)
    for label, score in sorted(result.scores.items(), key=lambda kv: (-kv[1], kv[0])):
        print(f"{label}\t{score:.6f}")
    return EXIT_OK


def _write_eval_csv(path: Path, report, strategy: str) -> None:
    lines = ["scope,name,events,correct,accuracy"]
    per_user_events: dict[str, list] = {}
    for e in report.events:
        per_user_events.setdefault(e.user_id, []).append(e)
    for user in sorted(per_user_events):
        evs = per_user_events[user]
        correct = sum(e.correct for e in evs)
        lines.append(f"user,{user},{len(evs)},{correct},{correct / len(evs):.6f}")
    total_correct = sum(e.correct for e in report.events)
    lines.append(f"overall,,{len(report.events)},{total_correct},{report.overall_accuracy:.6f}")
    if strategy == "kfold" and report.fold_mean_accuracy is not None:
        lines.append(f"fold_mean,,,,{report.fold_mean_accuracy:.6f}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_eval(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args)
    if args.model:
        # The model file acts as the configuration carrier; each split or
        # fold retrains on its own training part so no evaluation ever
        # scores data its model saw.
        config = Model.load(args.model).config
    else:
        config = _model_config(args, file_cfg)
    strategy = _resolve(args, file_cfg, "strategy", "disjoint")
    mode = _resolve(args, file_cfg, "exclusion_mode", "splice")
    data = load_sessions(args.data, _excluded(args, file_cfg), mode)
    window = int(_resolve(args, file_cfg, "window", 30))
    adaptive_enabled = bool(_resolve(args, file_cfg, "adaptive", False))
    report = run_protocol(
        data,
        config,
        strategy,
        adaptive_enabled=adaptive_enabled,
        train_user_fraction=float(_resolve(args, file_cfg, "train_user_fraction", 18 / 21)),
        train_session_fraction=float(_resolve(args, file_cfg, "train_session_fraction", 0.8)),
        chronological=bool(_resolve(args, file_cfg, "chronological", False)),
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_eval_csv(out, report, strategy)
    print(f"overall accuracy {report.overall_accuracy:.4f} over {len(report.events)} events "
          f"({report.skipped_sessions} sessions too short)")
    if strategy == "kfold" and report.fold_mean_accuracy is not None:
        print(f"fold mean accuracy {report.fold_mean_accuracy:.4f}")
    if adaptive_enabled:
        series = sliding_window_accuracy(report.events, window)
        series_path = out.with_name(out.stem + "_sliding.jsonl")
        with series_path.open("w") as fh:
            for user, points in series.items():
                fh.write(json.dumps({"user": user, "series": points}) + "\n")
        print(f"sliding-window series written to {series_path}")
    print(f"report written to {out}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args)
    data = load_sessions(args.data)
    grid_path = _resolve(args, file_cfg, "grid", None)
    if grid_path:
        grid = SweepGrid.from_json(grid_path)
    else:
        grid = SweepGrid.reference(seeds=[int(_resolve(args, file_cfg, "seed", 0))])
    out_dir = Path(args.out_dir)
    rows = run_sweep(
        grid,
        data,
        csv_path=out_dir / "sweep.csv",
        series_dir=out_dir / "series",
        jobs=int(_resolve(args, file_cfg, "jobs", 1)),
        window=int(_resolve(args, file_cfg, "window", 30)),
        entry_bits=int(_resolve(args, file_cfg, "entry_bits", 16)),
        progress=bool(args.progress),
    )
    skipped = sum(1 for r in rows if r["status"] != "ok")
    print(f"completed {len(rows)} cells ({skipped} skipped) -> {out_dir / 'sweep.csv'}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except HyperseqError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
