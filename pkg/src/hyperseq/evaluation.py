"""Evaluation harness: accuracy metrics, counting oracle, sweep runner.

``evaluate`` walks test sessions position by position, always scoring a
prediction before the true window may be learned from (test-then-train),
and gives every user a fresh copy of the adaptive memory so
personalization cannot leak across users.

The counting oracle is the transparent twin of the vector model: exact
window counts per prefix, argmax with the same tie-break. Agreement
between the two, restricted to prefixes whose top count clearly leads,
is how the frequency-vector behavior of queries is verified at scale.

``bayes_optimal_accuracy`` gives the ceiling for synthetic chain data,
so end-to-end accuracy has an absolute reference instead of a vibe.

``run_sweep`` exercises the full hyperparameter grid cell by cell,
appending rows to a CSV as they finish; rerunning skips completed cells,
so an interrupted sweep resumes where it stopped.
"""

from __future__ import annotations

import csv
import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .codebook import build_codebook
from .dataio import Dataset, MarkovSpec, SplitResult, folds_leave_one_user_out, split_disjoint, split_overlapping
from .errors import AdaptationDisabledError, ConfigError, ConvergenceError
from .model import Model, ModelConfig, train

__all__ = [
    "AgreementReport",
    "EvalReport",
    "OracleModel",
    "PredictionEvent",
    "SweepGrid",
    "bayes_optimal_accuracy",
    "build_oracle",
    "evaluate",
    "oracle_agreement",
    "oracle_predict",
    "run_protocol",
    "run_sweep",
    "sliding_window_accuracy",
    "stationary_distribution",
]

STRATEGIES = ("disjoint", "overlapping", "kfold")


@dataclass
class PredictionEvent:
    """One scored prediction within a user's test stream."""

    user_id: str
    session_index: int
    position: int
    predicted: str
    actual: str
    correct: bool
    unseen_prefix: bool


@dataclass
class EvalReport:
    overall_accuracy: float
    per_user_accuracy: dict[str, float]
    fold_mean_accuracy: float | None
    events: list[PredictionEvent]
    skipped_sessions: int
    config: dict


def _accuracy(events: Sequence[PredictionEvent]) -> float:
    if not events:
        return 0.0
    return sum(e.correct for e in events) / len(events)


def _per_user_accuracy(events: Sequence[PredictionEvent]) -> dict[str, float]:
    grouped: dict[str, list[PredictionEvent]] = {}
    for e in events:
        grouped.setdefault(e.user_id, []).append(e)
    return {user: _accuracy(grouped[user]) for user in sorted(grouped)}


def _config_echo(model: Model, adaptive_enabled: bool) -> dict:
    cfg = model.config
    return {
        "dim": cfg.dim,
        "n": cfg.n,
        "shift": cfg.shift,
        "seed": cfg.seed,
        "adaptive": cfg.adaptive,
        "adapt_weight": cfg.adapt_weight,
        "entry_bits": cfg.entry_bits,
        "adaptive_enabled": adaptive_enabled,
    }


def evaluate(
    model: Model,
    test: Dataset,
    adaptive_enabled: bool,
    known_prefixes: set[tuple[str, ...]] | None = None,
) -> EvalReport:
    """Score a model over every test session, test-then-train.

    For each session position from n-1 on, the (n-1)-prefix is queried
    and the event recorded; only afterwards may the true window feed
    adaptation. Each user adapts a private fork of the model, reset at
    the user boundary. The input model itself is never mutated.

    ``known_prefixes`` marks which query prefixes occurred in training;
    without it, only prefixes adapted so far count as seen.
    """
    if adaptive_enabled and not model.config.adaptive:
        raise AdaptationDisabledError("evaluation requested adaptation on a non-adaptive model")
    n = model.config.n
    known = known_prefixes or set()
    events: list[PredictionEvent] = []
    skipped = 0
    for user, records in test.sessions_by_user().items():
        scorer = model.fork() if adaptive_enabled else model
        adapted: set[tuple[str, ...]] = set()
        for record in records:
            states = record.states
            if len(states) < n:
                skipped += 1
                continue
            for pos in range(n - 1, len(states)):
                prefix = tuple(states[pos - n + 1 : pos])
                result = scorer.predict_next(prefix)
                events.append(
                    PredictionEvent(
                        user_id=user,
                        session_index=record.session_index,
                        position=pos,
                        predicted=result.predicted,
                        actual=states[pos],
                        correct=result.predicted == states[pos],
                        unseen_prefix=prefix not in known and prefix not in adapted,
                    )
                )
                if adaptive_enabled:
                    scorer.adapt(states[pos - n + 1 : pos + 1])
                    adapted.add(prefix)
    return EvalReport(
        overall_accuracy=_accuracy(events),
        per_user_accuracy=_per_user_accuracy(events),
        fold_mean_accuracy=None,
        events=events,
        skipped_sessions=skipped,
        config=_config_echo(model, adaptive_enabled),
    )


def sliding_window_accuracy(
    events: Sequence[PredictionEvent],
    window: int,
) -> dict[str, list[tuple[int, float]]]:
    """Windowed accuracy along each user's own prediction stream.

    Emits one series per user; position i (0-based within the stream)
    carries the accuracy over events [i-window+1, i]. Streams shorter
    than the window produce an empty series rather than an error.
    """
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    streams: dict[str, list[int]] = {}
    for e in events:
        streams.setdefault(e.user_id, []).append(1 if e.correct else 0)
    series: dict[str, list[tuple[int, float]]] = {}
    for user in sorted(streams):
        flags = streams[user]
        points = []
        if len(flags) >= window:
            csum = np.concatenate([[0], np.cumsum(flags)])
            for i in range(window - 1, len(flags)):
                points.append((i, float(csum[i + 1] - csum[i - window + 1]) / window))
        series[user] = points
    return series


# -- counting oracle ----------------------------------------------------


@dataclass
class OracleModel:
    """Exact per-prefix continuation counts over the training windows."""

    n: int
    counts: dict[tuple[str, ...], dict[str, int]] = field(default_factory=dict)

    @property
    def total_count(self) -> int:
        return sum(c for by_label in self.counts.values() for c in by_label.values())


def build_oracle(train_data: Dataset | Iterable[Sequence[str]], n: int) -> OracleModel:
    """Count every continuous n-window, exactly."""
    if isinstance(train_data, Dataset):
        sequences: Iterable[Sequence[str]] = train_data.state_sequences()
    else:
        sequences = train_data
    oracle = OracleModel(n=n)
    for states in sequences:
        states = list(states)
        for i in range(len(states) - n + 1):
            prefix = tuple(states[i : i + n - 1])
            target = states[i + n - 1]
            by_label = oracle.counts.setdefault(prefix, {})
            by_label[target] = by_label.get(target, 0) + 1
    return oracle


def oracle_predict(oracle: OracleModel, prefix: Sequence[str]) -> str | None:
    """Count-argmax continuation; ties lexicographic; None if unseen."""
    by_label = oracle.counts.get(tuple(prefix))
    if not by_label:
        return None
    return min(by_label, key=lambda label: (-by_label[label], label))


@dataclass
class AgreementReport:
    considered: int
    agreed: int
    disagreements: list[tuple[tuple[str, ...], str, str, int]]

    @property
    def fraction(self) -> float:
        return self.agreed / self.considered if self.considered else 1.0


def oracle_agreement(
    model: Model,
    oracle: OracleModel,
    prefixes: Iterable[Sequence[str]] | None = None,
    margin: int = 2,
) -> AgreementReport:
    """Fraction of prefixes where the model matches the counting oracle.

    Only prefixes whose top count leads the runner-up by at least
    ``margin`` are considered; on those the oracle is ground truth and
    disagreement measures the model's superposition noise.
    """
    if prefixes is None:
        candidates: Iterable[tuple[str, ...]] = oracle.counts.keys()
    else:
        candidates = (tuple(p) for p in prefixes)
    considered = 0
    agreed = 0
    disagreements = []
    for prefix in candidates:
        by_label = oracle.counts.get(prefix)
        if not by_label:
            continue
        ranked = sorted(by_label.values(), reverse=True)
        gap = ranked[0] - (ranked[1] if len(ranked) > 1 else 0)
        if gap < margin:
            continue
        considered += 1
        expected = oracle_predict(oracle, prefix)
        got = model.predict_next(prefix).predicted
        if got == expected:
            agreed += 1
        else:
            disagreements.append((prefix, got, expected, gap))
    return AgreementReport(considered=considered, agreed=agreed, disagreements=disagreements)


# -- chain reference ----------------------------------------------------


def stationary_distribution(
    transition: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 1_000_000,
) -> np.ndarray:
    """Stationary distribution by damped power iteration.

    Iterates the half-lazy chain (pi + pi.T)/2, which shares fixed
    points with the original but cannot oscillate on periodic chains.
    """
    matrix = np.asarray(transition, dtype=np.float64)
    k = matrix.shape[0]
    pi = np.full(k, 1.0 / k)
    for _ in range(max_iter):
        nxt = 0.5 * (pi + pi @ matrix)
        nxt /= nxt.sum()
        if np.abs(nxt - pi).sum() < tol:
            return nxt
        pi = nxt
    raise ConvergenceError(f"stationary distribution did not converge within {max_iter} iterations")


def bayes_optimal_accuracy(spec: MarkovSpec) -> float:
    """Best achievable next-state accuracy for an order-1 chain.

    Sum over states of pi(s) * max_t T[s, t]: always predicting each
    state's most likely successor, weighted by how often the chain
    visits that state.
    """
    pi = stationary_distribution(spec.transition)
    return float(pi @ spec.transition.max(axis=1))


# -- protocol runner and sweep ------------------------------------------


def run_protocol(
    data: Dataset,
    config: ModelConfig,
    strategy: str,
    adaptive_enabled: bool,
    train_user_fraction: float = 18 / 21,
    train_session_fraction: float = 0.8,
    chronological: bool = False,
    split_seed: int | None = None,
) -> EvalReport:
    """Split, train, and evaluate under one partitioning strategy.

    ``kfold`` trains one model per held-out user and reports the
    unweighted mean of fold accuracies next to the event-weighted
    overall figure; the other strategies produce a single split.
    """
    if strategy not in STRATEGIES:
        raise ConfigError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    seed = config.seed if split_seed is None else split_seed
    codebook = build_codebook(data.label_universe, config.dim, config.seed)

    def run_split(split: SplitResult) -> EvalReport:
        model = train(split.train.state_sequences(), config, codebook)
        oracle = build_oracle(split.train, config.n)
        return evaluate(model, split.test, adaptive_enabled, known_prefixes=set(oracle.counts))

    if strategy == "kfold":
        reports = [run_split(fold) for fold in folds_leave_one_user_out(data)]
        events = [e for r in reports for e in r.events]
        fold_mean = sum(r.overall_accuracy for r in reports) / len(reports)
        return EvalReport(
            overall_accuracy=_accuracy(events),
            per_user_accuracy=_per_user_accuracy(events),
            fold_mean_accuracy=fold_mean,
            events=events,
            skipped_sessions=sum(r.skipped_sessions for r in reports),
            config=reports[0].config,
        )
    if strategy == "disjoint":
        split = split_disjoint(data, train_user_fraction, seed)
    else:
        split = split_overlapping(data, train_session_fraction, seed, chronological)
    return run_split(split)


@dataclass
class SweepGrid:
    """Cartesian product of model hyperparameters, strategies, and seeds."""

    dims: list[int]
    ngram_lengths: list[int]
    shifts: list[int]
    adaptive: list[bool]
    strategies: list[str]
    seeds: list[int]

    def __post_init__(self) -> None:
        for name in ("dims", "ngram_lengths", "shifts", "adaptive", "strategies", "seeds"):
            if not getattr(self, name):
                raise ConfigError(f"sweep grid field {name!r} must be non-empty")
        for strategy in self.strategies:
            if strategy not in STRATEGIES:
                raise ConfigError(f"unknown strategy {strategy!r}")

    @classmethod
    def reference(cls, seeds: Sequence[int] = (0,)) -> "SweepGrid":
        """The full 288-cell grid: 4 dims x 4 lengths x 3 shifts x 2 x 3."""
        return cls(
            dims=[1000, 5000, 10000, 20000],
            ngram_lengths=[3, 5, 7, 9],
            shifts=[2, 4, 6],
            adaptive=[False, True],
            strategies=list(STRATEGIES),
            seeds=list(seeds),
        )

    @classmethod
    def from_json(cls, source: str | Path | dict) -> "SweepGrid":
        if isinstance(source, dict):
            obj = source
        else:
            text = source.read() if hasattr(source, "read") else Path(source).read_text("utf-8")
            obj = json.loads(text)
        try:
            return cls(
                dims=[int(x) for x in obj["dims"]],
                ngram_lengths=[int(x) for x in obj["ngram_lengths"]],
                shifts=[int(x) for x in obj["shifts"]],
                adaptive=[bool(x) for x in obj["adaptive"]],
                strategies=[str(x) for x in obj["strategies"]],
                seeds=[int(x) for x in obj["seeds"]],
            )
        except KeyError as exc:
            raise ConfigError(f"sweep grid config missing key {exc.args[0]!r}") from None

    def cells(self) -> list[tuple[int, int, int, int, bool, str]]:
        return [
            (seed, dim, n, shift, adaptive, strategy)
            for seed, dim, n, shift, adaptive, strategy in itertools.product(
                self.seeds, self.dims, self.ngram_lengths, self.shifts, self.adaptive, self.strategies
            )
        ]


SWEEP_COLUMNS = [
    "seed",
    "dim",
    "n",
    "shift",
    "adaptive",
    "strategy",
    "overall_accuracy",
    "fold_mean_accuracy",
    "events",
    "skipped_sessions",
    "wall_time_ms",
    "status",
]

_WORKER_DATA: dict = {}


def _sweep_worker_init(data: Dataset, options: dict) -> None:
    _WORKER_DATA["data"] = data
    _WORKER_DATA["options"] = options


def _cell_key(cell: tuple) -> str:
    seed, dim, n, shift, adaptive, strategy = cell
    return f"s{seed}_d{dim}_n{n}_c{shift}_a{int(adaptive)}_{strategy}"


def _run_cell(cell: tuple) -> tuple[tuple, dict, dict | None]:
    data: Dataset = _WORKER_DATA["data"]
    options: dict = _WORKER_DATA["options"]
    seed, dim, n, shift, adaptive, strategy = cell
    started = time.perf_counter()
    try:
        config = ModelConfig(
            dim=dim,
            n=n,
            shift=shift,
            seed=seed,
            adaptive=adaptive,
            entry_bits=options["entry_bits"],
        )
    except ConfigError as exc:
        return cell, {"status": f"skipped: {exc}"}, None
    report = run_protocol(
        data,
        config,
        strategy,
        adaptive_enabled=adaptive,
        train_user_fraction=options["train_user_fraction"],
        train_session_fraction=options["train_session_fraction"],
    )
    wall_ms = (time.perf_counter() - started) * 1000.0
    row = {
        "overall_accuracy": f"{report.overall_accuracy:.6f}",
        "fold_mean_accuracy": (
            f"{report.fold_mean_accuracy:.6f}" if report.fold_mean_accuracy is not None else ""
        ),
        "events": len(report.events),
        "skipped_sessions": report.skipped_sessions,
        "wall_time_ms": f"{wall_ms:.1f}",
        "status": "ok",
    }
    series = sliding_window_accuracy(report.events, options["window"]) if adaptive else None
    return cell, row, series


def _completed_cells(csv_path: Path) -> set[tuple]:
    done: set[tuple] = set()
    if not csv_path.exists():
        return done
    with csv_path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            done.add(
                (
                    int(row["seed"]),
                    int(row["dim"]),
                    int(row["n"]),
                    int(row["shift"]),
                    row["adaptive"] == "True",
                    row["strategy"],
                )
            )
    return done


def run_sweep(
    grid: SweepGrid,
    data: Dataset,
    csv_path: str | Path,
    series_dir: str | Path | None = None,
    jobs: int = 1,
    window: int = 30,
    entry_bits: int = 16,
    train_user_fraction: float = 18 / 21,
    train_session_fraction: float = 0.8,
    progress: bool = False,
) -> list[dict]:
    """Run every grid cell, appending one CSV row per cell as it finishes.

    Cells already present in the CSV are skipped, so an interrupted
    sweep resumes with zero recomputation. Invalid cells are recorded
    with a skipped status instead of aborting the sweep. With jobs > 1
    cells run in parallel processes and rows land in completion order.
    """
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    if series_dir is not None:
        series_dir = Path(series_dir)
        series_dir.mkdir(parents=True, exist_ok=True)

    done = _completed_cells(csv_path)
    cells = [c for c in grid.cells() if c not in done]
    options = {
        "entry_bits": entry_bits,
        "train_user_fraction": train_user_fraction,
        "train_session_fraction": train_session_fraction,
        "window": window,
    }

    new_file = not csv_path.exists()
    rows: list[dict] = []
    with csv_path.open("a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        if new_file:
            writer.writeheader()
            fh.flush()

        def record(cell: tuple, partial: dict, series: dict | None) -> None:
            seed, dim, n, shift, adaptive, strategy = cell
            row = {
                "seed": seed,
                "dim": dim,
                "n": n,
                "shift": shift,
                "adaptive": adaptive,
                "strategy": strategy,
                "overall_accuracy": "",
                "fold_mean_accuracy": "",
                "events": "",
                "skipped_sessions": "",
                "wall_time_ms": "",
            }
            row.update(partial)
            writer.writerow(row)
            fh.flush()
            rows.append(row)
            if series is not None and series_dir is not None:
                path = series_dir / f"{_cell_key(cell)}.jsonl"
                with path.open("w") as sfh:
                    for user, points in series.items():
                        sfh.write(json.dumps({"user": user, "series": points}) + "\n")
            if progress:
                print(f"[{len(rows)}/{len(cells)}] {_cell_key(cell)}: {row['status']}", flush=True)

        if jobs <= 1:
            _sweep_worker_init(data, options)
            for cell in cells:
                record(*_run_cell(cell))
        else:
            with ProcessPoolExecutor(
                max_workers=jobs, initializer=_sweep_worker_init, initargs=(data, options)
            ) as pool:
                futures = {pool.submit(_run_cell, cell): cell for cell in cells}
                for future in as_completed(futures):
                    record(*future.result())
    return rows
