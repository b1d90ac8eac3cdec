"""Session datasets: JSONL ingestion, synthetic Markov sessions, splits.

Datasets are JSON lines, one object per session:

    {"user": "u07", "session": 3, "states": ["typing", "idle", ...]}

The synthetic generator stands in for real interaction logs: each user
walks a personal order-1 chain blended between a shared spec and a
user-specific random stochastic matrix, so the best achievable accuracy
is computable in closed form and personalization pressure is tunable.

Three partitioning strategies: whole users held out (disjoint),
per-user session splits (overlapping), and one fold per held-out user.
All are seed-deterministic and session-disjoint by construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DataFormatError,
    EmptyDatasetError,
    InsufficientSessionsError,
    InsufficientUsersError,
)
from .rng import substream

__all__ = [
    "Dataset",
    "MarkovSpec",
    "SessionRecord",
    "SplitResult",
    "folds_leave_one_user_out",
    "generate_synthetic",
    "load_sessions",
    "save_sessions",
    "split_disjoint",
    "split_overlapping",
]

EXCLUSION_MODES = ("splice", "break-session")


@dataclass
class SessionRecord:
    """One user's ordered state sequence for a single session."""

    user_id: str
    session_index: int
    states: list[str]


@dataclass
class Dataset:
    sessions: list[SessionRecord]
    label_universe: set[str]

    def users(self) -> list[str]:
        return sorted({s.user_id for s in self.sessions})

    def sessions_by_user(self) -> dict[str, list[SessionRecord]]:
        """Sessions grouped per user, ordered by session index."""
        grouped: dict[str, list[SessionRecord]] = {}
        for record in self.sessions:
            grouped.setdefault(record.user_id, []).append(record)
        for records in grouped.values():
            records.sort(key=lambda r: r.session_index)
        return {user: grouped[user] for user in sorted(grouped)}

    def state_sequences(self) -> list[list[str]]:
        return [record.states for record in self.sessions]

    def __len__(self) -> int:
        return len(self.sessions)


@dataclass
class SplitResult:
    train: Dataset
    test: Dataset


def _parse_session_line(obj: object, line_no: int) -> SessionRecord:
    if not isinstance(obj, dict):
        raise DataFormatError(f"line {line_no}: expected a JSON object")
    try:
        user = obj["user"]
        session = obj["session"]
        states = obj["states"]
    except KeyError as exc:
        raise DataFormatError(f"line {line_no}: missing key {exc.args[0]!r}") from None
    if not isinstance(user, str) or not user:
        raise DataFormatError(f"line {line_no}: 'user' must be a non-empty string")
    if not isinstance(session, int) or isinstance(session, bool) or session < 0:
        raise DataFormatError(f"line {line_no}: 'session' must be a non-negative integer")
    if not isinstance(states, list) or not states:
        raise DataFormatError(f"line {line_no}: 'states' must be a non-empty list")
    for s in states:
        if not isinstance(s, str) or not s:
            raise DataFormatError(f"line {line_no}: states must be non-empty strings")
    return SessionRecord(user, session, list(states))


def load_sessions(
    source: str | Path | IO[str],
    excluded_labels: Iterable[str] = (),
    exclusion_mode: str = "splice",
) -> Dataset:
    """Read a JSONL session file, dropping the excluded labels.

    ``splice`` deletes excluded states in place so the remaining states
    close ranks; ``break-session`` instead cuts the session at every
    excluded state, keeping fragments as separate sessions (renumbered
    densely per user, since original indices cannot survive the cut).
    Sessions emptied by filtering are dropped.
    """
    if exclusion_mode not in EXCLUSION_MODES:
        raise ConfigError(f"exclusion_mode must be one of {EXCLUSION_MODES}, got {exclusion_mode!r}")
    excluded = set(excluded_labels)

    if hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        lines = Path(source).read_text(encoding="utf-8").splitlines()

    raw: list[SessionRecord] = []
    seen_keys: set[tuple[str, int]] = set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"line {line_no}: invalid JSON ({exc.msg})") from None
        record = _parse_session_line(obj, line_no)
        key = (record.user_id, record.session_index)
        if key in seen_keys:
            raise DataFormatError(f"line {line_no}: duplicate (user, session) pair {key}")
        seen_keys.add(key)
        raw.append(record)

    sessions: list[SessionRecord] = []
    if exclusion_mode == "splice":
        for record in raw:
            states = [s for s in record.states if s not in excluded]
            if states:
                sessions.append(SessionRecord(record.user_id, record.session_index, states))
    else:
        next_index: dict[str, int] = {}
        for record in raw:
            fragment: list[str] = []
            fragments: list[list[str]] = []
            for s in record.states:
                if s in excluded:
                    if fragment:
                        fragments.append(fragment)
                    fragment = []
                else:
                    fragment.append(s)
            if fragment:
                fragments.append(fragment)
            for frag in fragments:
                idx = next_index.get(record.user_id, 0)
                next_index[record.user_id] = idx + 1
                sessions.append(SessionRecord(record.user_id, idx, frag))

    if not sessions:
        raise EmptyDatasetError("no sessions remain after filtering")
    universe = {s for record in sessions for s in record.states}
    return Dataset(sessions=sessions, label_universe=universe)


def save_sessions(dataset: Dataset, destination: str | Path | IO[str]) -> None:
    """Write a dataset back to the JSONL session format."""
    lines = [
        json.dumps({"user": r.user_id, "session": r.session_index, "states": r.states})
        for r in dataset.sessions
    ]
    text = "\n".join(lines) + "\n"
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        Path(destination).write_text(text, encoding="utf-8")


@dataclass
class MarkovSpec:
    """Order-1 chain over named states; rows of ``transition`` sum to 1."""

    labels: tuple[str, ...]
    transition: np.ndarray
    initial: np.ndarray
    order: int = 1

    def __post_init__(self) -> None:
        self.labels = tuple(self.labels)
        if not self.labels:
            raise ConfigError("chain spec needs at least one label")
        if len(set(self.labels)) != len(self.labels):
            raise ConfigError("chain spec labels must be unique")
        if any(not isinstance(l, str) or not l for l in self.labels):
            raise ConfigError("chain spec labels must be non-empty strings")
        if self.order != 1:
            raise ConfigError("only order-1 chains are supported")
        k = len(self.labels)
        self.transition = np.asarray(self.transition, dtype=np.float64)
        self.initial = np.asarray(self.initial, dtype=np.float64)
        if self.transition.shape != (k, k):
            raise ConfigError(f"transition matrix must be {k}x{k}")
        if self.initial.shape != (k,):
            raise ConfigError(f"initial distribution must have length {k}")
        if (self.transition < 0).any() or (self.initial < 0).any():
            raise ConfigError("probabilities must be non-negative")
        if not np.allclose(self.transition.sum(axis=1), 1.0, atol=1e-9):
            raise ConfigError("every transition row must sum to 1")
        if not math.isclose(float(self.initial.sum()), 1.0, abs_tol=1e-9):
            raise ConfigError("initial distribution must sum to 1")

    @classmethod
    def uniform(cls, labels: Sequence[str]) -> "MarkovSpec":
        k = len(labels)
        return cls(
            labels=tuple(labels),
            transition=np.full((k, k), 1.0 / k),
            initial=np.full(k, 1.0 / k),
        )

    @classmethod
    def from_json(cls, source: str | Path | IO[str] | dict) -> "MarkovSpec":
        if isinstance(source, dict):
            obj = source
        else:
            text = source.read() if hasattr(source, "read") else Path(source).read_text("utf-8")
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"chain spec: invalid JSON ({exc.msg})") from None
        try:
            return cls(
                labels=tuple(obj["labels"]),
                transition=np.asarray(obj["transition"], dtype=np.float64),
                initial=np.asarray(obj["initial"], dtype=np.float64),
            )
        except KeyError as exc:
            raise DataFormatError(f"chain spec: missing key {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise DataFormatError(f"chain spec: {exc}") from None

    def to_json(self) -> dict:
        return {
            "labels": list(self.labels),
            "initial": self.initial.tolist(),
            "transition": self.transition.tolist(),
        }


def generate_synthetic(
    spec: MarkovSpec,
    users: int,
    sessions_per_user: int,
    session_len: int,
    seed: int,
    per_user_perturbation: float = 0.0,
) -> Dataset:
    """Sample seeded per-user sessions from personalized chains.

    Each user's transition matrix is (1-rho)*spec + rho*R_u where R_u is
    a user-specific random stochastic matrix (Dirichlet rows) drawn from
    the sub-stream keyed by (seed, user). rho=0 reproduces the spec
    chain exactly for every user.
    """
    if users < 1 or sessions_per_user < 1 or session_len < 1:
        raise ConfigError("users, sessions_per_user, and session_len must all be >= 1")
    rho = float(per_user_perturbation)
    if not 0.0 <= rho <= 1.0:
        raise ConfigError(f"per_user_perturbation must lie in [0, 1], got {rho}")

    k = len(spec.labels)
    sessions: list[SessionRecord] = []
    for u in range(users):
        user_id = f"user{u:02d}"
        rng = substream(seed, "synthetic", user_id)
        personal = rng.dirichlet(np.ones(k), size=k)
        matrix = (1.0 - rho) * spec.transition + rho * personal
        for s in range(sessions_per_user):
            states = [int(rng.choice(k, p=spec.initial))]
            for _ in range(session_len - 1):
                states.append(int(rng.choice(k, p=matrix[states[-1]])))
            sessions.append(
                SessionRecord(user_id, s, [spec.labels[i] for i in states])
            )
    return Dataset(sessions=sessions, label_universe=set(spec.labels))


def _subset(d: Dataset, keep: set[tuple[str, int]]) -> Dataset:
    records = [r for r in d.sessions if (r.user_id, r.session_index) in keep]
    return Dataset(sessions=records, label_universe=set(d.label_universe))


def split_disjoint(d: Dataset, train_user_fraction: float, seed: int) -> SplitResult:
    """Hold whole users out: train and test users never overlap.

    Takes ceil(fraction * users) for training, clamped so both sides
    keep at least one user.
    """
    if not 0.0 < train_user_fraction < 1.0:
        raise ConfigError("train_user_fraction must lie strictly between 0 and 1")
    users = d.users()
    if len(users) < 2:
        raise InsufficientUsersError(f"disjoint split needs >= 2 users, got {len(users)}")
    order = substream(seed, "split-disjoint").permutation(len(users))
    n_train = math.ceil(train_user_fraction * len(users))
    n_train = min(max(n_train, 1), len(users) - 1)
    train_users = {users[i] for i in order[:n_train]}
    train_keys = {(r.user_id, r.session_index) for r in d.sessions if r.user_id in train_users}
    test_keys = {(r.user_id, r.session_index) for r in d.sessions if r.user_id not in train_users}
    return SplitResult(train=_subset(d, train_keys), test=_subset(d, test_keys))


def split_overlapping(
    d: Dataset,
    train_fraction: float,
    seed: int,
    chronological: bool = False,
) -> SplitResult:
    """Split every user's sessions between train and test.

    Per user, floor(fraction * n_u) sessions train (clamped to keep at
    least one session on each side). Sessions are shuffled per (seed,
    user) unless ``chronological``, which takes the earliest sessions
    for training instead.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError("train_fraction must lie strictly between 0 and 1")
    grouped = d.sessions_by_user()
    if not grouped:
        raise EmptyDatasetError("dataset has no sessions")
    train_keys: set[tuple[str, int]] = set()
    test_keys: set[tuple[str, int]] = set()
    for user, records in grouped.items():
        if len(records) < 2:
            raise InsufficientSessionsError(
                f"user {user!r} has {len(records)} session(s); the overlapping split needs >= 2"
            )
        if chronological:
            ordered = list(records)
        else:
            perm = substream(seed, "split-overlapping", user).permutation(len(records))
            ordered = [records[i] for i in perm]
        n_train = int(train_fraction * len(records))
        n_train = min(max(n_train, 1), len(records) - 1)
        for r in ordered[:n_train]:
            train_keys.add((r.user_id, r.session_index))
        for r in ordered[n_train:]:
            test_keys.add((r.user_id, r.session_index))
    return SplitResult(train=_subset(d, train_keys), test=_subset(d, test_keys))


def folds_leave_one_user_out(d: Dataset) -> list[SplitResult]:
    """One fold per user, in sorted user order: that user tests, the rest train."""
    users = d.users()
    if len(users) < 2:
        raise InsufficientUsersError(f"leave-one-user-out needs >= 2 users, got {len(users)}")
    folds = []
    for user in users:
        test_keys = {(r.user_id, r.session_index) for r in d.sessions if r.user_id == user}
        train_keys = {(r.user_id, r.session_index) for r in d.sessions if r.user_id != user}
        folds.append(SplitResult(train=_subset(d, train_keys), test=_subset(d, test_keys)))
    return folds
