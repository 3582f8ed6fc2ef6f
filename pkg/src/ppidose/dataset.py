"""Episode records, CSV persistence, and sliding-window tensor extraction.

An episode is the hourly log of one patient: meal intensity, administered
dose, and the two reported scores, plus the simulation-only acid trace.
The acid column is ground truth the predictor must never see: window
extraction takes only the observable columns, and CSV output includes
acid only on request.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ShapeMismatchError
from .forecast.model import normalize_scores

CSV_COLUMNS = ("t_hours", "meal", "dose", "reflux", "digestion")
HIDDEN_COLUMN = "acid"


@dataclass
class EpisodeRecord:
    """Hourly time series for one patient; ``acid`` is hidden ground truth."""

    patient_id: int
    meal: np.ndarray
    dose: np.ndarray
    reflux: np.ndarray
    digestion: np.ndarray
    acid: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        n = len(self.meal)
        for name in ("dose", "reflux", "digestion"):
            if len(getattr(self, name)) != n:
                raise ShapeMismatchError(f"episode column {name} length differs",
                                         expected=n, actual=len(getattr(self, name)))
        if self.acid is not None and len(self.acid) != n:
            raise ShapeMismatchError("episode acid length differs",
                                     expected=n, actual=len(self.acid))

    def __len__(self) -> int:
        return len(self.meal)


def write_episode_csv(episode: EpisodeRecord, path, include_hidden: bool = False) -> None:
    path = Path(path)
    columns = CSV_COLUMNS + ((HIDDEN_COLUMN,) if include_hidden else ())
    if include_hidden and episode.acid is None:
        raise ConfigurationError("episode has no acid trace to include")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for h in range(len(episode)):
            row = [h, repr(float(episode.meal[h])), repr(float(episode.dose[h])),
                   int(episode.reflux[h]), int(episode.digestion[h])]
            if include_hidden:
                row.append(repr(float(episode.acid[h])))
            writer.writerow(row)


def read_episode_csv(path, patient_id: int = 0) -> EpisodeRecord:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header not in (CSV_COLUMNS, CSV_COLUMNS + (HIDDEN_COLUMN,)):
            raise ConfigurationError(f"{path}: unexpected episode header {header}")
        has_acid = len(header) == len(CSV_COLUMNS) + 1
        rows = list(reader)
    meal = np.array([float(r[1]) for r in rows])
    dose = np.array([float(r[2]) for r in rows])
    reflux = np.array([int(r[3]) for r in rows], dtype=np.int64)
    digestion = np.array([int(r[4]) for r in rows], dtype=np.int64)
    acid = np.array([float(r[5]) for r in rows]) if has_acid else None
    return EpisodeRecord(patient_id=patient_id, meal=meal, dose=dose,
                         reflux=reflux, digestion=digestion, acid=acid)


def window_count(n_hours: int, t_hist: int, t_fut: int, stride: int) -> int:
    span = t_hist + t_fut
    if n_hours < span:
        return 0
    return (n_hours - span) // stride + 1


def extract_windows(episode: EpisodeRecord, t_hist: int, t_fut: int, stride: int,
                    meal_max: float, dose_max: float):
    """Normalized (hist, inputs, targets) tensors from the observable columns.

    The acid trace is structurally excluded: only meal, dose and the two
    reported scores are read.
    """
    if meal_max <= 0 or dose_max <= 0:
        raise ConfigurationError("normalization maxima must be > 0")
    n = window_count(len(episode), t_hist, t_fut, stride)
    span = t_hist + t_fut
    scores = np.stack([normalize_scores(episode.reflux),
                       normalize_scores(episode.digestion)], axis=1)
    inputs_full = np.stack([episode.meal / meal_max,
                            episode.dose / dose_max], axis=1)
    hist = np.empty((n, t_hist, 2))
    inputs = np.empty((n, span, 2))
    targets = np.empty((n, t_fut, 2))
    for w in range(n):
        start = w * stride
        hist[w] = scores[start:start + t_hist]
        inputs[w] = inputs_full[start:start + span]
        targets[w] = scores[start + t_hist:start + span]
    return hist, inputs, targets


@dataclass
class WindowDataset:
    """Pooled normalized windows with per-window patient ids."""

    hist: np.ndarray        # [N, t_hist, 2]
    inputs: np.ndarray      # [N, t_hist + t_fut, 2]
    targets: np.ndarray     # [N, t_fut, 2]
    patient_ids: np.ndarray  # [N]
    meal_max: float
    dose_max: float

    def __len__(self) -> int:
        return self.hist.shape[0]

    @classmethod
    def from_episodes(cls, episodes, t_hist: int, t_fut: int, stride: int,
                      meal_max: float | None = None,
                      dose_max: float | None = None) -> "WindowDataset":
        """Window every episode; normalization maxima default to the data maxima."""
        if not episodes:
            raise ConfigurationError("no episodes to window")
        if meal_max is None:
            meal_max = max(float(ep.meal.max()) for ep in episodes if len(ep))
        if dose_max is None:
            dose_max = max(float(ep.dose.max()) for ep in episodes if len(ep))
            if dose_max <= 0:
                dose_max = 1.0
        parts = [extract_windows(ep, t_hist, t_fut, stride, meal_max, dose_max)
                 for ep in episodes]
        ids = np.concatenate([np.full(part[0].shape[0], ep.patient_id, dtype=np.int64)
                              for ep, part in zip(episodes, parts)])
        return cls(hist=np.concatenate([p[0] for p in parts]),
                   inputs=np.concatenate([p[1] for p in parts]),
                   targets=np.concatenate([p[2] for p in parts]),
                   patient_ids=ids, meal_max=meal_max, dose_max=dose_max)

    def split_train_val(self, val_fraction: float = 0.1):
        """Per-patient temporal split: each patient's trailing windows validate."""
        train_idx: list[int] = []
        val_idx: list[int] = []
        for pid in np.unique(self.patient_ids):
            idx = np.flatnonzero(self.patient_ids == pid)
            n_val = max(1, int(round(val_fraction * idx.size))) if idx.size > 1 else 0
            split = idx.size - n_val
            train_idx.extend(idx[:split] if split else idx)
            val_idx.extend(idx[split:])
        if not val_idx:
            val_idx = train_idx
        tr = np.asarray(train_idx, dtype=np.int64)
        va = np.asarray(val_idx, dtype=np.int64)
        return ((self.hist[tr], self.inputs[tr], self.targets[tr]),
                (self.hist[va], self.inputs[va], self.targets[va]))
