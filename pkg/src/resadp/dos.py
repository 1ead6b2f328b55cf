"""DoS attack schedules: queries, budget validation and a seeded generator.

An attack ``(h, tau)`` blocks both channels over the integer instants
``h, h+1, ..., h+tau-1``.  Window counts are over the closed window
``[k1, k2]``; the budgets are

* frequency: ``n(k1, k2) <= eta + (k2 - k1) / tau_D``
* duration:  ``|Lambda_D(k1, k2)| <= kappa + (k2 - k1) / T``

for every ``0 <= k1 < k2 <= horizon``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError

# Slack for the float right-hand sides of the budget inequalities.
_BUDGET_EPS = 1e-9


@dataclass(frozen=True)
class DoSParams:
    eta: float
    tau_D: float
    kappa: float
    T: float

    def __post_init__(self):
        # eta = 1 is admitted: the published experiment uses it
        if not self.eta >= 1:
            raise ValidationError(f"eta must be at least 1, got {self.eta}")
        if not self.tau_D > 0:
            raise ValidationError(f"tau_D must be positive, got {self.tau_D}")
        if not self.kappa > 0:
            raise ValidationError(f"kappa must be positive, got {self.kappa}")
        if not self.T > 1:
            raise ValidationError(f"T must exceed 1, got {self.T}")


@dataclass(frozen=True)
class DoSSchedule:
    intervals: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        ivs = tuple((int(h), int(t)) for h, t in self.intervals)
        prev_end = None
        for h, t in ivs:
            if h < 0 or t < 1:
                raise ValidationError(f"bad interval ({h}, {t})")
            if prev_end is not None and h < prev_end:
                raise ValidationError("intervals must be increasing and non-overlapping")
            prev_end = h + t
        object.__setattr__(self, "intervals", ivs)

    def __len__(self):
        return len(self.intervals)

    def mask(self, horizon: int) -> np.ndarray:
        """Boolean denied-flags for instants ``0..horizon`` inclusive."""
        out = np.zeros(horizon + 1, dtype=bool)
        for h, t in self.intervals:
            if h <= horizon:
                out[h:min(h + t, horizon + 1)] = True
        return out

    def shifted(self, offset: int) -> "DoSSchedule":
        """Schedule seen from instant ``offset`` onward, re-based to start at 0."""
        out = []
        for h, t in self.intervals:
            start, end = h - offset, h + t - offset
            if end <= 0:
                continue
            start = max(start, 0)
            out.append((start, end - start))
        return DoSSchedule(tuple(out))

    def to_text(self) -> str:
        return "".join(f"{h} {t}\n" for h, t in self.intervals)

    @classmethod
    def from_text(cls, text: str) -> "DoSSchedule":
        pairs = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValidationError(f"schedule line {lineno}: expected 'h tau', got {line!r}")
            pairs.append((int(parts[0]), int(parts[1])))
        return cls(tuple(pairs))

    def save(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "DoSSchedule":
        return cls.from_text(Path(path).read_text())


def is_denied(sched: DoSSchedule, k: int) -> bool:
    return any(h <= k < h + t for h, t in sched.intervals)


def _check_window(k1, k2):
    if k1 < 0 or k1 > k2:
        raise ValidationError(f"bad window [{k1}, {k2}]")


def lambda_D(sched: DoSSchedule, k1: int, k2: int) -> int:
    _check_window(k1, k2)
    total = 0
    for h, t in sched.intervals:
        lo, hi = max(h, k1), min(h + t - 1, k2)
        if hi >= lo:
            total += hi - lo + 1
    return total


def lambda_N(sched: DoSSchedule, k1: int, k2: int) -> int:
    return (k2 - k1 + 1) - lambda_D(sched, k1, k2)


def count_transitions(sched: DoSSchedule, k1: int, k2: int) -> int:
    _check_window(k1, k2)
    return sum(1 for h, _ in sched.intervals if k1 <= h <= k2)


@dataclass
class ScheduleReport:
    frequency_ok: bool
    duration_ok: bool
    first_frequency_violation: tuple[int, int] | None = None
    first_duration_violation: tuple[int, int] | None = None
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.frequency_ok and self.duration_ok


def _window_excess(counts_prefix: np.ndarray, offset: float, slope: float):
    """All-pairs excess ``count(k1,k2) - offset - (k2-k1)*slope`` as a matrix.

    ``counts_prefix[k]`` is the count over instants ``0..k-1``, so the closed
    window ``[k1, k2]`` count is ``prefix[k2+1] - prefix[k1]``.
    """
    H = counts_prefix.size - 2
    k = np.arange(H + 1)
    cnt = counts_prefix[None, 1:] - counts_prefix[:-1, None]
    return cnt - offset - (k[None, :] - k[:, None]) * slope


def _first_violation(excess: np.ndarray):
    H1 = excess.shape[0]
    upper = np.triu(np.ones((H1, H1), dtype=bool), k=1)
    bad = (excess > _BUDGET_EPS) & upper
    if not bad.any():
        return None
    k1, k2 = np.argwhere(bad)[0]
    return int(k1), int(k2)


def _prefix(flags: np.ndarray) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(flags, dtype=np.int64)])


def verify_assumptions(sched: DoSSchedule, params: DoSParams, horizon: int) -> ScheduleReport:
    """Exhaustively check both budgets on every pair ``0 <= k1 < k2 <= horizon``."""
    if horizon < 1:
        raise ValidationError("horizon must be at least 1")
    denied = sched.mask(horizon)
    onsets = np.zeros(horizon + 1, dtype=bool)
    for h, _ in sched.intervals:
        if h <= horizon:
            onsets[h] = True
    freq = _first_violation(_window_excess(_prefix(onsets), params.eta, 1.0 / params.tau_D))
    dur = _first_violation(_window_excess(_prefix(denied), params.kappa, 1.0 / params.T))
    return ScheduleReport(
        frequency_ok=freq is None,
        duration_ok=dur is None,
        first_frequency_violation=freq,
        first_duration_violation=dur,
        details={"denied_instants": int(denied.sum()), "attacks": len(sched)},
    )


def _budget_holds(flags: np.ndarray, offset: float, slope: float) -> bool:
    """Linear-time version of the all-pairs budget check.

    ``count(k1,k2) - (k2-k1)*slope = (c[k2+1] - k2*slope) - (c[k1] - k1*slope)``,
    so the worst window ending at k2 pairs it with the smallest prefix term
    seen for ``k1 < k2``.
    """
    c = _prefix(flags)
    k = np.arange(flags.size)
    left = c[:-1] - k * slope
    right = c[1:] - k * slope
    running_min = np.minimum.accumulate(left)
    worst = right[1:] - running_min[:-1]
    return bool(worst.size == 0 or worst.max() <= offset + _BUDGET_EPS)


def generate_schedule(params: DoSParams, horizon: int, seed: int,
                      max_length: int | None = None, attempts: int | None = None) -> DoSSchedule:
    """Greedy seeded generator: accept random attacks while both budgets hold."""
    if horizon < 1:
        raise ValidationError("horizon must be at least 1")
    rng = np.random.default_rng(seed)
    if max_length is None:
        max_length = max(1, int(np.ceil(params.kappa)))
    if attempts is None:
        attempts = 4 * (horizon + 1)
    denied = np.zeros(horizon + 1, dtype=bool)
    onsets = np.zeros(horizon + 1, dtype=bool)
    # the window [0, horizon] alone caps the totals; a cheap early reject
    cap_d = params.kappa + horizon / params.T + _BUDGET_EPS
    cap_o = params.eta + horizon / params.tau_D + _BUDGET_EPS
    n_denied = n_onsets = 0
    for _ in range(attempts):
        h = int(rng.integers(0, horizon + 1))
        tau = int(rng.integers(1, max_length + 1))
        end = min(h + tau, horizon + 1)
        # keep attacks separated so intervals stay distinct
        lo, hi = max(h - 1, 0), min(end + 1, horizon + 1)
        if denied[lo:hi].any() or n_denied + end - h > cap_d or n_onsets + 1 > cap_o:
            continue
        trial_d = denied.copy()
        trial_d[h:end] = True
        trial_o = onsets.copy()
        trial_o[h] = True
        if _budget_holds(trial_d, params.kappa, 1.0 / params.T) and \
                _budget_holds(trial_o, params.eta, 1.0 / params.tau_D):
            denied, onsets = trial_d, trial_o
            n_denied += end - h
            n_onsets += 1
    intervals = []
    k = 0
    while k <= horizon:
        if denied[k]:
            start = k
            while k <= horizon and denied[k]:
                k += 1
            intervals.append((start, k - start))
        else:
            k += 1
    return DoSSchedule(tuple(intervals))
