"""Closed-loop simulation with hold-last-value control and internal model under DoS."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .dos import DoSSchedule
from .errors import DimensionError, DivergenceError, ValidationError
from .learner import TrajectoryLog, collect_log
from .optimal_control import ResilienceBound, step_counts
from .plant import InternalModel, LinearPlant, RegulatorSolution, solve_regulator_equations

ENVELOPE_RTOL = 1e-6


@dataclass
class HeldValues:
    zeta_held: np.ndarray
    e_held: float
    last_update: int

    def refresh(self, zeta, e, k):
        self.zeta_held = np.array(zeta, dtype=float)
        self.e_held = float(e)
        self.last_update = k


@dataclass(eq=False)
class SimTrace:
    k: np.ndarray
    x: np.ndarray
    z: np.ndarray
    w: np.ndarray
    u: np.ndarray
    e: np.ndarray
    y_d: np.ndarray
    attacked: np.ndarray
    last_update: np.ndarray
    zeta_tilde: np.ndarray
    V: np.ndarray
    log_env_exact: np.ndarray
    log_env_relaxed: np.ndarray

    @property
    def zeta(self) -> np.ndarray:
        return np.hstack([self.x, self.z])

    @property
    def env_exact(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_env_exact)

    @property
    def env_relaxed(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_env_relaxed)

    def __len__(self):
        return len(self.k)

    def write_csv(self, path):
        n, q = self.x.shape[1], self.z.shape[1]
        header = (["k"] + [f"x{i + 1}" for i in range(n)] + [f"z{i + 1}" for i in range(q)]
                  + [f"w{i + 1}" for i in range(q)]
                  + ["u", "e", "y_d", "attacked", "V", "env_exact", "env_relaxed"])
        env_e, env_r = self.env_exact, self.env_relaxed
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            for i in range(len(self.k)):
                row = [int(self.k[i])]
                row += [repr(float(v)) for v in self.x[i]]
                row += [repr(float(v)) for v in self.z[i]]
                row += [repr(float(v)) for v in self.w[i]]
                row += [repr(float(self.u[i])), repr(float(self.e[i])), repr(float(self.y_d[i])),
                        int(self.attacked[i]), repr(float(self.V[i])),
                        repr(float(env_e[i])), repr(float(env_r[i]))]
                wr.writerow(row)


class SinusoidExploration:
    """Sum of sinusoids with seeded frequencies in (0, pi) rad/step.

    Amplitudes are random but normalized so they sum to ``amplitude``.
    """

    def __init__(self, amplitude: float = 1.0, n_waves: int = 10, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.freqs = rng.uniform(0.0, np.pi, n_waves)
        self.freqs[self.freqs == 0.0] = np.pi / 2
        weights = rng.uniform(0.5, 1.5, n_waves)
        self.amps = amplitude * weights / weights.sum()
        self.phases = rng.uniform(0.0, 2 * np.pi, n_waves)

    def __call__(self, k: int) -> float:
        return float(np.sum(self.amps * np.sin(self.freqs * k + self.phases)))


def _zero_exploration(k):
    return 0.0


def _simulate(plant: LinearPlant, im: InternalModel, sched: DoSSchedule, K, x0, z0, w0,
              horizon: int, exploration=None, explore_during_attack: bool = True):
    if horizon < 1:
        raise ValidationError("horizon must be at least 1")
    n, q = plant.n, plant.q
    K = np.asarray(K, dtype=float).reshape(-1)
    if K.size != n + q:
        raise DimensionError(f"gain has {K.size} entries, expected {n + q}")
    x = np.asarray(x0, dtype=float).reshape(-1)
    z = np.asarray(z0, dtype=float).reshape(-1)
    w = np.asarray(w0, dtype=float).reshape(-1)
    if x.size != n or z.size != q or w.size != q:
        raise DimensionError("initial condition lengths do not match the plant")
    eta = exploration or _zero_exploration
    attacked = sched.mask(horizon)
    H1 = horizon + 1
    xs, zs, ws = np.zeros((H1, n)), np.zeros((H1, q)), np.zeros((H1, q))
    us, es, last = np.zeros(H1), np.zeros(H1), np.zeros(H1, dtype=int)
    A, B, D, E = plant.A, plant.B[:, 0], plant.D, plant.E
    C, F, G2 = plant.C[0], plant.F[0], im.G2[:, 0]
    held = None
    # overflow is caught below as non-finite state
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(H1):
            zeta = np.concatenate([x, z])
            e = float(C @ x + F @ w)
            if not np.all(np.isfinite(zeta)) or not math.isfinite(e):
                raise DivergenceError(f"state became non-finite at instant {k}", instant=k)
            if held is None:
                held = HeldValues(zeta.copy(), e, k)
            elif not attacked[k]:
                held.refresh(zeta, e, k)
            u = -float(K @ held.zeta_held)
            if explore_during_attack or not attacked[k]:
                u += eta(k)
            xs[k], zs[k], ws[k], us[k], es[k], last[k] = x, z, w, u, e, held.last_update
            x = A @ x + B * u + D @ w
            z = im.G1 @ z + G2 * held.e_held
            w = E @ w
    return xs, zs, ws, us, es, attacked, last


def _assemble(plant, xs, zs, ws, us, es, attacked, last, reg, P_star, bound, T, sched):
    H1 = len(us)
    zeta = np.hstack([xs, zs])
    zt = zeta - ws @ reg.Xi.T if reg is not None else np.full_like(zeta, np.nan)
    if P_star is not None and reg is not None:
        V = np.einsum("ki,ij,kj->k", zt, np.asarray(P_star), zt)
    else:
        V = np.full(H1, np.nan)
    log_exact = np.full(H1, np.nan)
    log_relaxed = np.full(H1, np.nan)
    if bound is not None and np.isfinite(V[0]):
        V0 = V[0]
        l1, l2 = math.log1p(-bound.omega1), math.log1p(bound.omega2)
        denied_steps = np.concatenate([[0], np.cumsum(attacked[:-1])])
        allowed_steps = np.arange(H1) - denied_steps
        with np.errstate(divide="ignore"):
            logV0 = math.log(V0) if V0 > 0 else -math.inf
        log_exact = allowed_steps * l1 + denied_steps * l2 + logV0
        if T is not None:
            log_relaxed = bound.log_envelope_coeff + np.arange(H1) * bound.log_delta(T) + logV0
    y_d = -(ws @ plant.F[0])
    return SimTrace(np.arange(H1), xs, zs, ws, us, es, y_d, attacked, last, zt, V,
                    log_exact, log_relaxed)


def simulate_regulation(plant: LinearPlant, im: InternalModel, sched: DoSSchedule, K,
                        reg: RegulatorSolution | None, x0, z0, w0, horizon: int,
                        P_star=None, bound: ResilienceBound | None = None,
                        T: float | None = None) -> SimTrace:
    """Run ``u_k = -K zeta_held`` with the internal model fed the held error.

    ``reg`` supplies the steady-state map ``Xi`` for the error coordinates;
    pass ``None`` to compute it from ``K`` (the consistent choice for a pure
    feedback law).  ``P_star``/``bound``/``T`` enable the Lyapunov value and
    the two envelopes.
    """
    if reg is None:
        reg = solve_regulator_equations(plant, im, K=K)
    out = _simulate(plant, im, sched, K, x0, z0, w0, horizon)
    return _assemble(plant, *out, reg, P_star, bound, T, sched)


def simulate_learning(plant: LinearPlant, im: InternalModel, sched: DoSSchedule, K0,
                      exploration, x0, z0, w0, horizon: int,
                      explore_during_attack: bool = True):
    """Run ``u_k = -K0 zeta_held + eta_k`` and return ``(trace, log)``."""
    try:
        out = _simulate(plant, im, sched, K0, x0, z0, w0, horizon, exploration,
                        explore_during_attack)
    except DivergenceError as exc:
        raise DivergenceError(f"learning run diverged, K0 is likely not stabilizing: {exc}",
                              instant=exc.instant) from exc
    trace = _assemble(plant, *out, None, None, None, None, sched)
    return trace, collect_log(trace, sched)


@dataclass
class TrackingSummary:
    final_quarter_max_abs_e: float
    first_below_tol: int | None
    peak_envelope_ratio: float

    def envelope_dominated(self, rtol: float = ENVELOPE_RTOL) -> bool:
        return self.peak_envelope_ratio <= 1.0 + rtol


def tracking_metrics(trace: SimTrace, tol: float = 1e-3) -> TrackingSummary:
    H1 = len(trace)
    if H1 == 0:
        raise ValidationError("empty trace")
    start = (3 * H1) // 4
    tail = np.abs(trace.e[start:])
    final_max = float(tail.max()) if tail.size else 0.0
    below = np.flatnonzero(np.abs(trace.e) < tol)
    first = int(below[0]) if below.size else None
    with np.errstate(invalid="ignore", divide="ignore"):
        logV = np.where(trace.V > 0, np.log(np.where(trace.V > 0, trace.V, 1.0)), -np.inf)
        diff = logV - trace.log_env_exact
    if np.any(diff == np.inf):
        peak = math.inf
    else:
        finite = diff[np.isfinite(diff)]
        peak = float(np.exp(finite.max())) if finite.size else 0.0
    return TrackingSummary(final_max, first, peak)
