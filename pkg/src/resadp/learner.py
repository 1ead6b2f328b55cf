"""Model-free policy iteration from input/state data gathered under DoS.

For a gain ``K_j`` each allowed sample ``k`` gives one row of

    Psi_j theta_j = -J_zz vec(Q + K_j^T K_j)

with unknowns ``theta_j = [vecs(P_j), vec(Gamma1), Gamma2, vec(Theta1),
vec(Theta2), vecs(Theta3)]`` where ``Gamma1 = B'P A``, ``Gamma2 = B'P B``,
``Theta1 = A'P D``, ``Theta2 = B'P D``, ``Theta3 = D'P D`` (all barred,
augmented-system matrices).  No model matrix is used anywhere in here.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import matrix_kit as mk
from .errors import (ConvergenceError, DimensionError, EmptyLogError, ExcitationError,
                     IndefinitenessError, RankError)

log = logging.getLogger(__name__)

NOT_IDENTIFIED = np.nan


@dataclass(frozen=True, eq=False)
class TrajectoryLog:
    """Samples at instants ``k`` where both ``k`` and ``k+1`` were received."""

    instants: np.ndarray
    zeta: np.ndarray
    zeta_next: np.ndarray
    u: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        s = len(self.instants)
        if s == 0:
            raise EmptyLogError("trajectory log has no allowed consecutive instants")
        if np.any(np.diff(self.instants) <= 0):
            raise DimensionError("log instants must be strictly increasing")
        for name in ("zeta", "zeta_next", "u", "w"):
            if len(getattr(self, name)) != s:
                raise DimensionError(f"log field {name} has the wrong number of rows")

    def __len__(self):
        return len(self.instants)

    @property
    def dim(self) -> int:
        return self.zeta.shape[1]

    @property
    def q(self) -> int:
        return self.w.shape[1]


@dataclass(frozen=True)
class ThetaLayout:
    """Column layout of ``theta`` (and ``Psi``) for ``dim(zeta) = m``, ``dim(w) = q``."""

    m: int
    q: int

    @property
    def sizes(self) -> dict:
        m, q = self.m, self.q
        return {
            "P": mk.tri_size(m),
            "Gamma1": m,
            "Gamma2": 1,
            "Theta1": m * q,
            "Theta2": q,
            "Theta3": mk.tri_size(q),
        }

    @property
    def slices(self) -> dict:
        out, start = {}, 0
        for name, size in self.sizes.items():
            out[name] = slice(start, start + size)
            start += size
        return out

    @property
    def total(self) -> int:
        return sum(self.sizes.values())

    @property
    def droppable(self) -> range:
        """Columns built from exosystem data; only these may be reduced."""
        return range(self.slices["Theta1"].start, self.total)


@dataclass(frozen=True, eq=False)
class DataMatrices:
    Xi_zeta: np.ndarray
    J_zeta: np.ndarray
    J_zeta_u: np.ndarray
    J_zeta_zeta: np.ndarray
    J_u: np.ndarray
    J_w_zeta: np.ndarray
    J_w_u: np.ndarray
    J_w: np.ndarray
    zeta: np.ndarray
    layout: ThetaLayout

    @property
    def s(self) -> int:
        return self.Xi_zeta.shape[0]

    def J_Kzeta(self, K) -> np.ndarray:
        kz = self.zeta @ np.asarray(K, dtype=float).reshape(-1)
        return (kz ** 2)[:, None]


@dataclass
class PIIterate:
    j: int
    K_j: np.ndarray
    P_j: np.ndarray
    Gamma1: np.ndarray
    Gamma2: float
    Theta1: np.ndarray
    Theta2: np.ndarray
    Theta3: np.ndarray
    theta: np.ndarray
    dropped_columns: list
    residual: float


def collect_log(trace, sched=None) -> TrajectoryLog:
    """Keep instant ``k`` iff ``k`` and ``k+1`` are both communication-allowed.

    ``trace`` is a :class:`~resadp.closed_loop_sim.SimTrace`; its attack flags
    are used unless an explicit schedule is passed.
    """
    H = len(trace.k) - 1
    denied = trace.attacked if sched is None else sched.mask(H)
    keep = np.flatnonzero(~denied[:-1] & ~denied[1:])
    if keep.size == 0:
        raise EmptyLogError("no pair of consecutive communication-allowed instants in the trace")
    zeta = trace.zeta
    return TrajectoryLog(
        instants=trace.k[keep].copy(),
        zeta=zeta[keep].copy(),
        zeta_next=zeta[keep + 1].copy(),
        u=trace.u[keep].copy(),
        w=trace.w[keep].copy(),
    )


def _rows(fn, arr):
    return np.array([fn(a) for a in arr])


def build_data_matrices(log_: TrajectoryLog) -> DataMatrices:
    zeta, zn, u, w = log_.zeta, log_.zeta_next, log_.u, log_.w
    J_zeta = _rows(mk.vecv, zeta)
    return DataMatrices(
        Xi_zeta=_rows(mk.vecv, zn) - J_zeta,
        J_zeta=J_zeta,
        J_zeta_u=zeta * u[:, None],
        J_zeta_zeta=np.array([np.kron(z, z) for z in zeta]),
        J_u=(u ** 2)[:, None],
        J_w_zeta=np.array([np.kron(a, b) for a, b in zip(w, zeta)]),
        J_w_u=w * u[:, None],
        J_w=_rows(mk.vecv, w),
        zeta=zeta,
        layout=ThetaLayout(log_.dim, log_.q),
    )


def build_psi(data: DataMatrices, K_j, Q):
    """Assemble ``Psi_j`` and ``-J_zz vec(Q + K_j^T K_j)``."""
    m = data.layout.m
    K = np.asarray(K_j, dtype=float).reshape(1, -1)
    if K.shape[1] != m:
        raise DimensionError(f"gain has {K.shape[1]} entries, expected {m}")
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (m, m):
        raise DimensionError(f"Q has shape {Q.shape}, expected {(m, m)}")
    Psi = np.hstack([
        data.Xi_zeta,
        -2.0 * data.J_zeta_u - 2.0 * data.J_zeta_zeta @ np.kron(np.eye(m), K.T),
        data.J_Kzeta(K) - data.J_u,
        -2.0 * data.J_w_zeta,
        -2.0 * data.J_w_u,
        -data.J_w,
    ])
    rhs = -data.J_zeta_zeta @ mk.vec(Q + K.T @ K)
    return Psi, rhs


def reduce_columns(Psi, layout: ThetaLayout, rtol: float = mk.RANK_RTOL):
    """Drop linearly dependent exosystem columns so ``Psi`` has full column rank.

    Returns ``(Psi_bar, dropped_columns)``.  A deficiency among the columns
    that identify ``P_j`` and the Gamma blocks is an excitation failure.
    """
    Psi = np.asarray(Psi, dtype=float)
    if Psi.shape[1] != layout.total:
        raise DimensionError(f"Psi has {Psi.shape[1]} columns, layout expects {layout.total}")
    scaled = Psi / mk.column_scales(Psi)
    base = list(range(layout.droppable.start))
    r = mk.numerical_rank(scaled[:, base], rtol)
    if r < len(base):
        raise ExcitationError(
            f"data do not excite the value/gain unknowns: rank {r} < {len(base)}; "
            "increase the horizon or the exploration amplitude",
            rank=r, required=len(base))
    kept, dropped = base[:], []
    for c in layout.droppable:
        trial = kept + [c]
        if mk.numerical_rank(scaled[:, trial], rtol) == len(trial):
            kept = trial
        else:
            dropped.append(c)
    return Psi[:, kept], dropped


def check_rank(data: DataMatrices, rtol: float = mk.RANK_RTOL):
    """Rank condition on ``[J_z, J_zu, J_u, J_wz, J_wu, J_w]``.

    Returns ``(ok, rank, required)`` where ``required`` counts every unknown
    block with ``dim(zeta)`` in place of the plant order, minus the number of
    dependent exosystem columns.
    """
    layout = data.layout
    M = np.hstack([data.J_zeta, data.J_zeta_u, data.J_u,
                   data.J_w_zeta, data.J_w_u, data.J_w])
    scaled = M / mk.column_scales(M)
    rank = mk.numerical_rank(scaled, rtol)
    base = list(range(layout.droppable.start))
    kept = base[:]
    n_dependent = 0
    for c in layout.droppable:
        if mk.numerical_rank(scaled[:, kept + [c]], rtol) == len(kept) + 1:
            kept.append(c)
        else:
            n_dependent += 1
    required = layout.total - n_dependent
    return rank == required, rank, required


def unpack_theta(theta_bar, layout: ThetaLayout, dropped) -> dict:
    theta = np.full(layout.total, NOT_IDENTIFIED)
    keep = np.setdiff1d(np.arange(layout.total), np.asarray(dropped, dtype=int))
    theta[keep] = theta_bar
    sl = layout.slices
    m, q = layout.m, layout.q
    return {
        "theta": theta,
        "P": mk.unvecs(theta[sl["P"]], m),
        "Gamma1": theta[sl["Gamma1"]].reshape(1, m),
        "Gamma2": float(theta[sl["Gamma2"]][0]),
        "Theta1": mk.unvec(theta[sl["Theta1"]], m, q),
        "Theta2": theta[sl["Theta2"]].reshape(1, q),
        "Theta3": mk.unvecs(theta[sl["Theta3"]], q),
    }


def solve_iteration(Psi_bar, rhs, layout: ThetaLayout, dropped=(), j: int = 0, K_j=None) -> PIIterate:
    try:
        theta_bar, residual = mk.solve_least_squares(Psi_bar, rhs)
    except RankError as exc:
        raise ExcitationError(f"reduced data matrix is rank deficient: {exc}",
                              rank=exc.rank, required=exc.required) from exc
    parts = unpack_theta(theta_bar, layout, dropped)
    K_j = np.zeros((1, layout.m)) if K_j is None else np.asarray(K_j, dtype=float).reshape(1, -1)
    return PIIterate(
        j=j, K_j=K_j, P_j=parts["P"], Gamma1=parts["Gamma1"], Gamma2=parts["Gamma2"],
        Theta1=parts["Theta1"], Theta2=parts["Theta2"], Theta3=parts["Theta3"],
        theta=parts["theta"], dropped_columns=list(dropped), residual=residual,
    )


def policy_improvement(it: PIIterate) -> np.ndarray:
    denom = 1.0 + it.Gamma2
    if not denom > 0:
        raise IndefinitenessError(f"1 + Gamma2 = {denom} is not positive")
    return it.Gamma1 / denom


@dataclass
class LearningResult:
    K_final: np.ndarray
    P_final: np.ndarray
    iterations: int
    history: list = field(default_factory=list)
    dropped_columns: list = field(default_factory=list)

    def history_rows(self, K_ref=None, P_ref=None):
        """Rows ``(j, |K_j - K_ref|, |P_j - P_ref|, residual)``; NaN without a reference."""
        rows = []
        for it in self.history:
            dk = float(np.linalg.norm(it.K_j - K_ref)) if K_ref is not None else float("nan")
            dp = float(np.linalg.norm(it.P_j - P_ref)) if P_ref is not None else float("nan")
            rows.append((it.j, dk, dp, it.residual))
        return rows


def run_algorithm_1(log_: TrajectoryLog, cost, K0, epsilon0: float = 0.5,
                    max_iter: int = 50) -> LearningResult:
    """Policy iteration on logged data until ``|P_j - P_{j-1}|_F <= epsilon0``.

    ``cost`` is a :class:`~resadp.optimal_control.CostWeights`.
    ``K_final`` is the improved gain computed from the last evaluated ``P_j``.
    """
    data = build_data_matrices(log_)
    layout = data.layout
    Q = cost.scaled_Q()
    K = np.asarray(K0, dtype=float).reshape(1, -1)
    history = []
    P_prev = None
    dropped = []
    for j in range(max_iter + 1):
        Psi, rhs = build_psi(data, K, Q)
        Psi_bar, dropped = reduce_columns(Psi, layout)
        it = solve_iteration(Psi_bar, rhs, layout, dropped, j=j, K_j=K)
        history.append(it)
        K_next = policy_improvement(it)
        log.debug("iteration %d: residual %.3e, dropped %s", j, it.residual, dropped)
        if P_prev is not None and np.linalg.norm(it.P_j - P_prev, "fro") <= epsilon0:
            return LearningResult(K_next, it.P_j, j, history, dropped)
        P_prev = it.P_j
        K = K_next
    raise ConvergenceError(f"learning did not converge within {max_iter} iterations")
