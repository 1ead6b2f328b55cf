"""Model-based ground truth: Hewer policy iteration and the DoS duration bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import matrix_kit as mk
from .dos import DoSSchedule
from .errors import (ConvergenceError, DegenerateDecayError, DimensionError,
                     StabilityError, ValidationError)
from .plant import AugmentedSystem


@dataclass(frozen=True, eq=False)
class CostWeights:
    Q: np.ndarray
    R: float = 1.0

    def __post_init__(self):
        Q = mk.symmetrize(self.Q, "Q")
        if np.min(np.linalg.eigvalsh(Q)) <= 0:
            raise ValidationError("Q must be positive definite")
        if not self.R > 0:
            raise ValidationError("R must be positive")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", float(self.R))

    @classmethod
    def diagonal(cls, diag, R=1.0) -> "CostWeights":
        return cls(np.diag(np.asarray(diag, dtype=float)), R)

    def scaled_Q(self) -> np.ndarray:
        # The gain formulas hardcode a unit input weight; dividing Q by R gives
        # the same minimizer.
        return self.Q / self.R


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    P_star: np.ndarray
    K_star: np.ndarray
    dare_residual: float
    iterations: int
    history: list = field(default_factory=list, repr=False)


def improve_gain(P, aug: AugmentedSystem) -> np.ndarray:
    B, A = aug.Bbar, aug.Abar
    return (B.T @ P @ A) / (1.0 + (B.T @ P @ B).item())


def dare_residual(P, aug: AugmentedSystem, cost: CostWeights) -> float:
    A, B, Q = aug.Abar, aug.Bbar, cost.scaled_Q()
    P = np.asarray(P, dtype=float)
    if P.shape != A.shape:
        raise DimensionError(f"P has shape {P.shape}, expected {A.shape}")
    gain_term = A.T @ P @ B @ (B.T @ P @ A) / (1.0 + (B.T @ P @ B).item())
    return float(np.linalg.norm(A.T @ P @ A - P + Q - gain_term, "fro"))


def hewer_policy_iteration(aug: AugmentedSystem, cost: CostWeights, K0,
                           tol: float = 1e-12, max_iter: int = 500) -> RiccatiSolution:
    """Alternate Lyapunov policy evaluation and gain improvement from ``K0``.

    Stops when successive value matrices differ by less than ``tol``
    (Frobenius), relative to ``max(1, |P|)`` so the threshold stays
    meaningful for large cost scalings.
    """
    A, B, Q = aug.Abar, aug.Bbar, cost.scaled_Q()
    K = np.asarray(K0, dtype=float).reshape(1, -1)
    if K.shape[1] != aug.dim:
        raise DimensionError(f"K0 has {K.shape[1]} entries, expected {aug.dim}")
    if not mk.is_schur(A - B @ K):
        raise StabilityError("initial gain K0 is not stabilizing")
    history = []
    P_prev = None
    for j in range(max_iter):
        P = mk.solve_discrete_lyapunov(A - B @ K, Q + K.T @ K)
        history.append((K.copy(), P.copy()))
        K = improve_gain(P, aug)
        if P_prev is not None:
            diff = np.linalg.norm(P - P_prev, "fro")
            if diff < tol * max(1.0, np.linalg.norm(P, "fro")):
                return RiccatiSolution(P, K, dare_residual(P, aug, cost), j + 1, history)
        P_prev = P
    raise ConvergenceError(f"policy iteration did not converge in {max_iter} iterations")


def initial_gain(aug: AugmentedSystem) -> np.ndarray:
    """A stabilizing gain for Hewer's iteration, from an identity-weighted DARE."""
    import scipy.linalg as sla

    P = sla.solve_discrete_are(aug.Abar, aug.Bbar, np.eye(aug.dim), np.eye(1))
    return improve_gain(P, aug)


def solve_oracle(aug: AugmentedSystem, cost: CostWeights, K0=None, **kw) -> RiccatiSolution:
    if K0 is None:
        K0 = initial_gain(aug)
    return hewer_policy_iteration(aug, cost, K0, **kw)


def round_gain(K, digits: int = 2) -> np.ndarray:
    """Round each gain entry to ``digits`` significant digits."""
    K = np.asarray(K, dtype=float)
    return np.vectorize(lambda v: float(f"{v:.{digits}g}"))(K)


@dataclass(frozen=True)
class ResilienceBound:
    omega1: float
    omega2: float
    alpha1: float
    alpha2: float
    T_star: float
    kappa: float
    lam_min_P: float
    lam_max_P: float
    norm_Cbar: float

    @property
    def log_envelope_coeff(self) -> float:
        return self.kappa * (math.log1p(self.omega2) - math.log1p(-self.omega1))

    @property
    def envelope_coeff(self) -> float:
        try:
            return math.exp(self.log_envelope_coeff)
        except OverflowError:
            return math.inf

    def log_delta(self, T: float) -> float:
        if T <= 0:
            raise ValidationError("T must be positive")
        return (T - 1.0) / T * math.log1p(-self.omega1) + math.log1p(self.omega2) / T

    def delta_of_T(self, T: float) -> float:
        return math.exp(self.log_delta(T))

    def condition_holds(self, T: float) -> bool:
        return T > self.T_star

    def log_relaxed_envelope(self, T: float, k: int, V0: float) -> float:
        if V0 <= 0:
            return -math.inf
        return self.log_envelope_coeff + k * self.log_delta(T) + math.log(V0)

    def beta_zeta(self, r: float, k: int, T: float) -> float:
        """KL bound on ``|zeta_tilde_k|`` given ``|zeta_tilde_0| = r``."""
        log_sq = (self.log_envelope_coeff + math.log(self.lam_max_P / self.lam_min_P)
                  + k * self.log_delta(T))
        return _safe_exp(0.5 * log_sq) * r

    def beta_e(self, r: float, k: int, T: float) -> float:
        return self.norm_Cbar * self.beta_zeta(r, k, T)

    def to_text(self) -> str:
        rows = [
            ("omega1", self.omega1), ("omega2", self.omega2),
            ("alpha1", self.alpha1), ("alpha2", self.alpha2),
            ("T_star", self.T_star), ("kappa", self.kappa),
            ("envelope_coeff", self.envelope_coeff),
            ("log_envelope_coeff", self.log_envelope_coeff),
        ]
        return "".join(f"{k} = {v!r}\n" for k, v in rows)


def _safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def critical_duration(omega1: float, omega2: float) -> float:
    """Smallest duration divisor T for which the decay factor reaches 1."""
    if omega1 >= 1.0:
        raise DegenerateDecayError(
            f"omega1 = {omega1} >= 1: decay rate degenerates (T* undefined)")
    if omega1 <= 0.0:
        raise DegenerateDecayError(f"omega1 = {omega1} <= 0: no decay between attacks")
    return 1.0 + math.log1p(omega2) / -math.log1p(-omega1)


def compute_resilience_bound(sol: RiccatiSolution, aug: AugmentedSystem,
                             cost: CostWeights, kappa: float) -> ResilienceBound:
    P, K = sol.P_star, sol.K_star
    B, A, Dt = aug.Bbar, aug.Abar, aug.Dtilde
    two = lambda M: float(np.linalg.norm(M, 2))
    KBPBK = K.T @ B.T @ P @ B @ K
    alpha1 = 1.0 + 2.0 * two(KBPBK) ** 2 + 2.0 * two(A.T @ P @ A) ** 2
    alpha2 = 2.0 + 4.0 * two(KBPBK) ** 2 + 4.0 * two(Dt.T @ P @ Dt) ** 2
    eig_P = np.linalg.eigvalsh(P)
    lam_min_Q = float(np.min(np.linalg.eigvalsh(cost.scaled_Q())))
    omega1 = lam_min_Q / float(eig_P[-1])
    omega2 = (alpha1 + 4.0 * alpha2) / float(eig_P[0])
    T_star = critical_duration(omega1, omega2)
    return ResilienceBound(omega1, omega2, alpha1, alpha2, T_star, float(kappa),
                           float(eig_P[0]), float(eig_P[-1]), two(aug.Cbar))


def step_counts(sched: DoSSchedule, k: int) -> tuple[int, int]:
    """Allowed and denied steps among transitions ``0 -> 1 -> ... -> k``."""
    if k <= 0:
        return 0, 0
    denied = int(sched.mask(k - 1).sum())
    return k - denied, denied


def log_exact_envelope(bound: ResilienceBound, sched: DoSSchedule, V0: float, k: int) -> float:
    if V0 <= 0:
        return -math.inf
    allowed, denied = step_counts(sched, k)
    return allowed * math.log1p(-bound.omega1) + denied * math.log1p(bound.omega2) + math.log(V0)


def lyapunov_envelope(bound: ResilienceBound, sched: DoSSchedule, V0: float, k: int,
                      T: float | None = None):
    """Return ``(exact, relaxed)`` bounds on ``V(zeta_tilde_k)``.

    ``exact`` multiplies a decay factor for every allowed step and a growth
    factor for every denied step before ``k``.  ``relaxed`` is the
    coefficient-times-geometric form valid under the duration budget with
    divisor ``T``; it is ``None`` when ``T`` is not given.
    """
    if V0 < 0 or k < 0:
        raise ValidationError("V0 and k must be non-negative")
    exact = _safe_exp(log_exact_envelope(bound, sched, V0, k)) if V0 > 0 else 0.0
    relaxed = None
    if T is not None:
        relaxed = _safe_exp(bound.log_relaxed_envelope(T, k, V0)) if V0 > 0 else 0.0
    return exact, relaxed
