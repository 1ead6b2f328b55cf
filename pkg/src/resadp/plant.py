"""Plant, exosystem, internal model and the regulator equations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matrix_kit as mk
from .errors import AssumptionViolation, ConfigurationError, DimensionError

UNIT_CIRCLE_TOL = 1e-9
SIMPLE_EIG_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class LinearPlant:
    """``x+ = A x + B u + D w``, ``w+ = E w``, ``e = C x + F w`` with scalar u and e."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    E: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        A = mk.as_matrix(self.A, "A")
        n = A.shape[0]
        q = mk.as_matrix(self.E, "E").shape[0]
        expected = {
            "A": (n, n),
            "B": (n, 1),
            "C": (1, n),
            "D": (n, q),
            "E": (q, q),
            "F": (1, q),
        }
        for name, shape in expected.items():
            raw = getattr(self, name)
            if name in ("B", "D") and np.ndim(raw) == 1:
                raw = np.reshape(raw, (-1, 1))
            arr = mk.as_matrix(raw, name)
            if arr.shape != shape:
                raise DimensionError(f"{name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def q(self) -> int:
        return self.E.shape[0]

    def reference(self, w) -> float:
        return float(-(self.F @ np.asarray(w, dtype=float).reshape(-1))[0])


@dataclass(frozen=True, eq=False)
class InternalModel:
    """``z+ = G1 z + G2 e``; here ``G1`` is always a copy of ``E``."""

    G1: np.ndarray
    G2: np.ndarray

    def __post_init__(self):
        G1 = mk.as_matrix(self.G1, "G1")
        q = G1.shape[0]
        if G1.shape != (q, q):
            raise DimensionError(f"G1 must be square, got {G1.shape}")
        G2 = mk.as_matrix(self.G2, "G2").reshape(-1, 1)
        if G2.shape != (q, 1):
            raise DimensionError(f"G2 must have {q} entries, got {G2.size}")
        if mk.controllability_rank(G1, G2) != q:
            raise ConfigurationError("internal model pair (G1, G2) is not controllable")
        for name, arr in (("G1", G1), ("G2", G2)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def for_plant(cls, plant: LinearPlant, G2) -> "InternalModel":
        return cls(plant.E.copy(), G2)


@dataclass(frozen=True, eq=False)
class AugmentedSystem:
    Abar: np.ndarray
    Bbar: np.ndarray
    Cbar: np.ndarray
    Dbar: np.ndarray
    Dtilde: np.ndarray
    n: int
    q: int

    @property
    def dim(self) -> int:
        return self.n + self.q


@dataclass(frozen=True, eq=False)
class RegulatorSolution:
    X: np.ndarray
    U: np.ndarray
    Z: np.ndarray
    Xi: np.ndarray
    residuals: dict = field(default_factory=dict)


@dataclass
class AssumptionReport:
    stabilizable: bool
    exosystem_simple_unit: bool
    transmission_rank: bool
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.stabilizable and self.exosystem_simple_unit and self.transmission_rank

    def failures(self) -> list[str]:
        out = []
        if not self.stabilizable:
            out.append("assumption 1: (A, B) is not stabilizable")
        if not self.exosystem_simple_unit:
            out.append("assumption 1: eigenvalues of E are not simple on the unit circle")
        if not self.transmission_rank:
            out.append("assumption 2: rank [[A - lambda I, B], [C, 0]] < n + 1 for some eigenvalue lambda of E")
        return out

    def raise_if_failed(self):
        if not self.ok:
            first = self.failures()[0]
            raise AssumptionViolation("; ".join(self.failures()), assumption=first.split(":")[0])


def _complex_rank(M, rtol=1e-10) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def check_assumptions(plant: LinearPlant) -> AssumptionReport:
    n = plant.n
    A, B, C = plant.A, plant.B, plant.C
    eig_a = np.linalg.eigvals(A)
    bad_modes = []
    for lam in eig_a:
        if abs(lam) >= 1.0:
            if _complex_rank(np.hstack([A - lam * np.eye(n), B])) < n:
                bad_modes.append(complex(lam))

    eig_e = np.linalg.eigvals(plant.E)
    off_circle = [complex(l) for l in eig_e if abs(abs(l) - 1.0) > UNIT_CIRCLE_TOL]
    gaps = [abs(eig_e[i] - eig_e[j]) for i in range(eig_e.size) for j in range(i + 1, eig_e.size)]
    repeated = bool(gaps) and min(gaps) < SIMPLE_EIG_TOL

    rank_fail = []
    for lam in eig_e:
        M = np.block([[A - lam * np.eye(n), B], [C, np.zeros((1, 1))]])
        r = _complex_rank(M)
        if r != n + 1:
            rank_fail.append((complex(lam), r))

    return AssumptionReport(
        stabilizable=not bad_modes,
        exosystem_simple_unit=not off_circle and not repeated,
        transmission_rank=not rank_fail,
        diagnostics={
            "uncontrollable_unstable_modes": bad_modes,
            "exosystem_eigs_off_unit_circle": off_circle,
            "exosystem_repeated_eigs": repeated,
            "transmission_rank_failures": rank_fail,
        },
    )


def build_augmented(plant: LinearPlant, im: InternalModel) -> AugmentedSystem:
    if im.G1.shape != plant.E.shape or not np.array_equal(im.G1, plant.E):
        raise ConfigurationError("internal model G1 must equal the exosystem matrix E")
    n, q = plant.n, plant.q
    G2 = im.G2
    Abar = np.block([[plant.A, np.zeros((n, q))], [G2 @ plant.C, plant.E]])
    Bbar = np.vstack([plant.B, np.zeros((q, 1))])
    Cbar = np.hstack([plant.C, np.zeros((1, q))])
    Dbar = np.vstack([plant.D, G2 @ plant.F])
    Dtilde = np.vstack([np.zeros((n, n + q)), G2 @ Cbar])
    return AugmentedSystem(Abar, Bbar, Cbar, Dbar, Dtilde, n, q)


def solve_regulator_equations(plant: LinearPlant, im: InternalModel, K=None) -> RegulatorSolution:
    """Solve ``XE = AX + BU + D``, ``CX + F = 0`` as one vectorized system.

    Without ``K`` the internal-model block is ``Z = 0``.  With a gain ``K``
    (``1 x (n+q)``) the pair (X, Z) instead solves the closed-loop equations
    ``Xi E = (Abar - Bbar K) Xi + Dbar`` so that ``u = -K zeta`` has steady
    state ``-K Xi w``; the returned ``U`` is then ``-K Xi``.
    """
    n, q = plant.n, plant.q
    A, B, C, D, E, F = plant.A, plant.B, plant.C, plant.D, plant.E, plant.F
    In, Iq = np.eye(n), np.eye(q)
    top = np.hstack([np.kron(E.T, In) - np.kron(Iq, A), -np.kron(Iq, B)])
    bottom = np.hstack([np.kron(Iq, C), np.zeros((q, q))])
    L = np.vstack([top, bottom])
    rhs = np.concatenate([mk.vec(D), mk.vec(-F)])
    if mk.numerical_rank(L, rtol=1e-12) < L.shape[1]:
        raise AssumptionViolation("regulator equations are singular", assumption="assumption 2")
    sol = np.linalg.solve(L, rhs)
    X = mk.unvec(sol[: n * q], n, q)
    U = mk.unvec(sol[n * q:], 1, q)
    Z = np.zeros((q, q))

    if K is not None:
        aug = build_augmented(plant, im)
        K = np.asarray(K, dtype=float).reshape(1, -1)
        if K.shape[1] != n + q:
            raise DimensionError(f"gain has {K.shape[1]} entries, expected {n + q}")
        Ac = aug.Abar - aug.Bbar @ K
        m = n + q
        L2 = np.kron(E.T, np.eye(m)) - np.kron(Iq, Ac)
        if mk.numerical_rank(L2, rtol=1e-12) < L2.shape[1]:
            raise AssumptionViolation("closed-loop regulator equations are singular",
                                      assumption="assumption 2")
        Xi_k = mk.unvec(np.linalg.solve(L2, mk.vec(aug.Dbar)), m, q)
        X = Xi_k[:n]
        Z = Xi_k[n:]
        U = -K @ Xi_k

    Xi = np.vstack([X, Z])
    residuals = {
        "XE=AX+BU+D": float(np.linalg.norm(X @ E - A @ X - B @ U - D)),
        "CX+F=0": float(np.linalg.norm(C @ X + F)),
        "ZE=EZ+G2(CX+F)": float(np.linalg.norm(Z @ E - E @ Z - im.G2 @ (C @ X + F))),
    }
    return RegulatorSolution(X, U, Z, Xi, residuals)


def plant_step(plant: LinearPlant, x, u: float, w):
    """One exact update; the error is computed from the pre-update state."""
    x = np.asarray(x, dtype=float).reshape(-1)
    w = np.asarray(w, dtype=float).reshape(-1)
    if x.size != plant.n or w.size != plant.q:
        raise DimensionError("state or exostate has the wrong length")
    e = float(plant.C[0] @ x + plant.F[0] @ w)
    x_next = plant.A @ x + plant.B[:, 0] * float(u) + plant.D @ w
    w_next = plant.E @ w
    return x_next, w_next, e


# Cart-pendulum physical parameters (our choice; the discretization follows a
# forward-Euler step of the linearized cart-pole model).
PENDULUM_PARAMS = {"M": 1.0, "m": 0.1, "b": 0.1, "g": 9.8, "l": 0.5, "Ts": 0.01}


def pendulum_plant(M=1.0, m=0.1, b=0.1, g=9.8, l=0.5, Ts=0.01, G2=0.5):
    """Inverted pendulum on a cart tracking a constant cart-position reference."""
    A = np.array([
        [1.0, Ts, 0.0, 0.0],
        [0.0, 1.0 - b * Ts / M, -m * g * Ts / M, 0.0],
        [0.0, 0.0, 1.0, Ts],
        [0.0, b * Ts / (l * M), (M + m) * g * Ts / (l * M), 1.0],
    ])
    B = np.array([[0.0], [Ts / M], [0.0], [-Ts / (l * M)]])
    D = np.array([[0.0], [0.01], [0.0], [0.01]])
    C = np.array([[1.0, 0.0, 0.0, 0.0]])
    E = np.array([[1.0]])
    F = np.array([[-1.0]])
    plant = LinearPlant(A, B, C, D, E, F)
    return plant, InternalModel.for_plant(plant, [[G2]])


PENDULUM_Q_DIAG = (1000.0, 1000.0, 1000.0, 1000.0, 15.0)
PENDULUM_X0 = (0.5, 0.0, 0.0, 0.0)
PENDULUM_W0 = (1.0,)
