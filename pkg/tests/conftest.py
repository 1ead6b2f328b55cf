import numpy as np
import pytest

from resadp.optimal_control import CostWeights, compute_resilience_bound, solve_oracle
from resadp.plant import (PENDULUM_Q_DIAG, InternalModel, LinearPlant, build_augmented,
                          pendulum_plant)


@pytest.fixture(scope="session")
def pendulum():
    plant, im = pendulum_plant()
    aug = build_augmented(plant, im)
    cost = CostWeights.diagonal(PENDULUM_Q_DIAG)
    sol = solve_oracle(aug, cost)
    bound = compute_resilience_bound(sol, aug, cost, kappa=40.0)
    return {"plant": plant, "im": im, "aug": aug, "cost": cost, "sol": sol, "bound": bound}


def toy_plant(D=0.0, G2=1.0):
    plant = LinearPlant([[0.5]], [[1.0]], [[1.0]], [[D]], [[1.0]], [[-1.0]])
    return plant, InternalModel.for_plant(plant, [[G2]])


@pytest.fixture
def toy():
    plant, im = toy_plant()
    aug = build_augmented(plant, im)
    cost = CostWeights(np.eye(2))
    sol = solve_oracle(aug, cost)
    return {"plant": plant, "im": im, "aug": aug, "cost": cost, "sol": sol}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def model_theta(aug, K, Q):
    """theta_j computed from the model, in the learner's column layout."""
    from resadp import matrix_kit as mk

    A, B, D = aug.Abar, aug.Bbar, aug.Dbar
    K = np.asarray(K, dtype=float).reshape(1, -1)
    P = mk.solve_discrete_lyapunov(A - B @ K, Q + K.T @ K)
    return np.concatenate([
        mk.vecs(P), (B.T @ P @ A).ravel(), (B.T @ P @ B).ravel(),
        mk.vec(A.T @ P @ D), (B.T @ P @ D).ravel(), mk.vecs(D.T @ P @ D),
    ]), P


def random_samples(aug, s, rng, w_fn=None):
    """Independent samples ``(zeta, u, w)`` pushed through the augmented model."""
    from resadp.learner import TrajectoryLog

    m, q = aug.dim, aug.Dbar.shape[1]
    zeta = rng.normal(size=(s, m))
    u = rng.normal(size=s)
    w = rng.normal(size=(s, q)) if w_fn is None else np.array([w_fn(k) for k in range(s)])
    zn = zeta @ aug.Abar.T + np.outer(u, aug.Bbar[:, 0]) + w @ aug.Dbar.T
    return TrajectoryLog(np.arange(s), zeta, zn, u, w)
