import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resadp.dos import (DoSParams, DoSSchedule, count_transitions, generate_schedule, is_denied,
                        lambda_D, lambda_N, verify_assumptions)
from resadp.errors import ValidationError


def brute_report(sched, p, H):
    """Independent O(H^3) check straight from the definitions."""
    freq = dur = None
    for k1 in range(H + 1):
        for k2 in range(k1 + 1, H + 1):
            D = sum(is_denied(sched, k) for k in range(k1, k2 + 1))
            n = sum(1 for h, _ in sched.intervals if k1 <= h <= k2)
            if freq is None and n > p.eta + (k2 - k1) / p.tau_D + 1e-9:
                freq = (k1, k2)
            if dur is None and D > p.kappa + (k2 - k1) / p.T + 1e-9:
                dur = (k1, k2)
    return freq, dur


def test_is_denied_examples():
    assert not is_denied(DoSSchedule(), 4)
    s = DoSSchedule(((5, 3),))
    assert is_denied(s, 5) and is_denied(s, 7) and not is_denied(s, 8)
    assert not is_denied(DoSSchedule(((0, 2), (4, 1))), 3)


def test_lambda_examples():
    assert lambda_D(DoSSchedule(), 0, 10) == 0 and lambda_N(DoSSchedule(), 0, 10) == 11
    assert lambda_D(DoSSchedule(((5, 3),)), 0, 10) == 3
    assert lambda_D(DoSSchedule(((0, 2), (8, 4))), 1, 9) == 3
    with pytest.raises(ValidationError):
        lambda_D(DoSSchedule(), 5, 2)


def test_count_transitions_examples():
    assert count_transitions(DoSSchedule(), 0, 10) == 0
    assert count_transitions(DoSSchedule(((5, 3),)), 0, 10) == 1
    assert count_transitions(DoSSchedule(((2, 1), (6, 1))), 3, 10) == 1


def test_schedule_validation():
    with pytest.raises(ValidationError):
        DoSSchedule(((0, 5), (3, 1)))
    with pytest.raises(ValidationError):
        DoSSchedule(((0, 0),))
    with pytest.raises(ValidationError):
        DoSParams(eta=0.5, tau_D=1, kappa=1, T=2)
    with pytest.raises(ValidationError):
        DoSParams(eta=1, tau_D=1, kappa=1, T=1)


def test_verify_examples():
    p = DoSParams(eta=2, tau_D=5, kappa=1, T=10)
    assert verify_assumptions(DoSSchedule(), p, 50).ok
    rep = verify_assumptions(DoSSchedule(((0, 10),)), p, 10)
    assert not rep.duration_ok and rep.first_duration_violation == (0, 1)
    p = DoSParams(eta=1, tau_D=15, kappa=40, T=10)
    assert verify_assumptions(DoSSchedule(((5, 3),)), p, 100).ok


def test_verify_matches_brute_force():
    rng = np.random.default_rng(3)
    for trial in range(30):
        H = int(rng.integers(5, 40))
        ivs, k = [], int(rng.integers(0, 4))
        while k < H:
            t = int(rng.integers(1, 6))
            ivs.append((k, t))
            k += t + int(rng.integers(1, 8))
        s = DoSSchedule(tuple(ivs))
        p = DoSParams(eta=float(rng.uniform(1, 3)), tau_D=float(rng.uniform(1, 10)),
                      kappa=float(rng.uniform(0.5, 6)), T=float(rng.uniform(1.1, 6)))
        rep = verify_assumptions(s, p, H)
        freq, dur = brute_report(s, p, H)
        assert rep.first_frequency_violation == freq
        assert rep.first_duration_violation == dur


def test_generator_examples():
    assert len(generate_schedule(DoSParams(1, 15, 0.5, 1e9), 100, 0)) == 0
    p = DoSParams(eta=1, tau_D=15, kappa=40, T=10)
    s = generate_schedule(p, 100, 7)
    assert len(s) > 0 and verify_assumptions(s, p, 100).ok
    assert generate_schedule(p, 100, 7) == s


def test_text_round_trip(tmp_path):
    s = DoSSchedule(((3, 2), (10, 5)))
    assert DoSSchedule.from_text(s.to_text()) == s
    s.save(tmp_path / "s.txt")
    assert DoSSchedule.load(tmp_path / "s.txt") == s
    with pytest.raises(ValidationError):
        DoSSchedule.from_text("1 2 3\n")


def test_shifted():
    s = DoSSchedule(((3, 4), (20, 2)))
    assert s.shifted(5).intervals == ((0, 2), (15, 2))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 5), st.integers(1, 5)), max_size=6),
       st.integers(0, 30), st.integers(0, 30))
def test_window_properties(gaps, a, b):
    ivs, k = [], 0
    for gap, t in gaps:
        k += gap
        ivs.append((k, t))
        k += t
    s = DoSSchedule(tuple(ivs))
    k1, k2 = min(a, b), max(a, b)
    assert lambda_D(s, k1, k2) + lambda_N(s, k1, k2) == k2 - k1 + 1
    counts = [lambda_D(s, 0, k) for k in range(40)]
    assert all(np.diff(counts) >= 0)
    for h, t in s.intervals:
        assert not is_denied(s, h + t)
