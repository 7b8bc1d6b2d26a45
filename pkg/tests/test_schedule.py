"""Schedule synthesis: the time law, its inversion, linear and predicted
schedules, and the isotonic projection."""

import itertools
import json

import numpy as np
import pytest

from qasched import ising, schedule, spectral


def single_spin_profile(n_grid=500, m_max=1):
    topo = ising.Topology(ising.OPEN_CHAIN, 1)
    inst = ising.IsingInstance(1, topo, np.array([1.0]), {}, 0)
    return spectral.gap_profile(inst, m_max=m_max, n_grid=n_grid)


def constant_profile(gap, bound, n_grid=11):
    s = np.linspace(0.0, 1.0, n_grid)
    return spectral.SpectralProfile(
        s_grid=s, gaps=np.full((n_grid, 1), float(gap)),
        matrix_elements=np.full((n_grid, 1), float(bound)),
        flags=np.zeros(n_grid, dtype=bool), m_max=1,
        degeneracy_tolerance=1e-8)


def fine_grid_single_spin_oracle(epsilon, n_fine=100000):
    """Independent quadrature of the closed-form single-spin integrand."""
    s = np.linspace(0.0, 1.0, n_fine)
    r = np.sqrt((1.0 - s) ** 2 + s ** 2)
    bound = np.max(1.0 / r)
    integrand = 1.0 / (2.0 * r) ** 2
    t = np.concatenate(([0.0], np.cumsum(
        0.5 * (integrand[1:] + integrand[:-1]) * np.diff(s)))) * (bound / epsilon)
    return s, t


def test_epsilon_is_a_pure_prefactor():
    profile = spectral.gap_profile(
        ising.sample_instance(ising.Topology(ising.OPEN_CHAIN, 4), 4, 5),
        m_max=4, n_grid=200)
    tables = {eps: schedule.local_adiabatic_t_of_s(profile, eps) * eps
              for eps in (0.05, 0.1, 0.2)}
    base = tables[0.1]
    for eps, scaled in tables.items():
        assert np.allclose(scaled, base, rtol=1e-12, atol=0.0)


def test_epsilon_halved_doubles_every_time():
    profile = single_spin_profile(n_grid=100)
    t1 = schedule.local_adiabatic_t_of_s(profile, 0.1)
    t2 = schedule.local_adiabatic_t_of_s(profile, 0.05)
    assert np.allclose(t2, 2.0 * t1, rtol=1e-13, atol=0.0)


def test_single_spin_t_f_matches_fine_quadrature():
    profile = single_spin_profile()
    t = schedule.local_adiabatic_t_of_s(profile, 0.1)
    _, t_oracle = fine_grid_single_spin_oracle(0.1)
    assert t[-1] == pytest.approx(t_oracle[-1], rel=1e-3)


def test_single_spin_shape_matches_fine_quadrature():
    profile = single_spin_profile()
    sched = schedule.local_adiabatic_schedule(profile, 0.1)
    s_fine, t_oracle = fine_grid_single_spin_oracle(0.1)
    oracle_samples = np.interp(np.linspace(0.0, t_oracle[-1], 500),
                               t_oracle, s_fine)
    assert np.max(np.abs(sched.samples - oracle_samples)) <= 2e-3


def test_constant_integrand_gives_linear_time_law():
    g, b = 1.5, 0.7
    profile = constant_profile(g, b)
    t = schedule.local_adiabatic_t_of_s(profile, 0.1)
    expected = (b / (0.1 * g * g)) * profile.s_grid
    assert np.allclose(t, expected, rtol=1e-12)


def test_time_law_rejects_bad_epsilon():
    profile = constant_profile(1.0, 1.0)
    with pytest.raises(ValueError):
        schedule.local_adiabatic_t_of_s(profile, 0.0)
    with pytest.raises(ValueError):
        schedule.local_adiabatic_t_of_s(profile, -0.1)


def test_invert_linear_table():
    s = np.linspace(0.0, 1.0, 200)
    c = 7.25
    sched = schedule.invert_to_s_of_t(s, c * s, n_points=500)
    assert sched.t_f == pytest.approx(c, abs=1e-12)
    assert np.allclose(sched.samples, np.linspace(0.0, 1.0, 500), atol=1e-12)
    assert sched.kind == schedule.LOCAL_ADIABATIC


def test_invert_round_trip_bound():
    profile = single_spin_profile(n_grid=300)
    t = schedule.local_adiabatic_t_of_s(profile, 0.1)
    sched = schedule.invert_to_s_of_t(profile.s_grid, t, n_points=500)
    # Re-tabulate t(s) from the schedule and compare at the original grid;
    # the error of two opposed piecewise-linear interpolations is bounded by
    # one t-grid cell.
    t_back = np.interp(profile.s_grid, sched.samples, sched.times)
    assert np.max(np.abs(t_back - t)) <= np.max(np.diff(t))


def test_invert_rejects_non_monotone():
    s = np.linspace(0.0, 1.0, 10)
    t = np.linspace(0.0, 1.0, 10)
    t[5] = t[4]
    with pytest.raises(ValueError):
        schedule.invert_to_s_of_t(s, t)


def test_schedule_invariants_random_instances():
    # Property sweep: every synthesized schedule satisfies the sample
    # invariants (endpoints exact, nondecreasing, within [0,1]).
    topo = ising.Topology(ising.OPEN_CHAIN, 4)
    checked = 0
    for seed in range(100):
        inst = ising.sample_instance(topo, 4, seed)
        profile = spectral.gap_profile(inst, m_max=4, n_grid=120)
        try:
            sched = schedule.local_adiabatic_schedule(profile, 0.1,
                                                      n_points=200)
        except Exception:
            continue  # near-degenerate draws are regenerated by the harness
        assert sched.samples[0] == 0.0 and sched.samples[-1] == 1.0
        assert np.all(sched.samples >= 0.0) and np.all(sched.samples <= 1.0)
        assert np.all(np.diff(sched.samples) >= 0.0)
        assert np.all(np.diff(sched.times) > 0.0)
        assert sched.epsilon == 0.1
        checked += 1
    assert checked >= 90


def test_linear_schedule_shape():
    for t_f in (1.0, 76.27):
        sched = schedule.linear_schedule(t_f)
        assert sched.kind == schedule.LINEAR
        assert sched.n_points == 500
        assert np.allclose(sched.samples, np.arange(500) / 499.0, atol=1e-15)
        mid = sched.samples[249:251]
        assert mid[0] < 0.5 < mid[1]
    a = schedule.linear_schedule(1.0).samples
    b = schedule.linear_schedule(123.4).samples
    assert np.array_equal(a, b)


def test_linear_matches_inverted_linear_table():
    t_f = 5.5
    s = np.linspace(0.0, 1.0, 500)
    inverted = schedule.invert_to_s_of_t(s, t_f * s, n_points=500)
    direct = schedule.linear_schedule(t_f, n_points=500)
    assert np.allclose(inverted.samples, direct.samples, atol=1e-12)
    assert inverted.t_f == direct.t_f


def exhaustive_isotonic(y):
    """Best nondecreasing fit by enumerating consecutive-block partitions."""
    n = len(y)
    best, best_sse = None, np.inf
    for cuts in itertools.product([0, 1], repeat=n - 1):
        blocks, start = [], 0
        for k, cut in enumerate(cuts, start=1):
            if cut:
                blocks.append((start, k))
                start = k
        blocks.append((start, n))
        means = [np.mean(y[a:b]) for a, b in blocks]
        if np.any(np.diff(means) < 0):
            continue
        fit = np.concatenate([np.full(b - a, m) for (a, b), m in zip(blocks, means)])
        sse = float(np.sum((fit - y) ** 2))
        if sse < best_sse - 1e-15:
            best, best_sse = fit, sse
    return best


def test_isotonic_matches_exhaustive_partition_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        y = rng.uniform(0.0, 1.0, size=7)
        fit = schedule.isotonic_nondecreasing(y)
        oracle = exhaustive_isotonic(y)
        assert np.all(np.diff(fit) >= -1e-12)
        assert np.allclose(fit, oracle, atol=1e-10)


def test_prediction_clipping_and_pinning():
    raw = np.array([0.3, -0.2, 0.5, 1.4, 0.9])
    sched = schedule.schedule_from_prediction(raw, t_f=2.0)
    assert sched.kind == schedule.PREDICTED
    assert sched.samples[0] == 0.0 and sched.samples[-1] == 1.0
    assert np.array_equal(sched.samples[1:4], [0.0, 0.5, 1.0])

    flat = schedule.schedule_from_prediction(np.full(6, 0.5), t_f=1.0)
    assert np.array_equal(flat.samples, [0.0, 0.5, 0.5, 0.5, 0.5, 1.0])

    valid = np.linspace(0.0, 1.0, 9)
    valid[0], valid[-1] = 0.02, 0.97
    pinned = schedule.schedule_from_prediction(valid, t_f=1.0)
    assert pinned.samples[0] == 0.0 and pinned.samples[-1] == 1.0
    assert np.array_equal(pinned.samples[1:-1], valid[1:-1])


def test_prediction_monotonize_flag():
    raw = np.array([0.0, 0.4, 0.3, 0.8, 1.0])
    off = schedule.schedule_from_prediction(raw, t_f=1.0, monotonize=False)
    assert np.any(np.diff(off.samples) < 0)
    on = schedule.schedule_from_prediction(raw, t_f=1.0, monotonize=True)
    assert np.all(np.diff(on.samples) >= 0)
    assert np.allclose(on.samples[1:3], 0.35, atol=1e-12)


def test_prediction_errors():
    with pytest.raises(ValueError):
        schedule.schedule_from_prediction(np.array([0.5]), t_f=1.0)
    with pytest.raises(ValueError):
        schedule.schedule_from_prediction(np.zeros(5), t_f=0.0)


def test_validate_rules():
    good = np.linspace(0.0, 1.0, 20)
    with pytest.raises(ValueError):
        schedule.Schedule("spline", 1.0, good).validate()
    with pytest.raises(ValueError):
        schedule.Schedule(schedule.LINEAR, -1.0, good).validate()
    bad_end = good.copy()
    bad_end[-1] = 0.99
    with pytest.raises(ValueError):
        schedule.Schedule(schedule.LINEAR, 1.0, bad_end).validate()
    wiggle = good.copy()
    wiggle[10], wiggle[11] = wiggle[11], wiggle[10]
    with pytest.raises(ValueError):
        schedule.Schedule(schedule.LOCAL_ADIABATIC, 1.0, wiggle).validate()
    # Raw predictions may wiggle; the same samples pass as predicted.
    schedule.Schedule(schedule.PREDICTED, 1.0, wiggle).validate()


def test_schedule_json_round_trip():
    sched = schedule.local_adiabatic_schedule(single_spin_profile(50), 0.1,
                                              n_points=40)
    back = schedule.schedule_from_json(schedule.schedule_to_json(sched))
    assert back.kind == sched.kind
    assert back.t_f == sched.t_f
    assert back.epsilon == sched.epsilon
    assert np.array_equal(back.samples, sched.samples)
    lin = schedule.linear_schedule(3.0, n_points=10)
    obj = json.loads(schedule.schedule_to_json(lin))
    assert obj["epsilon"] is None and len(obj["s"]) == 10


def test_schedule_csv_export(tmp_path):
    sched = schedule.linear_schedule(2.0, n_points=5)
    path = tmp_path / "sched.csv"
    schedule.schedule_to_csv(sched, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,s"
    assert len(lines) == 6
    t0, s0 = lines[1].split(",")
    assert float(t0) == 0.0 and float(s0) == 0.0
    t4, s4 = lines[-1].split(",")
    assert float(t4) == 2.0 and float(s4) == 1.0
