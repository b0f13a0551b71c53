import numpy as np
import pytest

from shrinkflow import flow as fl, geometry as geo, graphs as gr
from shrinkflow import inequalities as iq
from shrinkflow.errors import HypothesisFail, NotGraphical

ROOT2 = np.sqrt(2.0)


@pytest.fixture(scope="module")
def converge_run():
    base = geo.build_circle(ROOT2, 128)
    theta = np.arange(128) * 2 * np.pi / 128
    traj = fl.run_graph_flow(base, 3e-4 * np.cos(2 * theta), 3.2,
                             fl.FlowOptions(snapshot_dt=0.01))
    return base, traj


def test_lojasiewicz_stationary_is_clean():
    base = geo.build_circle(ROOT2, 128)
    traj = fl.run_graph_flow(base, np.zeros(128), 0.01, fl.FlowOptions(tol=0.0))
    rep = iq.lojasiewicz_check(traj, geo.gaussian_area(base))
    assert rep.violations == 0
    assert rep.details["n_live"] == 0


def test_lojasiewicz_converging_run(converge_run):
    base, traj = converge_run
    rep = iq.lojasiewicz_check(traj, geo.gaussian_area(base), beta=0.5)
    assert rep.details["violations_below_threshold"] == 0
    assert 0.9 <= rep.fitted["tail_slope"] <= 1.1
    # slope ~ 1 means every exponent below one is admissible asymptotically
    assert rep.fitted["beta_admissible_max"] > 0.9


def test_lojasiewicz_beta_near_one_shrinks_threshold(converge_run):
    base, traj = converge_run
    rep_half = iq.lojasiewicz_check(traj, geo.gaussian_area(base), beta=0.5)
    rep_worse = iq.lojasiewicz_check(traj, geo.gaussian_area(base), beta=0.99)
    assert rep_worse.fitted["threshold"] <= rep_half.fitted["threshold"]
    assert rep_worse.details["violations_below_threshold"] == 0


def test_decay_bound_equality_case():
    t = np.linspace(0, 10, 2001)
    series = (1 + 0.5 * t) ** -2
    rep = iq.check_decay(t, series, 0.5)
    assert rep.violations == 0
    assert abs(rep.worst_ratio - 1.0) < 1e-9  # exact equality case


def test_decay_bound_zero_series():
    t = np.linspace(0, 1, 101)
    rep = iq.check_decay(t, np.zeros_like(t), 0.5)
    assert rep.violations == 0


def test_decay_bound_increasing_mirror():
    # reverse of the equality case solves G' = +G^{3/2}
    t = np.linspace(0, 10, 2001)
    series = (1 + 0.5 * (10 - t)) ** -2
    rep = iq.check_decay(t, series, 0.5)
    assert rep.fitted["direction"] == "increasing"
    assert rep.violations == 0
    assert abs(rep.worst_ratio - 1.0) < 1e-9


def test_decay_hypothesis_failure_raises():
    t = np.linspace(0, 1, 101)
    with pytest.raises(HypothesisFail):
        iq.check_decay(t, np.full_like(t, 0.5), 0.5)  # G' = 0 < G^{1.5}


def test_geometric_series_bound_spec_point():
    bound = iq.geometric_series_bound(0.5, 1.5, 1.0)
    assert abs(bound.lhs_partial - 0.498) < 5e-3
    assert bound.tail_estimate < 1e-20
    assert bound.holds


def test_geometric_series_bound_rejects_bad_parameters():
    with pytest.raises(ValueError):
        iq.geometric_series_bound(0.5, 2.0, 1.0)   # gamma >= 1/(1-beta)
    with pytest.raises(ValueError):
        iq.geometric_series_bound(0.5, 0.9, 1.0)   # gamma <= 1
    with pytest.raises(ValueError):
        iq.geometric_series_bound(0.5, 1.5, -1.0)  # c1 <= 0


def test_geometric_series_bound_large_c1_ratio_bounded():
    ratios = []
    for c1 in (10.0, 100.0, 1000.0):
        bound = iq.geometric_series_bound(0.5, 1.5, c1)
        assert bound.holds
        ratios.append((bound.lhs_partial + bound.tail_estimate) / bound.rhs)
    assert max(ratios) < 1.0
    assert min(ratios) > 0.05  # both sides shrink at the same rate


def test_geometric_series_bound_random_sample():
    rng = np.random.default_rng(17)
    for _ in range(300):
        beta = rng.uniform(0.05, 0.95)
        q = 1 / (1 - beta)
        gamma = 1 + rng.uniform(1e-6, 1.0) * (q - 1)
        gamma = min(gamma, q * (1 - 1e-12))
        c1 = 10 ** rng.uniform(-2, 2)
        assert iq.geometric_series_bound(beta, gamma, c1, j_max=400).holds


def test_weighted_integral_front_branch(converge_run):
    base, traj = converge_run
    rep = iq.weighted_integral_check(traj, 1.5, s_split=traj.times[-1],
                                     f_limit=geo.gaussian_area(base))
    consts = rep.fitted["front_constants"]
    assert len(consts) >= 3
    assert rep.fitted["front_stability"] < 3.0


def test_weighted_integral_rejects_gamma():
    base, traj = None, None
    dummy = fl.FlowTrajectory(kind="graph")
    with pytest.raises(ValueError):
        iq.weighted_integral_check(dummy, 2.5, 1.0, 0.0)


def test_drift_bound_degenerate_window(converge_run):
    base, traj = converge_run
    t_mid = traj.times[len(traj.times) // 2]
    rep = iq.drift_bound_check(base, traj, t_mid, t_mid)
    assert rep.details["lhs"] == 0.0
    assert rep.details["f_drop"] == 0.0


def test_drift_bound_windows(converge_run):
    base, traj = converge_run
    t_end = traj.times[-1]
    study = iq.drift_window_study(base, traj,
                                  [(t_end - w, t_end)
                                   for w in (2.4, 2.0, 1.6, 1.2)])
    assert study["C_stability"] <= 3.0
    assert study["velC_stability"] <= 3.0
    assert study["fitted_exponent"] >= 0.25


def test_drift_monotone_decay(converge_run):
    base, traj = converge_run
    t_end = traj.times[-1]
    lhs_vals = []
    for t1 in (t_end - 2.4, t_end - 1.6, t_end - 0.8):
        rep = iq.drift_bound_check(base, traj, t1, t_end)
        lhs_vals.append(rep.details["lhs"])
    assert lhs_vals[0] > lhs_vals[1] > lhs_vals[2]


def test_drift_requires_graph_snapshots():
    traj = fl.FlowTrajectory(kind="points")
    base = geo.build_circle(ROOT2, 64)
    with pytest.raises(NotGraphical):
        iq.drift_bound_check(base, traj, 0.0, 1.0)


def test_weighted_integral_stationary_is_zero():
    base = geo.build_circle(ROOT2, 128)
    traj = fl.run_graph_flow(base, np.zeros(128), 2.5,
                             fl.FlowOptions(tol=0.0, record_every=10))
    rep = iq.weighted_integral_check(traj, 1.5, s_split=traj.times[-1],
                                     f_limit=geo.gaussian_area(base))
    for c in rep.fitted["front_constants"]:
        assert c == 0.0 or c < 1e-20


def test_weighted_integral_mirror_branch():
    # a dilation-dominated run keeps F below its critical value from the
    # start, so the whole trajectory feeds the mirrored (T-r)-weighted bound
    base = geo.build_circle(ROOT2, 128)
    traj = fl.run_graph_flow(base, 0.05 * np.ones(128), 3.5,
                             fl.FlowOptions(record_every=5))
    assert traj.times[-1] > 2.5
    rep = iq.weighted_integral_check(traj, 1.5, s_split=traj.times[0],
                                     f_limit=geo.gaussian_area(base))
    consts = rep.fitted["back_constants"]
    assert len(consts) >= 2
    assert all(c > 0 for c in consts)
    assert rep.fitted["back_stability"] < 10.0
