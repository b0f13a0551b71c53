import numpy as np
import pytest

from shrinkflow import geometry as geo, graphs as gr, reduction as rd
from shrinkflow.errors import NoConvergence

ROOT2 = np.sqrt(2.0)


@pytest.fixture(scope="module")
def circle():
    return geo.build_circle(ROOT2, 256)


@pytest.fixture(scope="module")
def synthetic(circle):
    return rd.build_reduction(circle, synthetic_m=2)


def smooth_field(rng, n, amp):
    theta = np.arange(n) * 2 * np.pi / n
    u = np.zeros(n)
    for k in range(6):
        a, b = rng.normal(size=2) / (1 + k) ** 2
        u += a * np.cos(k * theta) + b * np.sin(k * theta)
    return amp * u / max(np.abs(u).max(), 1e-12)


def test_kernel_is_empty_at_tolerance(circle):
    red = rd.build_reduction(circle, kernel_tol=1e-8)
    assert red.kernel_dim == 0
    assert not red.synthetic


def test_synthetic_kernel_spans_translations(circle, synthetic):
    assert synthetic.kernel_dim == 2
    assert synthetic.synthetic
    theta = np.arange(256) * 2 * np.pi / 256
    target = 3 * np.cos(theta) - 2 * np.sin(theta)
    proj = synthetic.projection @ (target + 0.5 * np.cos(3 * theta))
    assert np.abs(proj - target).max() < 1e-9


def test_projection_idempotent_and_self_adjoint(synthetic, circle):
    p_mat = synthetic.projection
    assert np.abs(p_mat @ p_mat - p_mat).max() < 1e-12
    wq = gr.weighted_forms(circle).q_weights
    sym = wq[:, None] * p_mat
    assert np.abs(sym - sym.T).max() < 1e-12


def test_psi_zero(synthetic):
    assert np.abs(rd.psi(synthetic, np.zeros(256))).max() == 0.0


def test_psi_roundtrips(synthetic):
    rng = np.random.default_rng(1)
    for _ in range(20):
        u = smooth_field(rng, 256, 0.01)
        v = rd.nbar(synthetic, u)
        back = rd.psi(synthetic, v)
        assert np.abs(back - u).max() < 1e-8
        forward = rd.nbar(synthetic, rd.psi(synthetic, v))
        assert np.abs(forward - v).max() < 1e-8


def test_psi_cache_consistency(synthetic):
    rng = np.random.default_rng(2)
    u = smooth_field(rng, 256, 0.01)
    v = rd.nbar(synthetic, u)
    first = rd.psi(synthetic, v)
    second = rd.psi(synthetic, v)
    assert np.array_equal(first, second)
    for key in list(synthetic.cache)[:5]:
        v_cached = np.frombuffer(key, dtype=float)
        u_cached = synthetic.cache[key]
        res = rd.nbar(synthetic, u_cached) - v_cached
        assert gr.q_norm(synthetic.base, res) < synthetic.newton_tol


def test_psi_lipschitz_probe(synthetic):
    rng = np.random.default_rng(3)
    ratios = []
    for _ in range(100):
        u1 = smooth_field(rng, 256, 0.008)
        u2 = smooth_field(rng, 256, 0.008)
        v1 = rd.nbar(synthetic, u1)
        v2 = rd.nbar(synthetic, u2)
        num = gr.q2_norm(synthetic.base,
                         rd.psi(synthetic, v1) - rd.psi(synthetic, v2))
        den = gr.q_norm(synthetic.base, v1 - v2)
        if den > 1e-12:
            ratios.append(num / den)
    ratios = np.asarray(ratios)
    assert ratios.max() <= 5.0 * np.median(ratios)


def test_psi_basin_guard(synthetic):
    with pytest.raises(NoConvergence):
        rd.psi(synthetic, np.full(256, 10.0))


def test_reduced_function_critical_at_zero(synthetic, circle):
    value, grad = rd.reduced_function(synthetic, [0.0, 0.0])
    assert abs(value - geo.gaussian_area(circle)) < 1e-12
    assert np.abs(grad).max() < 1e-8


def test_reduced_function_even(synthetic):
    f_plus, _ = rd.reduced_function(synthetic, [0.03, 0.0])
    f_minus, _ = rd.reduced_function(synthetic, [-0.03, 0.0])
    assert abs(f_plus - f_minus) < 1e-12


def test_lemma_ratios_zero_field(synthetic):
    rep = rd.lemma_f_check(synthetic, np.zeros(256))
    assert rep["ratio"] == 0.0
    rep = rd.lemma_grad_check(synthetic, np.zeros(256))
    assert rep["ratio"] == 0.0


def test_lemma_ladders_bounded(synthetic):
    theta = np.arange(256) * 2 * np.pi / 256
    u = 0.04 * np.cos(2 * theta) + 0.03 * np.cos(theta)
    for which in ("F", "grad"):
        ladder = rd.ratio_ladder(synthetic, u, [0.1, 0.05, 0.025, 0.0125],
                                 which)
        assert ladder["bounded"]
        assert ladder["spread"] < 2.0


def test_lemma_f_definitional_identity(synthetic):
    # a fixed point u = psi(proj u) makes F(u) = f(proj u) definitionally;
    # the fixed point is found by contraction iteration
    coords = np.array([0.02, -0.01])
    u = rd.psi(synthetic, rd.kernel_field(synthetic, coords))
    for _ in range(30):
        u = rd.psi(synthetic, synthetic.projection @ u)
    rep = rd.lemma_f_check(synthetic, u)
    assert rep["lhs"] < 1e-8


def test_empty_kernel_checks(circle):
    red = rd.build_reduction(circle, kernel_tol=1e-8)
    rng = np.random.default_rng(5)
    u = smooth_field(rng, 256, 0.01)
    rep = rd.lemma_f_check(red, u)
    # the invertible case: |F(u) - F(Sigma)| <= C ||N u||^2
    assert rep["ratio"] < 10.0
    rep_g = rd.lemma_grad_check(red, u)
    assert rep_g["ratio"] == 0.0
