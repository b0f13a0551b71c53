import numpy as np
import pytest

from shrinkflow import geometry as geo, graphs as gr, shrinkers as sh
from shrinkflow.errors import BracketFailure

ROOT2 = np.sqrt(2.0)


@pytest.fixture(scope="module")
def circle():
    return geo.build_circle(ROOT2, 256)


@pytest.fixture(scope="module")
def sphere():
    return geo.build_sphere(2.0, 256)


@pytest.fixture(scope="module")
def torus():
    return sh.shoot_angenent_torus((0.3, 1.2), n_samples=256)


def test_circle_spectrum_matches_fourier(circle):
    dec = sh.spectrum(circle, 17)
    ks = sorted(range(-8, 9), key=abs)
    expect = np.array(sorted([1 - k ** 2 / 2 for k in ks], reverse=True))
    assert np.abs(dec.eigenvalues - expect).max() < 1e-4
    assert dec.orthonormality_residual < 1e-10
    assert dec.eigen_residual < 1e-8
    assert dec.markers[0] == "dilation"
    assert dec.markers[1] == dec.markers[2] == "translation"


def test_sphere_axisym_spectrum(sphere):
    dec = sh.spectrum(sphere, 7)
    expect = np.array([1 - k * (k + 1) / 4 for k in range(7)])
    assert np.abs(dec.eigenvalues - expect).max() < 1e-3


def test_eigenvalue_grid_convergence():
    d128 = sh.spectrum(geo.build_circle(ROOT2, 128), 17)
    d256 = sh.spectrum(geo.build_circle(ROOT2, 256), 17)
    assert np.abs(d128.eigenvalues - d256.eigenvalues).max() < 1e-5


@pytest.mark.parametrize("maker", ["circle", "sphere", "torus"])
def test_group_mode_identities(maker, circle, sphere, torus):
    base = {"circle": circle, "sphere": sphere, "torus": torus.state}[maker]
    l0 = gr.second_variation_matrix(base)
    h_field = base.H
    rel = gr.q_norm(base, l0 @ h_field - h_field) / gr.q_norm(base, h_field)
    assert rel < 1e-6
    fields = ([base.normal[:, 0], base.normal[:, 1]]
              if base.kind == geo.KIND_CURVE else [base.normal[:, 1]])
    for v in fields:
        rel = gr.q_norm(base, l0 @ v - 0.5 * v) / gr.q_norm(base, v)
        assert rel < 1e-6


def test_circle_and_sphere_stable_modulo_group(circle, sphere):
    for base in (circle, sphere):
        rep = sh.stability_report(base)
        assert rep.stable_modulo_group
        assert rep.morse_index == 0
        assert not rep.ambiguous
    rep_c = sh.stability_report(circle)
    assert sorted(np.round(rep_c.positive_eigenvalues, 6),
                  reverse=True) == [1.0, 0.5, 0.5]


def test_torus_unstable(torus):
    rep = sh.stability_report(torus.state)
    assert not rep.stable_modulo_group
    assert rep.morse_index >= 1
    dec = sh.spectrum(torus.state, 6)
    assert dec.eigenvalues[0] > 1.0 + 1e-6
    # the extra positive mode is q-orthogonal to the group span
    assert rep.group_overlaps[0] < 0.05


def test_newton_zero_start(circle):
    res = sh.newton_find_shrinker(circle, np.zeros(256))
    assert res.iterations == 0


def test_newton_constant_offset(circle):
    res = sh.newton_find_shrinker(circle, np.full(256, 0.1))
    assert res.residuals[-1] < 1e-10
    assert np.abs(res.u).max() < 1e-9
    ratios = res.error_ratios[-3:]
    assert max(ratios) / min(ratios) < 10.0  # quadratic convergence


def test_newton_mixed_perturbation(circle):
    theta = np.arange(256) * 2 * np.pi / 256
    res = sh.newton_find_shrinker(circle, 0.05 * np.cos(2 * theta) + 0.05)
    assert res.residuals[-1] < 1e-10
    assert np.abs(res.u).max() < 1e-9


def test_torus_properties(torus):
    assert torus.residual_sup < 1e-5
    assert abs(torus.closure_defect) < 1e-10
    assert torus.state.points[:, 0].min() > 0.3
    f_torus = geo.gaussian_area(torus.state)
    assert f_torus > 16 * np.pi / np.e
    # known entropy of this shrinker in the normalized convention
    assert abs(f_torus / (4 * np.pi) - 1.8512) < 1e-3


def test_torus_defect_table_monotone(torus):
    rows = [d for r0, d in torus.defect_table
            if 0.3 <= r0 <= 0.7]
    assert len(rows) >= 5
    assert all(b < a for a, b in zip(rows[:-1], rows[1:]))  # decreasing


def test_shooting_bracket_failure():
    with pytest.raises(BracketFailure):
        sh.shoot_angenent_torus((2.5, 2.7), n_samples=64, scan_points=5)


def test_spectrum_csv_format(circle):
    text = sh.spectrum_csv(sh.spectrum(circle, 5))
    lines = text.splitlines()
    assert lines[0] == "index,eigenvalue,marker"
    assert len(lines) == 6
