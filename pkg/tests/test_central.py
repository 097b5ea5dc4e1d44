import numpy as np
import pytest

from ncol import central, nbody
from ncol.errors import InvalidMass, InvalidN, NoConvergence


def test_collinear3_equal_masses_geometry():
    cc = central.collinear3(1.0, 1.0, 1.0)
    expect = np.array([[-1 / np.sqrt(2), 0.0], [0.0, 0.0], [1 / np.sqrt(2), 0.0]])
    assert np.allclose(cc.s0, expect, atol=1e-15)
    assert nbody.moment_of_inertia(cc.s0, cc.masses) == pytest.approx(1.0, abs=1e-12)
    assert cc.b == pytest.approx(3.5355339059327378, rel=1e-13)
    assert cc.residual < 1e-9
    assert cc.family == "collinear3-equal"


@pytest.mark.parametrize("m1,m2,alpha", [(1.0, 1.0, 0.5), (2.5, 1.0, 1.0),
                                         (30.0, 1.0, 1.0), (0.3, 4.0, 1.7)])
def test_collinear3_general_masses_is_central(m1, m2, alpha):
    cc = central.collinear3(m1, m2, alpha)
    assert abs(nbody.moment_of_inertia(cc.s0, cc.masses) - 1.0) < 1e-12
    assert cc.residual < 1e-9 * nbody.residual_scale(cc.s0, cc.masses, alpha)
    assert cc.s0[0, 0] == pytest.approx(-1 / np.sqrt(2 * m1))


def test_collinear3_rejects_bad_masses():
    with pytest.raises(InvalidMass):
        central.collinear3(-1.0, 1.0, 1.0)
    with pytest.raises(InvalidMass):
        central.collinear3(1.0, 0.0, 1.0)


def test_collinear3_mass_scaling():
    # doubling all masses leaves the shape fixed and scales b bilinearly
    cc1 = central.collinear3(1.0, 1.0, 1.0)
    cc2 = central.collinear3(2.0, 2.0, 1.0)
    # shape: outer separation scales as 1/sqrt(2 m1)
    assert cc2.s0[2, 0] == pytest.approx(cc1.s0[2, 0] / np.sqrt(2))
    # b on the unit ellipsoid: U = sum m_i m_j r_ij^-a with r ~ m^-1/2
    expect = 4.0 * 2 ** (1.0 / 2.0) * cc1.b
    assert cc2.b == pytest.approx(expect, rel=1e-12)


def test_ngon_basic():
    cc = central.ngon(4, 1.0)
    assert cc.residual < 1e-9
    assert nbody.moment_of_inertia(cc.s0, cc.masses) == pytest.approx(1.0, abs=1e-13)
    # r_13 diagonal = 1 exactly for the square
    assert np.linalg.norm(cc.s0[0] - cc.s0[2]) == pytest.approx(1.0, rel=1e-14)
    assert cc.b == pytest.approx(2 + 4 * np.sqrt(2), rel=1e-13)


@pytest.mark.parametrize("n", [4, 5, 8, 16, 64])
def test_ngon_distances_depend_on_index_gap(n):
    cc = central.ngon(n, 1.0)
    for i in range(0, n, max(1, n // 5)):
        for j in range(i + 1, min(i + 4, n)):
            k = abs(i - j) + 1
            assert np.linalg.norm(cc.s0[i] - cc.s0[j]) == pytest.approx(
                central.ngon_distance(n, k), rel=1e-12)


def test_ngon_potential_closed_form():
    for n in (4, 6, 11):
        for alpha in (0.5, 1.0, 1.5):
            cc = central.ngon(n, alpha)
            dists = np.array([central.ngon_distance(n, k) for k in range(2, n + 1)])
            assert cc.b == pytest.approx(n / 2 * np.sum(dists ** (-alpha)), rel=1e-12)


def test_ngon_chord_sum_square():
    # sum of normalized chords for the square equals cot(pi/8) = 1 + sqrt(2)
    sines = [np.sin((k - 1) * np.pi / 4) for k in (2, 3, 4)]
    assert sum(sines) == pytest.approx(1 + np.sqrt(2), rel=1e-14)
    assert sum(sines) == pytest.approx(1.0 / np.tan(np.pi / 8), rel=1e-14)


def test_ngon_warns_below_four():
    with pytest.warns(UserWarning):
        cc = central.ngon(3, 1.0)
    assert cc.b == pytest.approx(3.0, rel=1e-13)
    with pytest.raises(InvalidN):
        central.ngon(1, 1.0)


def test_solve_central_fixed_point():
    cc = central.ngon(5, 1.0)
    out = central.solve_central(cc.s0, cc.masses, 1.0)
    assert out.residual < 1e-9
    assert np.allclose(central.canonicalize(out.s0, out.masses),
                       central.canonicalize(cc.s0, cc.masses), atol=1e-9)


def test_solve_central_recovers_collinear_from_perturbation():
    cc = central.collinear3(1.0, 1.0, 1.0)
    rng = np.random.default_rng(11)
    x0 = cc.s0 + 1e-3 * rng.standard_normal(cc.s0.shape)
    out = central.solve_central(x0, cc.masses, 1.0)
    assert out.residual < 1e-9
    assert out.b == pytest.approx(cc.b, rel=1e-10)
    assert np.allclose(central.canonicalize(out.s0, out.masses),
                       central.canonicalize(cc.s0, cc.masses), atol=1e-6)


def test_solve_central_equilateral():
    # any equilateral start converges to the triangle with b = 3 at alpha = 1
    side = np.array([[0.0, 0.0], [1.3, 0.0], [0.65, 1.3 * np.sqrt(3) / 2]])
    out = central.solve_central(side, np.ones(3), 1.0)
    assert out.residual < 1e-9
    assert out.b == pytest.approx(3.0, rel=1e-10)
    # oracle: direct evaluation of U at the verified point
    assert out.b == pytest.approx(nbody.potential(out.s0, out.masses, 1.0), rel=1e-14)


def test_solve_central_no_convergence_on_hopeless_start():
    # two nearly coincident bodies head toward collision
    x0 = np.array([[1e-6, 0.0], [0.0, 1e-6], [1.0, 1.0]])
    with pytest.raises((NoConvergence, Exception)):
        central.solve_central(x0, np.ones(3), 1.0, max_iter=5)


def test_canonicalize_rotation_invariance():
    cc = central.ngon(5, 1.0)
    th = 0.7
    rot = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    a = central.canonicalize(cc.s0, cc.masses)
    b = central.canonicalize(cc.s0 @ rot.T, cc.masses)
    assert np.allclose(a, b, atol=1e-10)


def test_embed_in_3d():
    cc = central.ngon(4, 1.0)
    cc3 = central.embed_in_3d(cc)
    assert cc3.dim == 3
    assert np.allclose(cc3.s0[:, :2], cc.s0)
    assert np.allclose(cc3.s0[:, 2], 0.0)
    assert cc3.b == cc.b


def test_json_export_fields():
    import json

    cc = central.collinear3(1.0, 1.0, 1.0)
    payload = json.loads(cc.to_json())
    assert set(payload) == {"alpha", "dim", "masses", "positions", "b", "residual", "family"}
