import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncol import central, mcgehee, morse, nbody, spectral
from ncol.errors import NotHomographic, OverlappingSupports, SupportOutOfRange


@pytest.fixture(scope="module")
def coll1():
    return central.collinear3(1.0, 1.0, 1.0)


@pytest.fixture(scope="module")
def homothetic_traj(coll1):
    return mcgehee.homothetic_oracle(coll1, h=0.0, tau_max=450.0)


@pytest.fixture(scope="module")
def mu1_direction(coll1):
    return spectral.smallest_eigenvalue(coll1).eigvec


def test_profiles_are_compactly_supported():
    for kind in ("bump", "flattop"):
        p = morse.Profile(width=4.0, kind=kind)
        u = np.linspace(-1.0, 5.0, 1201)
        vals = p.value(u)
        assert np.all(vals[u <= 0.0] == 0.0)
        assert np.all(vals[u >= 4.0] == 0.0)
        assert vals.max() > 0.9
        # derivative consistent with finite differences
        h = 1e-6
        mid = np.linspace(0.2, 3.8, 101)
        fd = (p.value(mid + h) - p.value(mid - h)) / (2 * h)
        assert np.max(np.abs(fd - p.deriv(mid))) < 1e-5


def test_flattop_dirichlet_ratio_scales_inversely_with_width():
    narrow = morse.Profile(width=5.0).dirichlet_ratio()
    wide = morse.Profile(width=20.0).dirichlet_ratio()
    assert wide < narrow
    assert wide == pytest.approx(narrow / 16.0, rel=1e-2)  # ~ 1/width^2


def test_quadratic_Q_zero_variation(homothetic_traj, mu1_direction):
    bump = morse.BumpVariation(l1=1.0, l2=5.0, shift=2.0, xi=mu1_direction)
    zero = morse.CombinedVariation([bump], [0.0])
    rep = morse.quadratic_Q(homothetic_traj, zero)
    assert rep.value == 0.0


def test_quadratic_Q_breakdown_sums(homothetic_traj, mu1_direction):
    bump = morse.BumpVariation(l1=0.5, l2=10.0, shift=30.0, xi=mu1_direction)
    rep = morse.quadratic_Q(homothetic_traj, bump)
    total = rep.kinetic + rep.rho_term + rep.cross + rep.hessian
    assert rep.value == pytest.approx(total, abs=1e-10)


def test_quadratic_Q_matches_exact_homothetic_form(coll1, homothetic_traj, mu1_direction):
    # on the frozen-shape collapse: Q = int phi'^2 + margin * phi^2 (cross = 0)
    rep_s = spectral.smallest_eigenvalue(coll1)
    bump = morse.BumpVariation(l1=1e-9, l2=20.0, shift=100.0, xi=mu1_direction)
    q = morse.quadratic_Q(homothetic_traj, bump)
    grid = np.linspace(100.0, 120.0, 20001)
    phi = bump.scalar(grid)
    dphi = bump.scalar_deriv(grid)
    expect = np.trapezoid(dphi**2 + (rep_s.margin) * phi**2, grid)
    assert q.value == pytest.approx(expect, rel=1e-6)
    assert abs(q.cross) < 1e-10


def test_second_variation_substitution_identity(homothetic_traj, mu1_direction):
    bump = morse.BumpVariation(l1=0.5, l2=8.0, shift=3.0, xi=mu1_direction)
    q = morse.quadratic_Q(homothetic_traj, bump)

    class FromW:
        support = bump.support

        def value(self, t):
            r, _, _, _ = homothetic_traj.evaluate(np.atleast_1d(t))
            return bump.value(t) / r[:, None, None]

        def deriv(self, t):
            r, rp, _, _ = homothetic_traj.evaluate(np.atleast_1d(t))
            return (bump.deriv(t) / r[:, None, None]
                    - bump.value(t) * (rp / r**2)[:, None, None])

    sv = morse.second_variation_s(homothetic_traj, FromW())
    assert sv == pytest.approx(q.value, abs=1e-8 * (1 + abs(q.value)))


@settings(max_examples=15, deadline=None)
@given(c=st.floats(min_value=-3.0, max_value=3.0))
def test_quadratic_scaling(c, homothetic_traj, mu1_direction):
    bump = morse.BumpVariation(l1=0.5, l2=6.0, shift=5.0, xi=mu1_direction)
    q1 = morse.quadratic_Q(homothetic_traj, bump).value
    qc = morse.quadratic_Q(homothetic_traj, morse.CombinedVariation([bump], [c])).value
    assert qc == pytest.approx(c * c * q1, abs=1e-9 * (1 + abs(q1)))


def test_morse_witnesses_newtonian(homothetic_traj, mu1_direction):
    shifts = morse.default_shifts(10, 0.0, 20.0)
    rep = morse.morse_witnesses(homothetic_traj, mu1_direction, shifts, l1=1e-9, l2=20.0)
    assert rep.witnesses == 10
    assert all(q < 0.0 for q in rep.q_values)
    # identical bumps on a frozen-shape trajectory give identical values
    assert np.ptp(rep.q_values) < 1e-8 * abs(rep.value)


def test_morse_witnesses_small_alpha():
    cc = central.collinear3(1.0, 1.0, 0.05)
    rep_s = spectral.smallest_eigenvalue(cc)
    assert rep_s.margin > 0.0
    traj = mcgehee.homothetic_oracle(cc, h=0.0, tau_max=450.0)
    shifts = morse.default_shifts(10, 0.0, 20.0)
    rep = morse.morse_witnesses(traj, rep_s.eigvec, shifts, l1=1e-9, l2=20.0)
    assert rep.witnesses == 0
    assert all(q > 0.0 for q in rep.q_values)


def test_morse_witness_sign_matches_margin_for_wide_bumps(homothetic_traj, coll1,
                                                          mu1_direction):
    # tail criterion: wide flat bumps follow the sign of the criterion margin
    rep_s = spectral.smallest_eigenvalue(coll1)
    prof = morse.Profile(width=20.0)
    assert prof.dirichlet_ratio() < abs(rep_s.margin) / 2
    bump = morse.BumpVariation(l1=1e-9, l2=20.0, shift=50.0, xi=mu1_direction)
    q = morse.quadratic_Q(homothetic_traj, bump)
    assert np.sign(q.value) == np.sign(rep_s.margin)


def test_morse_witnesses_overlap_rejected(homothetic_traj, mu1_direction):
    with pytest.raises(OverlappingSupports):
        morse.morse_witnesses(homothetic_traj, mu1_direction, [5.0, 15.0], l1=1e-9, l2=20.0)


def test_support_out_of_range(homothetic_traj, mu1_direction):
    bump = morse.BumpVariation(l1=1.0, l2=5.0, shift=449.0, xi=mu1_direction)
    with pytest.raises(SupportOutOfRange):
        morse.quadratic_Q(homothetic_traj, bump)


def test_disjoint_support_additivity(homothetic_traj, mu1_direction):
    bumps = [morse.BumpVariation(l1=1e-9, l2=12.0, shift=s, xi=mu1_direction)
             for s in (10.0, 40.0, 70.0)]
    qs = [morse.quadratic_Q(homothetic_traj, b).value for b in bumps]
    rng = np.random.default_rng(1)
    for _ in range(5):
        c = rng.standard_normal(3)
        combo = morse.CombinedVariation(bumps, c)
        q = morse.quadratic_Q(homothetic_traj, combo).value
        assert q == pytest.approx(float(np.sum(c**2 * np.array(qs))),
                                  abs=1e-10 * (1 + abs(q)))


def test_projected_bump_on_homothetic_is_exact(homothetic_traj, mu1_direction):
    bump = morse.BumpVariation(l1=0.5, l2=6.0, shift=2.0, xi=mu1_direction)
    proj, corr = morse.projected_bump(homothetic_traj, bump)
    assert corr < 1e-12
    t = np.linspace(2.5, 8.0, 50)
    assert np.allclose(proj.value(t), bump.value(t), atol=1e-12)


def test_projected_bump_on_perturbed_trajectory(coll1, mu1_direction):
    kick = np.zeros((3, 2))
    kick[:, 1] = 1e-3 * np.array([1.0, -2.0, 1.0]) / np.sqrt(6)
    u = nbody.potential(coll1.s0, coll1.masses, 1.0)
    sp2 = float(np.sum(coll1.masses * np.sum(kick * kick, axis=1)))
    rp = -0.25 * np.sqrt(2 * (u - 0.5 * sp2))
    st0 = mcgehee.McGeheeState(rho=1.0, rho_prime=rp, s=coll1.s0.copy(), s_prime=kick)
    traj = mcgehee.integrate_el(st0, coll1.masses, 1.0, tau_max=8.0,
                                opts=mcgehee.IntegratorOptions(rtol=1e-11, max_step=0.05))
    bump = morse.BumpVariation(l1=0.5, l2=5.0, shift=2.0, xi=mu1_direction)
    proj, corr = morse.projected_bump(traj, bump)
    assert 0.0 < corr < 0.1  # kick grows along the collapse; still small here
    q = morse.quadratic_Q(traj, proj)
    assert q.value < 0.0  # criterion holds at alpha = 1


# ---------------------------------------------------------------------------
# homographic blocks


def admissible_direction(cc, rng):
    xi = rng.standard_normal(cc.s0.shape)
    m = cc.masses
    xi -= (m @ xi)[None, :] / m.sum()
    xi -= float(np.sum(m[:, None] * cc.s0 * xi)) * cc.s0
    return xi / np.linalg.norm(xi)


def test_homographic_blocks_zero_variations(coll1):
    traj = mcgehee.homothetic_oracle(coll1, h=0.0, tau_max=30.0)
    z = morse.ScalarBump(l1=1.0, l2=4.0, amplitude=0.0)
    rng = np.random.default_rng(0)
    xi = admissible_direction(coll1, rng)
    v = morse.CombinedVariation(
        [morse.BumpVariation(l1=1.0, l2=4.0, shift=0.0, xi=xi)], [0.0])
    blocks = morse.homographic_blocks(traj, z, v)
    assert blocks == pytest.approx((0.0, 0.0, 0.0), abs=1e-14)


def test_homographic_mixed_block_vanishes(coll1):
    traj = mcgehee.homothetic_oracle(coll1, h=0.0, tau_max=30.0)
    rng = np.random.default_rng(3)
    for _ in range(10):
        xi = admissible_direction(coll1, rng)
        sh = rng.uniform(0.0, 20.0)
        v = morse.BumpVariation(l1=0.5, l2=3.0, shift=sh, xi=xi, profile_kind="bump")
        z = morse.ScalarBump(l1=0.5, l2=3.0, shift=sh, amplitude=rng.uniform(0.5, 2.0))
        _, mixed, _ = morse.homographic_blocks(traj, z, v)
        assert abs(mixed) < 1e-10


def test_homographic_blocks_positive_small_alpha():
    cc = central.collinear3(1.0, 1.0, 0.05)
    traj = mcgehee.homothetic_oracle(cc, h=1.0, tau_max=30.0, phi_min=1e-6)
    rng = np.random.default_rng(12)
    for _ in range(20):
        xi = admissible_direction(cc, rng)
        l1 = 0.3 + rng.uniform(0.0, 1.0)
        width = rng.uniform(0.5, 2.0)
        sh = rng.uniform(0.0, traj.tau_end - l1 - width - 0.5)
        v = morse.BumpVariation(l1=l1, l2=l1 + width, shift=sh, xi=xi, profile_kind="bump")
        z = morse.ScalarBump(l1=l1, l2=l1 + width, shift=sh,
                             amplitude=rng.uniform(0.2, 2.0))
        d2r, d2m, d2s = morse.homographic_blocks(traj, z, v)
        assert abs(d2m) < 1e-10
        assert d2r + d2s > 0.0
        assert d2r > 0.0


def test_homographic_blocks_reject_moving_shape(coll1):
    kick = np.zeros((3, 2))
    kick[:, 1] = 1e-4 * np.array([1.0, -2.0, 1.0]) / np.sqrt(6)
    u = nbody.potential(coll1.s0, coll1.masses, 1.0)
    rp = -0.25 * np.sqrt(2 * u)
    st0 = mcgehee.McGeheeState(rho=1.0, rho_prime=rp, s=coll1.s0.copy(), s_prime=kick)
    traj = mcgehee.integrate_el(st0, coll1.masses, 1.0, tau_max=2.0)
    z = morse.ScalarBump(l1=0.2, l2=1.0)
    rng = np.random.default_rng(4)
    v = morse.BumpVariation(l1=0.2, l2=1.0, shift=0.0, xi=admissible_direction(coll1, rng))
    with pytest.raises(NotHomographic):
        morse.homographic_blocks(traj, z, v)


def test_report_json_keys(homothetic_traj, mu1_direction):
    shifts = morse.default_shifts(3, 0.0, 20.0)
    rep = morse.morse_witnesses(homothetic_traj, mu1_direction, shifts, l1=1e-9, l2=20.0)
    assert set(rep.to_dict()) == {"Q", "kinetic", "rho_term", "cross", "hessian", "witnesses"}
