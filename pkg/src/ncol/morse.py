"""Second variation of the action in the shape variable and bump-probe machinery.

The working form after the substitution w = rho v is

    Q(w) = int |w'|^2 + (rho'/rho)^2 |w|^2 - 2 (rho'/rho) <w', w> + D2U_E(s)(w, w) dtau

with all pairings mass-weighted.  On an exact zero-energy collapse the cross
term integrates away and Q reduces to the Dirichlet energy against the margin
coefficient, which is what the witness counts probe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nbody
from .errors import NotHomographic, OverlappingSupports, SupportOutOfRange
from .mcgehee import Trajectory


# ---------------------------------------------------------------------------
# smooth compactly supported profiles


def _soft(u):
    """exp(-1/u) extended by zero for u <= 0."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 1e-12
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def _soft_d(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 1e-12
    out[pos] = np.exp(-1.0 / u[pos]) / u[pos] ** 2
    return out


def _transition(u):
    """C-infinity monotone step from 0 at u<=0 to 1 at u>=1."""
    a, b = _soft(u), _soft(1.0 - np.asarray(u, dtype=float))
    return a / (a + b)


def _transition_d(u):
    u = np.asarray(u, dtype=float)
    a, b = _soft(u), _soft(1.0 - u)
    da, db = _soft_d(u), -_soft_d(1.0 - u)
    denom = (a + b) ** 2
    out = np.zeros_like(u)
    ok = denom > 0
    out[ok] = (da[ok] * b[ok] - a[ok] * db[ok]) / denom[ok]
    return out


@dataclass(frozen=True)
class Profile:
    """Smooth bump on (0, width); kind 'bump' or 'flattop'."""

    width: float
    kind: str = "flattop"
    flat_fraction: float = 0.8

    def value(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "bump":
            z = 2.0 * u / self.width - 1.0
            out = np.zeros_like(z)
            inside = np.abs(z) < 1.0
            out[inside] = np.exp(-1.0 / (1.0 - z[inside] ** 2) + 1.0)
            return out
        ramp = 0.5 * (1.0 - self.flat_fraction) * self.width
        up = _transition(u / ramp)
        down = _transition((self.width - u) / ramp)
        return up * down

    def deriv(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "bump":
            z = 2.0 * u / self.width - 1.0
            out = np.zeros_like(z)
            inside = np.abs(z) < 1.0
            zi = z[inside]
            out[inside] = np.exp(-1.0 / (1.0 - zi**2) + 1.0) * (-2.0 * zi / (1.0 - zi**2) ** 2) \
                * (2.0 / self.width)
            return out
        ramp = 0.5 * (1.0 - self.flat_fraction) * self.width
        up = _transition(u / ramp)
        down = _transition((self.width - u) / ramp)
        dup = _transition_d(u / ramp) / ramp
        ddown = -_transition_d((self.width - u) / ramp) / ramp
        return dup * down + up * ddown

    def dirichlet_ratio(self, n: int = 4001) -> float:
        """int phi'^2 / int phi^2, the kinetic cost of the profile."""
        u = np.linspace(0.0, self.width, n)
        num = np.trapezoid(self.deriv(u) ** 2, u)
        den = np.trapezoid(self.value(u) ** 2, u)
        return float(num / den)


@dataclass(frozen=True)
class BumpVariation:
    """Shifted profile times a fixed admissible direction xi at the limit shape."""

    l1: float
    l2: float
    shift: float
    xi: np.ndarray
    profile_kind: str = "flattop"
    flat_fraction: float = 0.8
    profile: Profile = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.l1 < self.l2:
            raise ValueError("need 0 < l1 < l2")
        object.__setattr__(self, "profile",
                           Profile(width=self.l2 - self.l1, kind=self.profile_kind,
                                   flat_fraction=self.flat_fraction))
        object.__setattr__(self, "xi", np.asarray(self.xi, dtype=float))

    @property
    def support(self):
        return (self.l1 + self.shift, self.l2 + self.shift)

    def scalar(self, t):
        return self.profile.value(np.asarray(t) - self.l1 - self.shift)

    def scalar_deriv(self, t):
        return self.profile.deriv(np.asarray(t) - self.l1 - self.shift)

    def value(self, t):
        t = np.atleast_1d(t)
        return self.scalar(t)[:, None, None] * self.xi

    def deriv(self, t):
        t = np.atleast_1d(t)
        return self.scalar_deriv(t)[:, None, None] * self.xi


class CombinedVariation:
    """Linear combination sum_n c_n w_n of bump variations."""

    def __init__(self, bumps, coeffs):
        self.bumps = list(bumps)
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.support = (min(b.support[0] for b in bumps), max(b.support[1] for b in bumps))
        if all(np.array_equal(b.xi, bumps[0].xi) for b in bumps):
            self.xi = bumps[0].xi

    def scalar(self, t):
        return sum(c * b.scalar(t) for c, b in zip(self.coeffs, self.bumps))

    def scalar_deriv(self, t):
        return sum(c * b.scalar_deriv(t) for c, b in zip(self.coeffs, self.bumps))

    def value(self, t):
        return sum(c * b.value(t) for c, b in zip(self.coeffs, self.bumps))

    def deriv(self, t):
        return sum(c * b.deriv(t) for c, b in zip(self.coeffs, self.bumps))


def _hessian_row(traj: Trajectory, grid, s, variation, values):
    """Hessian term along the flow; constant-coefficient on frozen-shape data."""
    if traj.exact_homothetic and hasattr(variation, "xi") and hasattr(variation, "scalar"):
        coef = traj.potential_scale * nbody.hessian_on_ellipsoid(
            traj.s[0], traj.masses, traj.alpha, variation.xi)
        phi = variation.scalar(grid)
        return coef * phi**2
    return np.array([
        traj.potential_scale * nbody.hessian_on_ellipsoid(s[k], traj.masses, traj.alpha,
                                                          values[k])
        for k in range(grid.size)
    ])


@dataclass(frozen=True)
class SecondVariationReport:
    value: float
    kinetic: float
    rho_term: float
    cross: float
    hessian: float
    q_values: tuple = ()
    witnesses: int | None = None
    projection_correction: float = 0.0

    def to_dict(self) -> dict:
        return {
            "Q": self.value,
            "kinetic": self.kinetic,
            "rho_term": self.rho_term,
            "cross": self.cross,
            "hessian": self.hessian,
            "witnesses": int(self.witnesses) if self.witnesses is not None else 0,
        }


# ---------------------------------------------------------------------------
# quadrature on the trajectory


def _support_grid(traj: Trajectory, support, points_per_unit: float):
    lo, hi = support
    if lo < traj.tau[0] - 1e-12 or hi > traj.tau_end + 1e-12:
        raise SupportOutOfRange(
            f"support ({lo}, {hi}) exceeds horizon [{traj.tau[0]}, {traj.tau_end}]")
    n = max(64, int(np.ceil((hi - lo) * points_per_unit)))
    if n % 2:
        n += 1
    return np.linspace(lo, hi, n + 1)


def _refine_until(integral_fn, traj, support, tol):
    """Composite-Simpson value refined by grid doubling to the requested tolerance."""
    ppu = 16.0
    prev = None
    for _ in range(8):
        grid = _support_grid(traj, support, ppu)
        vals = integral_fn(grid)
        step = grid[1] - grid[0]
        simpson = step / 3.0 * (vals[0] + vals[-1] + 4.0 * vals[1:-1:2].sum()
                                + 2.0 * vals[2:-1:2].sum())
        if prev is not None and abs(simpson - prev) <= tol * (1.0 + abs(simpson)):
            return simpson
        prev = simpson
        ppu *= 2.0
    return prev


def _mdot(m, a, b):
    return np.einsum("j,kjd,kjd->k", m, a, b)


def second_variation_s(traj: Trajectory, variation, quad_tol: float = 1e-8) -> float:
    """int rho^2 (|v'|_M^2 + D2U_E(s)(v, v)) dtau for a compactly supported v."""
    m = traj.masses

    def integrand(grid):
        rho, _, s, _ = traj.evaluate(grid)
        v = variation.value(grid)
        dv = variation.deriv(grid)
        kin = _mdot(m, dv, dv)
        hess = _hessian_row(traj, grid, s, variation, v)
        return rho**2 * (kin + hess)

    return float(_refine_until(integrand, traj, variation.support, quad_tol))


def quadratic_Q(traj: Trajectory, variation, quad_tol: float = 1e-8) -> SecondVariationReport:
    """Evaluate Q(w) with its kinetic / radial / cross / Hessian breakdown."""
    m = traj.masses
    parts = np.zeros(4)

    def integrand(grid):
        rho, rho_p, s, _ = traj.evaluate(grid)
        ratio = rho_p / rho
        w = variation.value(grid)
        dw = variation.deriv(grid)
        kin = _mdot(m, dw, dw)
        mass2 = _mdot(m, w, w)
        crossdot = _mdot(m, dw, w)
        hess = _hessian_row(traj, grid, s, variation, w)
        rows = np.stack([kin, ratio**2 * mass2, -2.0 * ratio * crossdot, hess])
        return rows

    ppu = 16.0
    prev = None
    for _ in range(8):
        grid = _support_grid(traj, variation.support, ppu)
        rows = integrand(grid)
        step = grid[1] - grid[0]
        simpson = step / 3.0 * (rows[:, 0] + rows[:, -1] + 4.0 * rows[:, 1:-1:2].sum(axis=1)
                                + 2.0 * rows[:, 2:-1:2].sum(axis=1))
        total = simpson.sum()
        if prev is not None and abs(total - prev) <= quad_tol * (1.0 + abs(total)):
            parts = simpson
            break
        prev = total
        parts = simpson
        ppu *= 2.0
    return SecondVariationReport(value=float(parts.sum()), kinetic=float(parts[0]),
                                 rho_term=float(parts[1]), cross=float(parts[2]),
                                 hessian=float(parts[3]))


def default_shifts(count: int, l1: float, l2: float, start: float | None = None):
    """Shifts spacing supports by one extra width, keeping them pairwise disjoint."""
    width = l2 - l1
    if start is None:
        start = width
    return [start + 2.0 * width * k for k in range(count)]


def morse_witnesses(traj: Trajectory, xi, shifts, l1: float = 0.0, l2: float = 20.0,
                    profile: str = "flattop", flat_fraction: float = 0.8,
                    quad_tol: float = 1e-8, combo_seed: int = 0) -> SecondVariationReport:
    """Count negative values of Q over a family of disjointly supported bumps.

    Also verifies on a random coefficient vector that disjoint supports make Q
    additive, i.e. Q(sum c_n w_n) = sum c_n^2 Q(w_n).
    """
    if l1 <= 0.0:
        l1 = 1e-9
    shifts = list(shifts)
    if any(b >= a for a, b in zip(shifts[1:], shifts[:-1])):
        raise ValueError("shifts must be strictly increasing")
    xi = np.asarray(xi, dtype=float).reshape(traj.s[0].shape)
    nbody.check_tangent(traj.s[0], traj.masses, xi)
    if abs(np.linalg.norm(xi) - 1.0) > 1e-8:
        raise ValueError("probe direction must have unit norm")
    bumps = [BumpVariation(l1=l1, l2=l2, shift=sh, xi=xi, profile_kind=profile,
                           flat_fraction=flat_fraction) for sh in shifts]
    for b1, b2 in zip(bumps[:-1], bumps[1:]):
        if b1.support[1] > b2.support[0] + 1e-12:
            raise OverlappingSupports(f"supports {b1.support} and {b2.support} overlap")
    reports = [quadratic_Q(traj, b, quad_tol) for b in bumps]
    q_vals = tuple(r.value for r in reports)
    witnesses = int(sum(1 for q in q_vals if q < 0.0))
    rng = np.random.default_rng(combo_seed)
    coeffs = rng.standard_normal(len(bumps))
    combo = CombinedVariation(bumps, coeffs)
    q_combo = quadratic_Q(traj, combo, quad_tol).value
    q_expected = float(np.sum(coeffs**2 * np.array(q_vals)))
    scale = 1.0 + abs(q_expected)
    if abs(q_combo - q_expected) > 1e-8 * scale:
        raise AssertionError(
            f"disjoint-support additivity violated: {q_combo} vs {q_expected}")
    worst = min(reports, key=lambda r: r.value)
    return SecondVariationReport(value=worst.value, kinetic=worst.kinetic,
                                 rho_term=worst.rho_term, cross=worst.cross,
                                 hessian=worst.hessian, q_values=q_vals, witnesses=witnesses)


def projected_bump(traj: Trajectory, bump: BumpVariation):
    """Re-project a bump direction onto the moving tangent space.

    Returns a variation object and the largest projection correction
    |<M xi, s(tau)>| met on the support; zero on exact homothetic data.
    """
    m = traj.masses

    class _Projected:
        support = bump.support

        def value(self, t):
            t = np.atleast_1d(t)
            _, _, s, _ = traj.evaluate(t)
            phi = bump.scalar(t)[:, None, None]
            xi = bump.xi
            coef = np.einsum("j,jd,kjd->k", m, xi, s)[:, None, None]
            return phi * (xi - coef * s)

        def deriv(self, t):
            t = np.atleast_1d(t)
            _, _, s, sp = traj.evaluate(t)
            phi = bump.scalar(t)[:, None, None]
            dphi = bump.scalar_deriv(t)[:, None, None]
            xi = bump.xi
            coef = np.einsum("j,jd,kjd->k", m, xi, s)[:, None, None]
            dcoef = np.einsum("j,jd,kjd->k", m, xi, sp)[:, None, None]
            return dphi * (xi - coef * s) - phi * (dcoef * s + coef * sp)

    grid = np.linspace(bump.support[0], bump.support[1], 257)
    _, _, s, _ = traj.evaluate(grid)
    corr = float(np.max(np.abs(np.einsum("j,jd,kjd->k", m, bump.xi, s))))
    return _Projected(), corr


# ---------------------------------------------------------------------------
# homographic second-variation blocks


def homographic_blocks(traj: Trajectory, zeta, variation, quad_tol: float = 1e-8,
                       sprime_tol: float = 1e-10):
    """The radial, mixed and shape blocks of the second variation on frozen-shape data.

    zeta is a scalar path (value/deriv), variation a tangent path.  Raises
    NotHomographic when the trajectory carries shape velocity.
    """
    if float(np.max(traj.sprime_norm_trace())) > sprime_tol:
        raise NotHomographic("trajectory has nonzero shape velocity")
    m = traj.masses
    alpha = traj.alpha
    coef = (4.0 / (2.0 - alpha)) ** 2
    s0 = traj.s[0]
    grad_vec = traj.potential_scale * (
        nbody.gradient(s0, m, alpha)
        + alpha * nbody.potential(s0, m, alpha) * m[:, None] * s0)

    sup_z = zeta.support
    sup_v = variation.support
    support = (min(sup_z[0], sup_v[0]), max(sup_z[1], sup_v[1]))

    def rho_integrand(grid):
        _, _, s, sp = traj.evaluate(grid)
        z = zeta.scalar(grid)
        dz = zeta.scalar_deriv(grid)
        sp2 = _mdot(m, sp, sp)
        u = np.array([traj.potential_scale * nbody.potential(s[k], m, alpha)
                      for k in range(grid.size)])
        return coef * dz**2 + z**2 * (sp2 + 2.0 * u)

    def mixed_integrand(grid):
        rho, _, s, sp = traj.evaluate(grid)
        z = zeta.scalar(grid)
        v = variation.value(grid)
        dv = variation.deriv(grid)
        kin = _mdot(m, sp, dv)
        force = np.einsum("jd,kjd->k", grad_vec, v)
        return 2.0 * rho * z * (kin + force)

    def shape_integrand(grid):
        rho, _, s, _ = traj.evaluate(grid)
        v = variation.value(grid)
        dv = variation.deriv(grid)
        kin = _mdot(m, dv, dv)
        hess = np.array([
            traj.potential_scale * nbody.hessian_on_ellipsoid(s[k], m, alpha, v[k])
            for k in range(grid.size)
        ])
        return rho**2 * (kin + hess)

    d2_rho = float(_refine_until(rho_integrand, traj, support, quad_tol))
    d2_mixed = float(_refine_until(mixed_integrand, traj, support, quad_tol))
    d2_shape = float(_refine_until(shape_integrand, traj, support, quad_tol))
    return d2_rho, d2_mixed, d2_shape


@dataclass(frozen=True)
class ScalarBump:
    """Scalar compactly supported path for the radial direction."""

    l1: float
    l2: float
    shift: float = 0.0
    amplitude: float = 1.0
    profile_kind: str = "bump"
    profile: Profile = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "profile", Profile(width=self.l2 - self.l1,
                                                    kind=self.profile_kind))

    @property
    def support(self):
        return (self.l1 + self.shift, self.l2 + self.shift)

    def scalar(self, t):
        return self.amplitude * self.profile.value(np.asarray(t) - self.l1 - self.shift)

    def scalar_deriv(self, t):
        return self.amplitude * self.profile.deriv(np.asarray(t) - self.l1 - self.shift)
