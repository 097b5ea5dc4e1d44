"""Non-minimality criterion and the closed-form sufficient conditions.

The criterion compares the smallest constrained Hessian eigenvalue mu1 at a
central configuration against -(2-alpha)^2/8 * U(s0); the margin is their
difference, negative when the criterion holds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nbody
from .central import CentralConfiguration, embed_in_3d
from .errors import BracketFailure, InvalidN, NotCentral

ALPHA_FLOOR = 1e-6


@dataclass(frozen=True)
class SpectralReport:
    mu1: float
    eigvec: np.ndarray
    b: float
    alpha: float
    margin: float
    satisfied: bool
    family: str
    eigenvalues: np.ndarray = field(default=None, repr=False)
    # full admissible eigenbasis, shape (k, N, d); eigvec is its first row --
    # for a degenerate bottom eigenvalue the whole eigenspace is available here
    eigenvectors: np.ndarray = field(default=None, repr=False)

    def bottom_eigenspace(self, tol: float = 1e-9) -> np.ndarray:
        near = np.abs(self.eigenvalues - self.mu1) < tol * (1.0 + abs(self.mu1))
        return self.eigenvectors[near]

    def to_dict(self) -> dict:
        return {
            "mu1": self.mu1,
            "b": self.b,
            "alpha": self.alpha,
            "margin": self.margin,
            "satisfied": bool(self.satisfied),
            "family": self.family,
        }


@dataclass(frozen=True)
class ThresholdResult:
    alpha_star: float
    bracket: tuple
    residual: float
    family: str


def rhs_factor(alpha: float) -> float:
    """(alpha+2)^2 / (8 alpha), the normalized right-hand side of the criterion."""
    if alpha < ALPHA_FLOOR:
        raise ValueError(f"alpha below evaluation floor {ALPHA_FLOOR}")
    return (alpha + 2.0) ** 2 / (8.0 * alpha)


def admissible_basis(s0: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Orthonormal basis (rows) of {<v, M s0> = 0} and {sum_i m_i v_i = 0}.

    Modified Gram-Schmidt on the coordinate basis after projecting out the
    normalized constraint rows; N is small so stability suffices.
    """
    n, d = s0.shape
    cons = [(m[:, None] * s0).ravel()]
    for c in range(d):
        row = np.zeros((n, d))
        row[:, c] = m
        cons.append(row.ravel())
    cons = [r / np.linalg.norm(r) for r in cons]
    # orthonormalize the constraints themselves first
    ortho_cons = []
    for r in cons:
        for q in ortho_cons:
            r = r - (q @ r) * q
        nr = np.linalg.norm(r)
        if nr > 1e-12:
            ortho_cons.append(r / nr)
    basis = []
    for k in range(n * d):
        v = np.zeros(n * d)
        v[k] = 1.0
        for q in ortho_cons:
            v = v - (q @ v) * q
        for q in basis:
            v = v - (q @ v) * q
        nv = np.linalg.norm(v)
        if nv > 1e-10:
            basis.append(v / nv)
    return np.array(basis)


def constrained_hessian_matrix(cc: CentralConfiguration, alpha: float) -> np.ndarray:
    """Full-space matrix of the ellipsoid-restricted second derivative."""
    h = nbody.hessian_full(cc.s0, cc.masses, alpha)
    mdiag = nbody.mass_matrix_diag(cc.masses, cc.dim)
    return h + alpha * cc.b * np.diag(mdiag)


def smallest_eigenvalue(cc: CentralConfiguration, alpha: float | None = None,
                        dim: int | None = None) -> SpectralReport:
    """Smallest eigenvalue of the constrained Hessian over admissible tangents.

    Eigenvectors are Euclidean-normalized; for unequal masses the value
    depends on this normalization choice.  dim=3 embeds a planar family so
    out-of-plane variations are admissible.
    """
    alpha = nbody.validate_alpha(cc.alpha if alpha is None else alpha)
    if abs(alpha - cc.alpha) > 1e-14:
        cc = type(cc)(s0=cc.s0.copy(), masses=cc.masses.copy(), alpha=alpha,
                      b=nbody.potential(cc.s0, cc.masses, alpha),
                      residual=nbody.central_residual(cc.s0, cc.masses, alpha),
                      family=cc.family, meta=dict(cc.meta))
    if dim == 3 and cc.dim == 2:
        cc = embed_in_3d(cc)
    tol = max(1e-8, 1e3 * np.finfo(float).eps * nbody.residual_scale(cc.s0, cc.masses, alpha))
    if cc.residual > tol:
        raise NotCentral(f"configuration residual {cc.residual:.3e} too large")
    basis = admissible_basis(cc.s0, cc.masses)
    h = constrained_hessian_matrix(cc, alpha)
    proj = basis @ h @ basis.T
    vals, vecs = np.linalg.eigh(proj)
    full = (basis.T @ vecs).T.reshape(vals.size, *cc.s0.shape)
    full /= np.linalg.norm(full.reshape(vals.size, -1), axis=1)[:, None, None]
    eigvec = full[0]
    mu1 = float(vals[0])
    margin = mu1 + (2.0 - alpha) ** 2 / 8.0 * cc.b
    return SpectralReport(mu1=mu1, eigvec=eigvec, b=cc.b, alpha=alpha, margin=margin,
                          satisfied=margin < 0.0, family=cc.family, eigenvalues=vals,
                          eigenvectors=full)


def check_rel_eigen(cc: CentralConfiguration, alpha: float | None = None,
                    dim: int | None = None) -> SpectralReport:
    """Evaluate mu1 < -(2-alpha)^2/8 * U(s0); satisfied iff the margin is negative."""
    if dim is None:
        dim = 3 if cc.family == "ngon" else cc.dim
    return smallest_eigenvalue(cc, alpha, dim=dim)


# ---------------------------------------------------------------------------
# collinear three-body closed forms


def collinear_equal_condition(alpha: float):
    """Normal-variation condition for three equal masses.

    lhs = 6*2^a / (2*2^a + 1), rhs = (a+2)^2/(8a); holds when lhs > rhs.
    """
    alpha = nbody.validate_alpha(alpha)
    lhs = 6.0 * 2.0**alpha / (2.0 * 2.0**alpha + 1.0)
    rhs = rhs_factor(alpha)
    return lhs, rhs, lhs > rhs


def collinear_threshold() -> ThresholdResult:
    """Crossing point of the equal-mass condition, below 6 - 4 sqrt(2)."""
    lo, hi = 0.01, 6.0 - 4.0 * np.sqrt(2.0)
    root = bisect(lambda a: collinear_equal_condition(a)[0] - collinear_equal_condition(a)[1],
                  lo, hi, tol=1e-14)
    lhs, rhs, _ = collinear_equal_condition(root)
    return ThresholdResult(alpha_star=root, bracket=(lo, hi), residual=abs(lhs - rhs),
                           family="collinear3-equal")


def collinear_unequal_condition(m1: float, alpha: float):
    """Published simplification of the unequal-mass condition (m2 normalized to 1).

    lhs = (2^a (16 m1 + 4) - m1^2 + 2 m1) / (2^(a+1) + m1), rhs = 3(2-a)^2/(8a).
    See collinear_unequal_oracle for the independent matrix-based evaluation,
    which disagrees with this simplification; both are exposed.
    """
    if m1 <= 0:
        raise ValueError("m1 must be positive")
    alpha = nbody.validate_alpha(alpha)
    lhs = (2.0**alpha * (16.0 * m1 + 4.0) - m1**2 + 2.0 * m1) / (2.0 ** (alpha + 1.0) + m1)
    rhs = 3.0 * (2.0 - alpha) ** 2 / (8.0 * alpha)
    return lhs, rhs, lhs > rhs


def collinear_unequal_oracle(m1: float, alpha: float):
    """Direct matrix evaluation of the unequal-mass normal-variation condition.

    Assembles the interaction matrix at the symmetric collinear configuration
    with masses (m1, 1, m1), applies the normal direction (1, -2, 1) and
    normalizes exactly as the closed form does:
    lhs = <v, M A v> / (2 U) - (m1 + 2), rhs = 3(2-a)^2/(8a).
    """
    from .central import collinear3

    cc = collinear3(m1, 1.0, alpha)
    A = nbody.matrix_A(cc.s0, cc.masses, alpha)
    c = np.array([1.0, -2.0, 1.0])
    vmav = float(c @ (cc.masses * (A @ c)))
    lhs = vmav / (2.0 * cc.b) - (m1 + 2.0)
    rhs = 3.0 * (2.0 - alpha) ** 2 / (8.0 * alpha)
    return lhs, rhs, lhs > rhs


def unequal_existence_boundary() -> ThresholdResult:
    """Largest outer mass admitting some threshold alpha*, from the published form.

    Root in m1 of lhs(m1, alpha->2) = 0, i.e. of -m1^2 + 66 m1 + 16; the
    condition holds for m1 below the root and fails above it.
    """
    def f2(m1):
        return (-m1**2 + 66.0 * m1 + 16.0) / (m1 + 8.0)

    root = bisect(f2, 1.0, 200.0)
    return ThresholdResult(alpha_star=root, bracket=(1.0, 200.0), residual=abs(f2(root)),
                           family="collinear3-m2-boundary")


def collinear_B_matrix(alpha: float) -> np.ndarray:
    """Interaction matrix of the equal-mass collinear family restricted to zero-sum
    directions, in the basis (1,0,-1), (0,1,-1); gamma = 2^((alpha+2)/2)."""
    g = 2.0 ** ((alpha + 2.0) / 2.0)
    return np.array([[2.0 * g + 4.0 / g, g + 2.0 / g], [g + 2.0 / g, 5.0 * g + 1.0 / g]])


def collinear_B_eigenvalues(alpha: float):
    """Closed-form eigenvalues (7g + 5/g +- sqrt(13 g^2 - 2 + 25/g^2)) / 2."""
    g = 2.0 ** ((alpha + 2.0) / 2.0)
    disc = np.sqrt(13.0 * g * g - 2.0 + 25.0 / (g * g))
    return (7.0 * g + 5.0 / g + disc) / 2.0, (7.0 * g + 5.0 / g - disc) / 2.0


def collinear_B_eigen_condition(alpha: float):
    """Wider sufficient condition via the top restricted eigenvalue.

    lhs = lambda_max(B), rhs = (2+alpha)^2/(8 alpha) * (gamma + 2/gamma); the
    weight equals U(s0) of the equal-mass collinear configuration.
    """
    alpha = nbody.validate_alpha(alpha)
    g = 2.0 ** ((alpha + 2.0) / 2.0)
    lhs = collinear_B_eigenvalues(alpha)[0]
    rhs = rhs_factor(alpha) * (g + 2.0 / g)
    return lhs, rhs, lhs > rhs


# ---------------------------------------------------------------------------
# regular n-gon closed forms


def _ngon_sines(n: int) -> np.ndarray:
    """Normalized chord lengths sin((k-1) pi / n) for k = 2..n."""
    if n < 4:
        raise InvalidN(f"polygon conditions need n >= 4, got {n}")
    k = np.arange(2, n + 1)
    return np.sin((k - 1) * np.pi / n)


def psi_phi(n: int, alpha: float):
    """The normalized quadratic form Psi_n and its mean-field part Phi_n.

    Built from the normalized chords; the probe concentrates on one adjacent
    pair for n >= 5 (any adjacent pair gives the same value by symmetry, see
    psi_from_matrix(pair=...)) and alternates over all four vertices for
    n = 4.  Valid for alpha in [0, 2] including the endpoints.
    """
    if not 0.0 <= alpha <= 2.0:
        raise ValueError("alpha must lie in [0, 2] for the polygon conditions")
    r = _ngon_sines(n)
    s_a = np.sum(r ** (-alpha))
    s_a2 = np.sum(r ** (-(alpha + 2.0)))
    phi = 0.5 * s_a2 / s_a
    r12 = r[0] ** (-(alpha + 2.0))
    if n == 4:
        r13 = r[1] ** (-(alpha + 2.0))
        psi = phi + 0.5 * (2.0 * r12 - r13) / s_a
    else:
        psi = phi + 0.5 * r12 / s_a
    return float(psi), float(phi)


def psi_phi_grid(n: int, alphas: np.ndarray):
    """Vectorized Psi_n and Phi_n over an alpha grid (values in [0, 2])."""
    alphas = np.asarray(alphas, dtype=float)
    r = _ngon_sines(n)
    pow_a = r[None, :] ** (-alphas[:, None])
    pow_a2 = r[None, :] ** (-(alphas[:, None] + 2.0))
    s_a = pow_a.sum(axis=1)
    s_a2 = pow_a2.sum(axis=1)
    phi = 0.5 * s_a2 / s_a
    if n == 4:
        psi = phi + 0.5 * (2.0 * pow_a2[:, 0] - pow_a2[:, 1]) / s_a
    else:
        psi = phi + 0.5 * pow_a2[:, 0] / s_a
    return psi, phi


def psi_from_matrix(n: int, alpha: float, pair: int = 0) -> float:
    """Oracle route for Psi_n through the actual interaction matrix."""
    from .central import ngon

    cc = ngon(n, max(alpha, ALPHA_FLOOR)) if alpha > 0 else ngon(n, 0.5)
    # distances are alpha independent; assemble A at the requested alpha by hand
    ii, jj, _, dist = nbody.pair_separations(cc.s0)
    a_mat = np.zeros((n, n))
    w = dist ** (-(alpha + 2.0))
    a_mat[ii, jj] = -w
    a_mat[jj, ii] = -w
    a_mat[np.arange(n), np.arange(n)] = -a_mat.sum(axis=1)
    if n == 4:
        wvec = np.array([0.5, -0.5, 0.5, -0.5])
    else:
        wvec = np.zeros(n)
        wvec[pair % n] = 1.0 / np.sqrt(2.0)
        wvec[(pair + 1) % n] = -1.0 / np.sqrt(2.0)
    quad = float(wvec @ a_mat @ wvec)
    dist_row = np.array([np.linalg.norm(cc.s0[0] - cc.s0[k]) for k in range(1, n)])
    return 2.0 / n * quad / np.sum(dist_row ** (-alpha))


def ngon_threshold(n: int, grid_points: int = 4096) -> ThresholdResult:
    """Crossing of Psi_n with (alpha+2)^2/(8 alpha) on (0, 1]; below 1 for n >= 4."""
    def f(a):
        return psi_phi(n, a)[0] - rhs_factor(a)

    lo, hi = ALPHA_FLOOR, 1.0
    grid = np.linspace(lo, hi, grid_points)
    vals = np.array([f(a) for a in grid])
    sign_change = np.nonzero(np.diff(np.sign(vals)) != 0)[0]
    if sign_change.size == 0:
        raise BracketFailure(f"no sign change for n={n} on ({lo}, {hi}]")
    k = sign_change[0]
    root = bisect(f, grid[k], grid[k + 1], tol=1e-14)
    return ThresholdResult(alpha_star=root, bracket=(float(grid[k]), float(grid[k + 1])),
                           residual=abs(f(root)), family=f"ngon-{n}")


def hiphop_g(n: int, alpha: float) -> float:
    """Alternating vertical-variation sum for even polygons.

    g(n, a) = sin^(-a-2)(pi/n) + 2 sum_{j=3}^{n/2} (-1)^j sin^(-a-2)((j-1)pi/n)
              + (-1)^(n/2+1); positive g certifies the criterion for the
    alternating out-of-plane probe.
    """
    if n < 6 or n % 2 != 0:
        raise InvalidN(f"hip-hop condition needs even n >= 6, got {n}")
    if not 0.0 <= alpha <= 2.0:
        raise ValueError("alpha must lie in [0, 2]")
    total = np.sin(np.pi / n) ** (-(alpha + 2.0))
    j = np.arange(3, n // 2 + 1)
    if j.size:
        total += 2.0 * np.sum((-1.0) ** j * np.sin((j - 1) * np.pi / n) ** (-(alpha + 2.0)))
    total += (-1.0) ** (n // 2 + 1)
    return float(total)


def hiphop_condition(n: int, alpha: float):
    """Direct evaluation of the alternating-probe inequality from the matrix.

    lhs = (1/n) sum_{ij} (-1)^(i+j) a_ij, rhs = (alpha+2)^2/(8 alpha) U(s0).
    """
    from .central import ngon

    if n < 6 or n % 2 != 0:
        raise InvalidN(f"even n >= 6 required, got {n}")
    cc = ngon(n, alpha)
    A = nbody.matrix_A(cc.s0, cc.masses, alpha)
    signs = (-1.0) ** (np.arange(n) + 1)
    lhs = float(signs @ A @ signs) / n
    rhs = rhs_factor(alpha) * cc.b
    return lhs, rhs, lhs > rhs


# ---------------------------------------------------------------------------
# monotone ratio helpers


def ratio_f(bases: np.ndarray, x: float) -> float:
    """sum b_j^(x+2) / sum b_j^x for a decreasing family b_j > 1."""
    bases = np.asarray(bases, dtype=float)
    return float(np.sum(bases ** (x + 2.0)) / np.sum(bases**x))


def ratio_g(bases: np.ndarray, x: float) -> float:
    """(1 + sum b_j^(x+2)) / (1 + sum b_j^x), the variant absorbing a unit term."""
    bases = np.asarray(bases, dtype=float)
    return float((1.0 + np.sum(bases ** (x + 2.0))) / (1.0 + np.sum(bases**x)))


def ngon_ratio_bases(n: int) -> np.ndarray:
    """Distinct inverse chords 1/sin(j pi / n) > 1 feeding the monotone ratios."""
    j = np.arange(1, (n + 1) // 2 if n % 2 else n // 2)
    return 1.0 / np.sin(j * np.pi / n)


# ---------------------------------------------------------------------------
# root finding


def bisect(f, lo: float, hi: float, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Plain bisection; raises BracketFailure without a sign change."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise BracketFailure(f"no sign change on [{lo}, {hi}]: f(lo)={flo:.3e}, f(hi)={fhi:.3e}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or (hi - lo) < tol:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    return 0.5 * (lo + hi)
