"""Central configurations: analytic families and a numeric critical-point solver."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import nbody
from .errors import ConvergedToCollision, InvalidMass, InvalidN, NoConvergence, NotCentral


@dataclass(frozen=True)
class CentralConfiguration:
    """A verified critical point of U on the ellipsoid {I = 1}.

    b is the potential level U(s0); residual the norm of
    grad U(s0) + alpha U(s0) M s0.
    """

    s0: np.ndarray
    masses: np.ndarray
    alpha: float
    b: float
    residual: float
    family: str = "numeric"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.s0.setflags(write=False)
        self.masses.setflags(write=False)

    @property
    def n(self) -> int:
        return self.s0.shape[0]

    @property
    def dim(self) -> int:
        return self.s0.shape[1]

    def to_json(self) -> str:
        return nbody.config_to_json(
            self.s0,
            self.masses,
            self.alpha,
            extra={"b": self.b, "residual": self.residual, "family": self.family},
        )


def _verify(s0, m, alpha, family, residual_tol=nbody.RESIDUAL_TOL, meta=None) -> CentralConfiguration:
    s0 = nbody.as_positions(s0)
    m = nbody.as_masses(m)
    inertia = nbody.moment_of_inertia(s0, m)
    if abs(inertia - 1.0) > 1e-12:
        raise NotCentral(f"moment of inertia {inertia} is off the unit ellipsoid")
    res = nbody.central_residual(s0, m, alpha)
    tol = max(residual_tol, 100 * np.finfo(float).eps * nbody.residual_scale(s0, m, alpha))
    if res > tol:
        raise NotCentral(f"centrality residual {res:.3e} exceeds {tol:.3e}")
    b = nbody.potential(s0, m, alpha)
    return CentralConfiguration(s0=s0, masses=m, alpha=float(alpha), b=b, residual=res,
                                family=family, meta=meta or {})


def collinear3(m1: float, m2: float, alpha: float) -> CentralConfiguration:
    """Symmetric collinear three-body configuration with outer masses m1 = m3.

    Outer bodies sit at (+-1/sqrt(2 m1), 0), the middle body of mass m2 at the
    origin; this is central for every m2 and alpha, verified numerically.
    """
    if m1 <= 0 or m2 <= 0:
        raise InvalidMass("masses must be positive")
    nbody.validate_alpha(alpha)
    a = 1.0 / np.sqrt(2.0 * m1)
    s0 = np.array([[-a, 0.0], [0.0, 0.0], [a, 0.0]])
    m = np.array([m1, m2, m1], dtype=float)
    family = "collinear3-equal" if m1 == m2 else "collinear3-m2"
    return _verify(s0, m, alpha, family)


def ngon(n: int, alpha: float, dim: int = 2) -> CentralConfiguration:
    """Regular n-gon of unit masses inscribed in a circle of radius 1/sqrt(n).

    Stated for n >= 4; n in {2, 3} is allowed with a warning since the
    construction stays central there too.
    """
    if n < 2:
        raise InvalidN(f"need at least two vertices, got {n}")
    if n < 4:
        warnings.warn(f"ngon with n={n} is outside the stated range n >= 4", stacklevel=2)
    nbody.validate_alpha(alpha)
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    k = np.arange(n)
    s0 = np.zeros((n, dim))
    s0[:, 0] = np.cos(2.0 * np.pi * k / n) / np.sqrt(n)
    s0[:, 1] = np.sin(2.0 * np.pi * k / n) / np.sqrt(n)
    m = np.ones(n)
    return _verify(s0, m, alpha, "ngon", meta={"n": n})


def ngon_distance(n: int, k: int) -> float:
    """Chord distance r_1k = (2/sqrt(n)) sin((k-1) pi / n) between vertex 1 and k."""
    return 2.0 / np.sqrt(n) * np.sin((k - 1) * np.pi / n)


def embed_in_3d(cc: CentralConfiguration) -> CentralConfiguration:
    """Pad a planar configuration with a zero third coordinate."""
    if cc.dim == 3:
        return cc
    s0 = np.hstack([cc.s0, np.zeros((cc.n, 1))])
    return CentralConfiguration(s0=s0, masses=cc.masses.copy(), alpha=cc.alpha, b=cc.b,
                                residual=cc.residual, family=cc.family, meta=dict(cc.meta))


def canonicalize(x, m) -> np.ndarray:
    """Rotate to a deterministic body-anchored frame for comparisons.

    Principal axes degenerate on symmetric shapes (a regular polygon has an
    isotropic inertia tensor), so the frame is anchored instead on labeled
    bodies: the farthest body goes on the positive first axis, the next
    independent one fixes the remaining orientation, and reflections are
    normalized by sign conventions.  Bodies keep their labels.
    """
    x = nbody.as_positions(x)
    m = nbody.as_masses(m)
    y = x - nbody.center_of_mass(x, m)
    n, d = y.shape
    norms = np.linalg.norm(y, axis=1)
    anchor = int(np.argmax(np.round(norms, 9)))
    e1 = y[anchor] / norms[anchor]
    basis = [e1]
    for j in range(n):
        if len(basis) == d:
            break
        v = y[j].copy()
        for e in basis:
            v -= (v @ e) * e
        nv = np.linalg.norm(v)
        if nv > 1e-9 * max(1.0, norms.max()):
            basis.append(v / nv)
    while len(basis) < d:
        # complete with coordinate directions for degenerate point sets
        for k in range(d):
            v = np.zeros(d)
            v[k] = 1.0
            for e in basis:
                v -= (v @ e) * e
            nv = np.linalg.norm(v)
            if nv > 1e-9:
                basis.append(v / nv)
                break
    y = y @ np.array(basis).T
    for c in range(1, d):
        col = y[:, c]
        k = np.argmax(np.abs(np.round(col, 9)))
        if col[k] < 0:
            y[:, c] = -col
    return y


def solve_central(initial, m, alpha, max_iter: int = 200, residual_tol: float = 1e-11,
                  collision_floor: float = 1e-8) -> CentralConfiguration:
    """Damped Gauss-Newton solve of grad U(x) + alpha U(x) M x = 0.

    Roots of this square system automatically satisfy I(x) = 1 and a zero
    center of mass, so no explicit constraint handling is needed; iterates are
    still re-projected for conditioning.  The target points are saddles of the
    constrained potential, which is why the solver works on the residual
    rather than descending U itself.
    """
    x = nbody.as_positions(initial).copy()
    m = nbody.as_masses(m)
    alpha = nbody.validate_alpha(alpha)
    n, d = x.shape

    def project(y):
        y = y - nbody.center_of_mass(y, m)
        return y / np.sqrt(nbody.moment_of_inertia(y, m))

    x = project(x)
    mdiag = nbody.mass_matrix_diag(m, d)

    def rotation_rows(y):
        # rotation generators span the Jacobian null space at roots; deflate
        rows = []
        for a in range(d):
            for b in range(a + 1, d):
                r = np.zeros((n, d))
                r[:, a] = -y[:, b]
                r[:, b] = y[:, a]
                r = r.ravel()
                nr = np.linalg.norm(r)
                if nr > 1e-12:
                    rows.append(r / nr)
        return rows

    for _ in range(max_iter):
        if nbody.min_distance(x) < collision_floor:
            raise ConvergedToCollision("iterate entered the collision neighborhood")
        f = nbody.central_residual_vector(x, m, alpha).ravel()
        res = np.linalg.norm(f)
        scale = nbody.residual_scale(x, m, alpha)
        if res <= residual_tol * scale:
            return _verify(x, m, alpha, "numeric")
        u = nbody.potential(x, m, alpha)
        g = nbody.gradient(x, m, alpha).ravel()
        jac = nbody.hessian_full(x, m, alpha)
        jac += alpha * np.outer(mdiag * x.ravel(), g)
        jac += alpha * u * np.diag(mdiag)
        rot = rotation_rows(x)
        weight = max(1.0, np.linalg.norm(jac))
        aug = np.vstack([jac] + [weight * r[None, :] for r in rot])
        rhs = np.concatenate([-f, np.zeros(len(rot))])
        step, *_ = np.linalg.lstsq(aug, rhs, rcond=None)
        # backtracking on the residual norm
        t = 1.0
        for _ in range(40):
            trial = project(x + t * step.reshape(n, d))
            if nbody.min_distance(trial) > collision_floor and \
                    nbody.central_residual(trial, m, alpha) < res:
                x = trial
                break
            t *= 0.5
        else:
            raise NoConvergence(f"line search stalled at residual {res:.3e}")
    raise NoConvergence(f"no convergence after {max_iter} iterations")
