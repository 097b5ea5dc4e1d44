"""Command-line front end: family construction, sweeps, simulation, probes.

Exit codes: 0 success, 1 usage or I/O error, 2 numeric invariant failure, so
CI can gate on mathematical regressions.  NCOL_THREADS caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import central, mcgehee, morse, nbody, spectral, weakforce
from .errors import NcolError

SWEEP_HEADER = "alpha,family,N,lhs,rhs,holds,mu1,margin"
WEAKFORCE_HEADER = "alpha,tau_eps,inf_disotto,tail_integral,phi_min"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def max_workers() -> int:
    cap = os.environ.get("NCOL_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def _build_family(args) -> central.CentralConfiguration:
    alpha = args.alpha if args.alpha is not None else 1.0
    if args.family == "collinear3":
        return central.collinear3(args.m1, args.m1, alpha)
    if args.family == "collinear3-m2":
        return central.collinear3(args.m1, args.m2, alpha)
    if args.family == "ngon":
        return central.ngon(args.n, alpha)
    if args.family == "file":
        if not args.file:
            raise UsageError("--family file requires --file")
        with open(args.file) as fh:
            x, m, file_alpha, payload = nbody.config_from_json(fh.read())
        # the file's own alpha wins unless one was passed explicitly
        return central.solve_central(x, m, args.alpha if args.alpha is not None
                                     else file_alpha)
    raise UsageError(f"unknown family {args.family}")


def _family_args(sub):
    sub.add_argument("--family", required=True,
                     choices=["collinear3", "collinear3-m2", "ngon", "file"])
    sub.add_argument("--alpha", type=float, default=None)
    sub.add_argument("--m1", type=float, default=1.0)
    sub.add_argument("--m2", type=float, default=1.0)
    sub.add_argument("--n", type=int, default=4)
    sub.add_argument("--file", type=str, default=None)
    sub.add_argument("--out", type=str, default=None)


def cmd_central(args) -> int:
    cc = _build_family(args)
    _emit(cc.to_json(), args.out)
    return 0 if cc.residual < 1e-9 else 2


def cmd_spectral(args) -> int:
    cc = _build_family(args)
    dim = args.dim if args.dim else (3 if cc.family == "ngon" else cc.dim)
    rep = spectral.smallest_eigenvalue(cc, dim=dim)
    _emit(json.dumps(rep.to_dict(), indent=2), args.out)
    return 0


def cmd_threshold(args) -> int:
    if args.family == "collinear3":
        res = spectral.collinear_threshold()
    elif args.family == "ngon":
        res = spectral.ngon_threshold(args.n)
    else:
        raise UsageError("threshold supports families collinear3 and ngon")
    payload = {"family": res.family, "alpha_star": res.alpha_star,
               "bracket": list(res.bracket), "residual": res.residual}
    _emit(json.dumps(payload, indent=2), args.out)
    return 0


def _sweep_row(alpha: float) -> list[str]:
    lhs_eq, rhs, holds_eq = spectral.collinear_equal_condition(alpha)
    lhs_b = spectral.collinear_B_eigenvalues(alpha)[0]
    g = 2.0 ** ((alpha + 2.0) / 2.0)
    lhs_b_norm = lhs_b / (g + 2.0 / g)
    cc = central.collinear3(1.0, 1.0, alpha)
    rep = spectral.smallest_eigenvalue(cc)
    rows = [
        f"{alpha:.12g},collinear3-equal,3,{lhs_eq:.12g},{rhs:.12g},{int(holds_eq)},"
        f"{rep.mu1:.12g},{rep.margin:.12g}",
        f"{alpha:.12g},collinear3-B,3,{lhs_b_norm:.12g},{rhs:.12g},{int(lhs_b_norm > rhs)},"
        f"{rep.mu1:.12g},{rep.margin:.12g}",
    ]
    return rows


def _run_sweep(alphas) -> str:
    workers = max_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_sweep_row, alphas))
    else:
        chunks = [_sweep_row(a) for a in alphas]
    lines = [SWEEP_HEADER]
    for chunk in chunks:
        lines.extend(chunk)
    return "\n".join(lines)


def cmd_sweep(args) -> int:
    if args.steps < 1 or not (0.0 < args.alpha_min < args.alpha_max < 2.0):
        raise UsageError("empty or invalid alpha range")
    alphas = np.linspace(args.alpha_min, args.alpha_max, args.steps)
    _emit(_run_sweep(alphas), args.out)
    return 0


def cmd_figure1(args) -> int:
    alphas = np.linspace(0.05, 2.0 - 1e-9, args.steps)
    _emit(_run_sweep(alphas), args.out)
    return 0


def cmd_simulate(args) -> int:
    cc = _build_family(args)
    state = mcgehee.homothetic_initial_state(cc, h=args.energy)
    if args.perturb:
        rng = np.random.default_rng(args.seed)
        kick = rng.standard_normal(cc.s0.shape)
        m = cc.masses
        kick -= (m @ kick)[None, :] / m.sum()
        kick -= float(np.sum(m[:, None] * cc.s0 * kick)) * cc.s0
        kick *= args.perturb / max(np.linalg.norm(kick), 1e-300)
        sp2 = float(np.sum(m * np.sum(kick * kick, axis=1)))
        rhs = args.energy + cc.b - 0.5 * sp2
        if rhs <= 0.0:
            raise UsageError("perturbation too large for the requested energy")
        state = mcgehee.McGeheeState(
            rho=1.0, rho_prime=-(2.0 - cc.alpha) / 4.0 * np.sqrt(2.0 * rhs),
            s=cc.s0.copy(), s_prime=kick)
    opts = mcgehee.IntegratorOptions(rtol=args.rtol, max_step=args.max_step,
                                     rho_min=args.rho_min)
    traj = mcgehee.integrate_el(state, cc.masses, cc.alpha, tau_max=args.tau_max, opts=opts)
    traj.to_csv(args.out or "trajectory.csv")
    tol = 1e-8 * (1.0 + abs(traj.h))
    trusted = traj.trusted_prefix(tol)
    h_tr = traj.energy_trace()
    drift = float(np.max(np.abs(h_tr[trusted] - traj.h))) if trusted.any() else float("nan")
    lam2_ok = bool(np.all(traj.lambda2_trace() >= -1e-12))
    print(f"samples={traj.n_samples} tau_end={traj.tau_end:.4g} "
          f"energy_drift={drift:.3e} (over {int(trusted.sum())} trusted samples)",
          file=sys.stderr)
    if not trusted.any() or drift > tol or not lam2_ok:
        return 2
    return 0


def cmd_morse(args) -> int:
    cc = _build_family(args)
    if cc.family == "ngon":
        # polygon probes live out of plane
        cc = central.embed_in_3d(cc)
    rep = spectral.smallest_eigenvalue(cc)
    width = args.width
    tau_need = args.bumps * 2.0 * width + 2.0 * width
    traj = mcgehee.homothetic_oracle(cc, h=0.0, tau_max=tau_need)
    shifts = morse.default_shifts(args.bumps, 0.0, width)
    wrep = morse.morse_witnesses(traj, rep.eigvec, shifts, l1=1e-9, l2=width,
                                 flat_fraction=args.flat_fraction)
    _emit(json.dumps(wrep.to_dict(), indent=2), args.out)
    print(f"witnesses={wrep.witnesses} of {args.bumps}; criterion margin={rep.margin:.6g}",
          file=sys.stderr)
    return 0


def cmd_weakforce(args) -> int:
    alphas = tuple(float(a) for a in args.grid.split(","))
    cc = central.collinear3(args.m1, args.m2, alphas[0])
    fam = weakforce.build_H_family(cc, alphas=alphas, tau_max=args.tau_max)
    rows = weakforce.family_report_rows(fam, args.eps)
    lines = [WEAKFORCE_HEADER]
    for row in rows:
        lines.append(",".join(f"{v:.10g}" for v in row))
    _emit("\n".join(lines), args.out)
    e1 = weakforce.check_esplode1(fam, args.eps)
    e2 = weakforce.check_esplode2(fam, args.eps)
    ok = e1.satisfied and e2.satisfied
    if e1.satisfied:
        d = weakforce.check_disotto(fam, args.eps, e1.tau_eps, e1.alpha_eps)
        ok = ok and d.satisfied
    print(f"esplode1={e1.satisfied} esplode2={e2.satisfied} eps={args.eps}", file=sys.stderr)
    return 0 if ok else 2


def build_parser() -> _Parser:
    p = _Parser(prog="ncol", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("central", help="construct or solve a central configuration")
    _family_args(s)
    s.set_defaults(fn=cmd_central)

    s = sub.add_parser("spectral", help="smallest constrained eigenvalue and criterion margin")
    _family_args(s)
    s.add_argument("--dim", type=int, default=None)
    s.set_defaults(fn=cmd_spectral)

    s = sub.add_parser("threshold", help="criterion crossing in alpha for a family")
    s.add_argument("--family", required=True, choices=["collinear3", "ngon"])
    s.add_argument("--n", type=int, default=4)
    s.add_argument("--out", type=str, default=None)
    s.set_defaults(fn=cmd_threshold)

    s = sub.add_parser("sweep", help="criterion sweep over an alpha range (CSV)")
    s.add_argument("--alpha-min", type=float, required=True)
    s.add_argument("--alpha-max", type=float, required=True)
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--out", type=str, default=None)
    s.set_defaults(fn=cmd_sweep)

    s = sub.add_parser("figure1", help="preset sweep on [0.05, 2] comparing both criteria")
    s.add_argument("--steps", type=int, default=400)
    s.add_argument("--out", type=str, default=None)
    s.set_defaults(fn=cmd_figure1)

    s = sub.add_parser("simulate", help="integrate the collision flow and dump a CSV")
    _family_args(s)
    s.add_argument("--energy", type=float, default=0.0)
    s.add_argument("--tau-max", type=float, default=5.0)
    s.add_argument("--perturb", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--rtol", type=float, default=1e-10)
    s.add_argument("--max-step", type=float, default=0.1)
    s.add_argument("--rho-min", type=float, default=1e-8)
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("morse", help="bump-probe witness counts along the collapse")
    _family_args(s)
    s.add_argument("--bumps", type=int, default=10)
    s.add_argument("--width", type=float, default=20.0)
    s.add_argument("--flat-fraction", type=float, default=0.8)
    s.set_defaults(fn=cmd_morse)

    s = sub.add_parser("weakforce", help="small-alpha family diagnostics (CSV)")
    s.add_argument("--grid", type=str, default="0.5,0.3,0.2,0.1,0.05,0.02")
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--tau-max", type=float, default=12.0)
    s.add_argument("--m1", type=float, default=1.0)
    s.add_argument("--m2", type=float, default=1.0)
    s.add_argument("--out", type=str, default=None)
    s.set_defaults(fn=cmd_weakforce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1
    except (NcolError, AssertionError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
