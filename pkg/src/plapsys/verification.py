"""Energy-based nonexistence checks, threshold probing and discretization tests.

"No solution" cannot be decided numerically.  A COLLAPSE or NONCONVERGENCE
outcome of :func:`nonexistence_probe` is evidence consistent with
nonexistence, never a proof.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .barriers import BarrierSetup
from .errors import HypothesisError, NonConvergenceError
from .mesh import DomainSpec, Mesh, build_mesh
from .plaplace import gradient_norm_power, lp_norm_power, solve_scalar
from .problem import ProblemParams, eigen_gaps, lambda_star, validate
from .solver import SolveConfig, SolveReport, continuation_solve

log = logging.getLogger(__name__)

ENERGY_RTOL = 1e-6


@dataclass(frozen=True)
class EnergyCertificate:
    lhs: float
    rhs: float
    rayleigh_u: float
    rayleigh_v: float
    gap_p: float
    gap_q: float
    energy_bound_holds: bool
    verdict: str

    def report(self) -> str:
        return "".join(f"{k}: {v!r}\n" for k, v in self.__dict__.items())


def _require_homogeneous(params: ProblemParams):
    cls = validate(params)
    if cls.sigma != 0:
        raise HypothesisError(f"needs theta = 0, got {cls.theta}")
    if not cls.c:
        raise HypothesisError("needs (c): alpha1, beta2 in (-1, 0)")
    if not cls.c2:
        raise HypothesisError("needs (c2): beta1 = q(p-1-alpha1)/p or alpha2 = p(q-1-beta2)/q")
    return cls


def energy_certificate(
    params: ProblemParams,
    lam: float,
    u: np.ndarray,
    v: np.ndarray,
    lam1p: float,
    lam1q: float,
    mesh: Mesh,
) -> EnergyCertificate:
    """Compare ``|grad u|_p^p + |grad v|_q^q`` with the energy bound any solution obeys.

    The bound is ``lam ((a1+a2+1)/p |u|_p^p + (b1+b2+1)/q |v|_q^q)``.  When
    both eigenvalue gaps are positive the bound is incompatible with the
    Rayleigh characterization, so a candidate violating it is consistent
    with nonexistence.
    """
    _require_homogeneous(params)
    if np.any(u[mesh.interior] <= 0) or np.any(v[mesh.interior] <= 0):
        raise ValueError("candidate fields must be positive at interior nodes")
    P = params
    gu, gv = gradient_norm_power(mesh, u, P.p), gradient_norm_power(mesh, v, P.q)
    nu, nv = lp_norm_power(mesh, u, P.p), lp_norm_power(mesh, v, P.q)
    lhs = gu + gv
    rhs = lam * ((P.alpha1 + P.alpha2 + 1) / P.p * nu + (P.beta1 + P.beta2 + 1) / P.q * nv)
    gap_p, gap_q = eigen_gaps(P, lam, lam1p, lam1q)
    holds = lhs <= rhs * (1 + ENERGY_RTOL)
    if gap_p > 0 and gap_q > 0:
        verdict = "nonexistence evidence" if not holds else "energy bound met below threshold"
    else:
        verdict = "no nonexistence conclusion"
    return EnergyCertificate(lhs, rhs, gu / nu, gv / nv, gap_p, gap_q, bool(holds), verdict)


class Outcome(enum.Enum):
    COLLAPSE = "COLLAPSE"
    NONCONVERGENCE = "NONCONVERGENCE"
    CONVERGED_POSITIVE = "CONVERGED_POSITIVE"


@dataclass
class ProbeResult:
    lam: float
    outcome: Outcome
    report: SolveReport | None
    max_u: float = np.nan
    max_v: float = np.nan
    energy: EnergyCertificate | None = None
    note: str = "outcomes are numerical evidence, not proof"


def nonexistence_probe(setup: BarrierSetup, lam: float, config: SolveConfig = SolveConfig(clamp=False)) -> ProbeResult:
    """Continuation without barriers, started from ``(phi_p^gamma, phi_q^gamma)``."""
    P = setup.params.with_lambda(lam)  # rejects lam <= 0
    _require_homogeneous(P)
    init = (setup.eigp.phi**P.gamma, setup.eigq.phi**P.gamma)
    eps0 = 1.0  # min(C^0, C^0)
    try:
        u, v, rep = continuation_solve(P, lam, setup.mesh, None, eps0, config, init=init)
    except NonConvergenceError as exc:
        rep = exc.report if isinstance(exc.report, SolveReport) else None
        return ProbeResult(lam, Outcome.NONCONVERGENCE, rep)
    mu, mv = float(u.max()), float(v.max())
    if max(mu, mv) < 10 * config.tol_fixedpoint:
        return ProbeResult(lam, Outcome.COLLAPSE, rep, mu, mv)
    inner = setup.mesh.interior
    if rep.passed and np.all(u[inner] > 0) and np.all(v[inner] > 0):
        cert = energy_certificate(P, lam, u, v, setup.eigp.value, setup.eigq.value, setup.mesh)
        return ProbeResult(lam, Outcome.CONVERGED_POSITIVE, rep, mu, mv, cert)
    return ProbeResult(lam, Outcome.NONCONVERGENCE, rep, mu, mv)


@dataclass
class ThresholdResult:
    lam_emp: float
    bracket: tuple[float, float]
    lambda_star: float | None
    probes: list[ProbeResult] = field(default_factory=list)
    non_monotone: bool = False

    def report(self) -> str:
        lines = [
            f"lambda_emp: {self.lam_emp!r}",
            f"bracket: [{self.bracket[0]!r}, {self.bracket[1]!r}]",
            f"lambda_star: {self.lambda_star!r}",
            f"non_monotone: {self.non_monotone}",
            "note: existence above the threshold is assumed by the bisection, not proven",
        ]
        lines += [f"probe: {p.lam!r} {p.outcome.value}" for p in self.probes]
        return "\n".join(lines) + "\n"


def empirical_threshold(
    setup: BarrierSetup,
    lam_lo: float,
    lam_hi: float,
    steps: int,
    config: SolveConfig = SolveConfig(clamp=False),
    probe: Callable[[float], ProbeResult] | None = None,
) -> ThresholdResult:
    """Bisect between a non-solution outcome at ``lam_lo`` and a positive solution at ``lam_hi``."""
    if not lam_lo < lam_hi:
        raise ValueError(f"bracket reversed or empty: [{lam_lo}, {lam_hi}]")
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    probe = probe or (lambda lam: nonexistence_probe(setup, lam, config))
    try:
        lstar = lambda_star(setup.params, setup.eigp.value, setup.eigq.value)
    except HypothesisError:
        lstar = None
    lo_res, hi_res = probe(lam_lo), probe(lam_hi)
    if lo_res.outcome is Outcome.CONVERGED_POSITIVE:
        raise ValueError(f"probe at lam_lo = {lam_lo} converged to a positive solution")
    if hi_res.outcome is not Outcome.CONVERGED_POSITIVE:
        raise ValueError(f"probe at lam_hi = {lam_hi} gave {hi_res.outcome.value}, not CONVERGED_POSITIVE")
    result = ThresholdResult(0.0, (lam_lo, lam_hi), lstar, [lo_res, hi_res])
    lo, hi = lam_lo, lam_hi
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        res = probe(mid)
        result.probes.append(res)
        if res.outcome is Outcome.CONVERGED_POSITIVE:
            hi = mid
        else:
            lo = mid
    ordered = sorted(result.probes, key=lambda r: r.lam)
    seen_positive = False
    for r in ordered:
        if r.outcome is Outcome.CONVERGED_POSITIVE:
            seen_positive = True
        elif seen_positive:
            result.non_monotone = True
    result.bracket = (lo, hi)
    result.lam_emp = 0.5 * (lo + hi)
    return result


@dataclass
class ConvergenceTable:
    r: float
    levels: list[int]
    errors: list[float]
    orders: list[float]

    def rows(self):
        yield from zip(self.levels, self.errors, [np.nan] + self.orders)


def manufactured_functional(r: float, mesh: Mesh, gauss_points: int = 20) -> np.ndarray:
    """Weak-form load ``int |u*'|^{r-2} u*' phi_i'`` for ``u* = sin(pi x)`` on a 1D mesh.

    Integrating the flux against the hat-function slopes avoids sampling the
    source, which is singular where ``u*' = 0`` when ``r < 2``.
    """
    gl, gw = np.polynomial.legendre.leggauss(gauss_points)
    a, b = mesh.points[mesh.cells[:, 0], 0], mesh.points[mesh.cells[:, 1], 0]
    s = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * gl[None, :]
    du = np.pi * np.cos(np.pi * s)
    flux_int = 0.5 * (b - a) * np.sum(np.abs(du) ** (r - 1) * np.sign(du) * gw[None, :], axis=1)
    local = mesh.basis_gradients[:, :, 0] * flux_int[:, None]
    return np.bincount(mesh.cells.ravel(), local.ravel(), minlength=mesh.n_nodes)


def _sup_error(mesh: Mesh, u: np.ndarray, exact: Callable[[np.ndarray], np.ndarray], per_cell: int = 8) -> float:
    """Sup norm of ``u_h - u*`` sampled at nodes and ``per_cell`` points inside each element."""
    t = np.arange(per_cell + 1) / per_cell
    a, b = mesh.cells[:, 0], mesh.cells[:, 1]
    xs = mesh.x[a][:, None] * (1 - t) + mesh.x[b][:, None] * t
    uh = u[a][:, None] * (1 - t) + u[b][:, None] * t
    return float(np.max(np.abs(uh - exact(xs))))


def manufactured_convergence(r: float, levels: Sequence[int]) -> ConvergenceTable:
    """Sup-norm errors of ``sin(pi x)`` recovered from its own weak-form load.

    The error is measured between nodes as well: for ``r = 2`` the nodal
    values are exact in 1D and only the interpolation error remains.
    """
    levels = list(levels)
    if len(levels) < 3:
        raise ValueError("need at least three mesh levels")
    spec = DomainSpec.interval(0.0, 1.0)
    errors = []
    for n in levels:
        mesh = build_mesh(spec, n)
        exact = np.sin(np.pi * mesh.x)
        ell = manufactured_functional(r, mesh)
        u = solve_scalar(r, np.zeros(mesh.n_nodes), mesh, init=0.9 * exact, functional=ell)
        errors.append(_sup_error(mesh, u, lambda x: np.sin(np.pi * x)))
    orders = [float(np.log(errors[i] / errors[i + 1]) / np.log(levels[i + 1] / levels[i])) for i in range(len(levels) - 1)]
    return ConvergenceTable(r, levels, errors, orders)
