"""Regularized system solves inside the barrier trap and continuation in eps."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .barriers import BarrierPair
from .errors import NonConvergenceError
from .mesh import Mesh
from .plaplace import solve_scalar, weak_residual
from .problem import ProblemParams

log = logging.getLogger(__name__)

TRAP_TOL = 1e-10
BLOWUP = 1e12


@dataclass(frozen=True)
class SolveConfig:
    tol_fixedpoint: float = 1e-9
    tol_newton: float = 1e-10
    max_sweeps: int = 200
    eps_stages: int = 20  # schedule eps0 * 2^-j, j = 0..eps_stages
    eps_schedule: tuple[float, ...] | None = None  # explicit override
    clamp: bool = True
    residual_tol: float = 1e-6

    def __post_init__(self):
        if not (self.tol_fixedpoint > 0 and self.tol_newton > 0 and self.residual_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")
        if self.eps_schedule is not None:
            s = np.asarray(self.eps_schedule, dtype=float)
            if s.size == 0 or np.any(s <= 0) or np.any(np.diff(s) >= 0):
                raise ValueError("eps_schedule must be positive and strictly decreasing")

    def schedule(self, eps0: float) -> np.ndarray:
        if self.eps_schedule is not None:
            s = np.asarray(self.eps_schedule, dtype=float)
            if s[0] > eps0:
                raise ValueError(f"eps_schedule starts at {s[0]} above eps0 = {eps0}")
            return s
        return eps0 * 2.0 ** -np.arange(self.eps_stages + 1)


@dataclass
class StageRecord:
    eps: float
    sweeps: int
    final_diff: float
    res_u: float
    res_v: float
    trapped: bool | None
    min_u: float
    min_v: float
    diff_history: list[float] = field(default_factory=list)


@dataclass
class SolveReport:
    stages: list[StageRecord] = field(default_factory=list)
    cauchy_diffs: list[float] = field(default_factory=list)
    final_res_u: float = np.nan
    final_res_v: float = np.nan
    passed: bool = False
    message: str = ""
    u: np.ndarray | None = None
    v: np.ndarray | None = None

    def report(self) -> str:
        lines = [
            f"passed: {self.passed}",
            f"message: {self.message}",
            f"stages: {len(self.stages)}",
            f"final_residual_u: {self.final_res_u!r}",
            f"final_residual_v: {self.final_res_v!r}",
            "schedule: geometric, eps0 * 2^-j",
        ]
        for j, st in enumerate(self.stages):
            lines.append(
                f"stage.{j}: eps={st.eps!r} sweeps={st.sweeps} diff={st.final_diff!r} "
                f"res_u={st.res_u!r} res_v={st.res_v!r} trapped={st.trapped} "
                f"min_u={st.min_u!r} min_v={st.min_v!r}"
            )
        for j, c in enumerate(self.cauchy_diffs):
            lines.append(f"cauchy.{j}: {c!r}")
        return "\n".join(lines) + "\n"


def rhs_u(params: ProblemParams, lam: float, eps: float, vq: np.ndarray):
    a, b = params.alpha1, params.beta1
    vb = vq**b

    def f(x, t):
        return lam * (t + eps) ** a * vb

    def df(x, t):
        return lam * a * (t + eps) ** (a - 1) * vb

    return f, df


def rhs_v(params: ProblemParams, lam: float, eps: float, uq: np.ndarray):
    a, b = params.alpha2, params.beta2
    ua = uq**a

    def f(x, t):
        return lam * ua * (t + eps) ** b

    def df(x, t):
        return lam * ua * b * (t + eps) ** (b - 1)

    return f, df


def _interior_min(mesh: Mesh, w: np.ndarray) -> float:
    return float(w[mesh.interior].min())


def weak_residual_system(params: ProblemParams, lam: float, u: np.ndarray, v: np.ndarray, mesh: Mesh, eps: float = 0.0):
    """Weak residuals of both equations; ``eps = 0`` is the unregularized system."""
    if eps == 0 and (np.any(u[mesh.interior] <= 0) or np.any(v[mesh.interior] <= 0)):
        raise ValueError("fields must be positive at interior nodes; the singular powers are undefined")
    uq, vq = mesh.at_quadrature(u), mesh.at_quadrature(v)
    P = params
    with np.errstate(divide="ignore", invalid="ignore"):
        fu = lam * (uq + eps) ** P.alpha1 * vq**P.beta1
        fv = lam * uq**P.alpha2 * (vq + eps) ** P.beta2
    return weak_residual(P.p, u, fu, mesh), weak_residual(P.q, v, fv, mesh)


def _sup(res: np.ndarray) -> float:
    return float(np.max(np.abs(res)))


def solve_regularized(
    params: ProblemParams,
    lam: float,
    eps: float,
    mesh: Mesh,
    barriers: BarrierPair | None,
    init: tuple[np.ndarray, np.ndarray] | None = None,
    config: SolveConfig = SolveConfig(),
    iterates: list | None = None,
):
    """Alternating (u then v) sweeps for the eps-regularized system.

    With ``config.clamp`` each scalar solve is projected onto the barrier
    interval; otherwise the fields are only kept nonnegative and the trap is
    asserted after every sweep (when barriers are given).  ``iterates``, if
    a list, receives a copy of ``(u, v)`` after each sweep.

    Returns ``(u, v, StageRecord)``; raises NonConvergenceError.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if init is None:
        if barriers is None:
            raise ValueError("need either barriers or an initial pair")
        init = (barriers.lower_u, barriers.lower_v)
    u, v = (np.array(w, dtype=float) for w in init)
    if barriers is not None and config.clamp:
        bu, bv = (barriers.lower_u, barriers.upper_u), (barriers.lower_v, barriers.upper_v)
    else:
        bu = bv = (0.0, np.inf)
    P = params
    history = []
    for sweep in range(1, config.max_sweeps + 1):
        f, df = rhs_u(P, lam, eps, mesh.at_quadrature(v))
        u_new = solve_scalar(P.p, f, mesh, bu, u, drhs=df, tol=config.tol_newton)
        f, df = rhs_v(P, lam, eps, mesh.at_quadrature(u_new))
        v_new = solve_scalar(P.q, f, mesh, bv, v, drhs=df, tol=config.tol_newton)
        diff = max(np.max(np.abs(u_new - u)), np.max(np.abs(v_new - v)))
        u, v = u_new, v_new
        history.append(float(diff))
        if iterates is not None:
            iterates.append((u.copy(), v.copy()))
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))) or max(u.max(), v.max()) > BLOWUP:
            raise NonConvergenceError(f"fields blew up at eps={eps:g}, sweep {sweep}", history)
        if barriers is not None and not config.clamp and not _trapped(u, v, barriers):
            raise NonConvergenceError(f"iterate left the barrier trap at eps={eps:g}, sweep {sweep}", history)
        if diff <= config.tol_fixedpoint:
            break
    else:
        raise NonConvergenceError(
            f"no fixed point after {config.max_sweeps} sweeps at eps={eps:g}; last diff {history[-1]:.3e}",
            history,
        )
    ru, rv = weak_residual_system(P, lam, u, v, mesh, eps)
    record = StageRecord(
        eps=float(eps),
        sweeps=sweep,
        final_diff=history[-1],
        res_u=_sup(ru),
        res_v=_sup(rv),
        trapped=None if barriers is None else _trapped(u, v, barriers),
        min_u=_interior_min(mesh, u),
        min_v=_interior_min(mesh, v),
        diff_history=history,
    )
    return u, v, record


def _trapped(u, v, b: BarrierPair) -> bool:
    return bool(
        np.all(u >= b.lower_u - TRAP_TOL) and np.all(u <= b.upper_u + TRAP_TOL)
        and np.all(v >= b.lower_v - TRAP_TOL) and np.all(v <= b.upper_v + TRAP_TOL)
    )


def continuation_solve(
    params: ProblemParams,
    lam: float,
    mesh: Mesh,
    barriers: BarrierPair | None,
    eps0: float,
    config: SolveConfig = SolveConfig(),
    init: tuple[np.ndarray, np.ndarray] | None = None,
):
    """Run :func:`solve_regularized` down the eps schedule, warm-starting each stage.

    Returns ``(u, v, SolveReport)``.  A stage failure raises
    NonConvergenceError whose ``report`` is the partial SolveReport.  The
    final residual of the unregularized system is recomputed from the last
    fields; failing it leaves ``report.passed`` False.
    """
    report = SolveReport()
    state = init
    prev = None
    for eps in config.schedule(eps0):
        try:
            u, v, rec = solve_regularized(params, lam, eps, mesh, barriers, state, config)
        except NonConvergenceError as exc:
            report.message = str(exc)
            if prev is not None:
                report.u, report.v = prev
            raise NonConvergenceError(str(exc), report) from exc
        report.stages.append(rec)
        if prev is not None:
            report.cauchy_diffs.append(float(max(np.max(np.abs(u - prev[0])), np.max(np.abs(v - prev[1])))))
        prev = state = (u, v)
        log.debug("eps=%g sweeps=%d res=(%.2e, %.2e)", eps, rec.sweeps, rec.res_u, rec.res_v)
    report.u, report.v = u, v
    try:
        ru, rv = weak_residual_system(params, lam, u, v, mesh)
        report.final_res_u, report.final_res_v = _sup(ru), _sup(rv)
        report.passed = max(report.final_res_u, report.final_res_v) <= config.residual_tol
        report.message = "converged" if report.passed else "difference test passed but final residual too large"
    except ValueError as exc:
        report.message = str(exc)
    return u, v, report
