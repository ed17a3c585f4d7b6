"""Piecewise-linear discretization of the Dirichlet r-Laplacian.

The weak residual of ``-div(|grad u|^{r-2} grad u) = f(x, u)`` against the
interior hat functions is assembled element by element.  The nonlinear
right-hand side is sampled at the element quadrature points of
:class:`~plapsys.mesh.Mesh` using the interpolated value of ``u``.

A *source* may be given as

* a nodal array (interpolated to the quadrature points, independent of u),
* an array of shape ``(n_cells, n_q)`` of quadrature values, or
* a callable ``f(x, t)`` receiving the quadrature coordinates
  ``(n_cells, n_q, dim)`` and the interpolated field ``(n_cells, n_q)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import NonConvergenceError
from .mesh import Mesh

log = logging.getLogger(__name__)

Source = "np.ndarray | Callable[[np.ndarray, np.ndarray], np.ndarray]"

DEFAULT_SMOOTHING = (1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 0.0)
JACOBIAN_SMOOTHING_FLOOR = 1e-12


def _check_exponent(r: float) -> None:
    if not r > 1:
        raise ValueError(f"operator exponent must exceed 1, got {r}")


def flux(g: np.ndarray, r: float, s: float = 0.0) -> np.ndarray:
    """``(|g|^2 + s^2)^{(r-2)/2} g`` per element; zero where ``g = 0`` and ``s = 0``."""
    n2 = np.sum(g * g, axis=1) + s * s
    if r == 2:
        coef = np.ones_like(n2)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(n2 > 0, n2 ** ((r - 2) / 2), 0.0)
    return coef[:, None] * g


def stiffness_action(mesh: Mesh, u: np.ndarray, r: float, s: float = 0.0) -> np.ndarray:
    """Nodal vector of ``int |grad u|^{r-2} grad u . grad phi_i``."""
    q = flux(mesh.gradient(u), r, s)
    local = np.einsum("ekd,ed->ek", mesh.basis_gradients, q) * mesh.measures[:, None]
    return np.bincount(mesh.cells.ravel(), local.ravel(), minlength=mesh.n_nodes)


def load_vector(mesh: Mesh, fq: np.ndarray) -> np.ndarray:
    """Nodal vector of ``int f phi_i`` from quadrature values ``fq``."""
    bary, w = mesh.quadrature
    local = (fq * w[None, :] * mesh.measures[:, None]) @ bary
    return np.bincount(mesh.cells.ravel(), local.ravel(), minlength=mesh.n_nodes)


def source_at_quadrature(mesh: Mesh, source, u: np.ndarray) -> np.ndarray:
    """Source values at quadrature points, zero on cells without an interior vertex."""
    if callable(source):
        fq = source(mesh.quad_points, mesh.at_quadrature(u))
        fq = np.broadcast_to(np.asarray(fq, dtype=float), (len(mesh.cells), mesh.quadrature[1].size))
    else:
        source = np.asarray(source, dtype=float)
        if source.shape == (mesh.n_nodes,):
            fq = mesh.at_quadrature(source)
        elif source.shape == (len(mesh.cells), mesh.quadrature[1].size):
            fq = source
        else:
            raise ValueError(f"source of shape {source.shape} does not fit the mesh")
    # cells lying entirely on the boundary never meet an interior test
    # function; a singular source may be infinite there
    return np.where(mesh.active_cells[:, None], fq, 0.0)


def weak_residual(r: float, u: np.ndarray, source, mesh: Mesh, s: float = 0.0) -> np.ndarray:
    """Weak residual at every node; boundary entries are zero.

    ``u`` supplies all nodal values, boundary ones included, so fields with
    nonzero boundary data (such as restricted supersolutions) are accepted.
    """
    _check_exponent(r)
    fq = source_at_quadrature(mesh, source, u)
    if not np.all(np.isfinite(fq)):
        raise ValueError("source is not finite at some quadrature point")
    res = stiffness_action(mesh, u, r, s) - load_vector(mesh, fq)
    res[mesh.boundary] = 0.0
    return res


def _stiffness_jacobian(mesh: Mesh, u: np.ndarray, r: float, s: float):
    g = mesh.gradient(u)
    B = mesh.basis_gradients
    n2 = np.sum(g * g, axis=1) + s * s
    if r == 2:
        D = np.broadcast_to(np.eye(mesh.dim), (len(g), mesh.dim, mesh.dim))
    else:
        a = n2 ** ((r - 2) / 2)
        b = (r - 2) * n2 ** ((r - 4) / 2)
        D = a[:, None, None] * np.eye(mesh.dim)[None] + b[:, None, None] * np.einsum("ei,ej->eij", g, g)
    return np.einsum("eki,eij,elj->ekl", B, D, B) * mesh.measures[:, None, None]


def _load_jacobian(mesh: Mesh, dfq: np.ndarray):
    bary, w = mesh.quadrature
    wq = dfq * w[None, :] * mesh.measures[:, None]
    return np.einsum("eq,qk,ql->ekl", wq, bary, bary)


def jacobian(mesh: Mesh, u: np.ndarray, r: float, s: float, dfq: np.ndarray | None) -> sp.csr_matrix:
    """Derivative of :func:`weak_residual` with respect to nodal values."""
    local = _stiffness_jacobian(mesh, u, r, max(s, JACOBIAN_SMOOTHING_FLOOR) if r != 2 else 0.0)
    if dfq is not None:
        local = local - _load_jacobian(mesh, dfq)
    k = mesh.cells.shape[1]
    rows = np.repeat(mesh.cells, k, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, k)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_nodes,) * 2).tocsr()


def _numeric_derivative(f, x, t):
    step = 1e-7 * np.maximum(np.abs(t), 1e-8)
    return (f(x, t + step) - f(x, t - step)) / (2 * step)


@dataclass
class NewtonStats:
    iterations: int = 0
    residual: float = np.inf
    history: list | None = None


def solve_scalar(
    r: float,
    rhs,
    mesh: Mesh,
    bounds: tuple[np.ndarray | float, np.ndarray | float] | None = None,
    init: np.ndarray | None = None,
    *,
    drhs=None,
    tol: float = 1e-10,
    smoothing: Sequence[float] | None = None,
    max_iter: int = 200,
    functional: np.ndarray | None = None,
    stats: NewtonStats | None = None,
) -> np.ndarray:
    """Solve ``-Delta_r u = f(x, u)`` with zero Dirichlet data by damped Newton.

    ``rhs`` must be nonincreasing in ``u`` on the bounds for the Jacobian to
    stay positive definite.  ``functional``, a nodal vector, is added to the
    load (a right-hand side given directly in weak form).  With ``bounds``
    the iterate is projected onto
    ``[lo, hi]`` after every step.  For ``r != 2`` the degenerate coefficient
    is smoothed and the smoothing driven to zero along ``smoothing``; the
    returned field meets ``tol`` for the unsmoothed residual.

    Raises NonConvergenceError when Newton stagnates.
    """
    _check_exponent(r)
    if smoothing is None:
        smoothing = (0.0,) if r == 2 else DEFAULT_SMOOTHING
    free = mesh.interior
    u = np.zeros(mesh.n_nodes) if init is None else np.array(init, dtype=float)
    lo = hi = None
    if bounds is not None:
        lo = np.broadcast_to(np.asarray(bounds[0], dtype=float), u.shape)
        hi = np.broadcast_to(np.asarray(bounds[1], dtype=float), u.shape)
        u = np.clip(u, lo, hi)
    u[mesh.boundary] = 0.0

    if callable(rhs):
        dfun = drhs if drhs is not None else (lambda x, t: _numeric_derivative(rhs, x, t))
    else:
        dfun = None

    def residual(v, s):
        with np.errstate(all="ignore"):
            fq = source_at_quadrature(mesh, rhs, v)
        if not np.all(np.isfinite(fq)):
            return None
        res = stiffness_action(mesh, v, r, s) - load_vector(mesh, fq)
        if functional is not None:
            res = res - functional
        return res[free]

    history = []
    total = 0
    for stage, s in enumerate(smoothing):
        last = stage == len(smoothing) - 1
        stage_tol = tol if last else max(tol, 1e-8)
        res = residual(u, s)
        if res is None:
            raise NonConvergenceError("right-hand side not finite at the initial field")
        norms = [np.max(np.abs(res), initial=0.0)]
        for it in range(max_iter):
            if norms[-1] <= stage_tol:
                break
            dfq = None
            if dfun is not None:
                with np.errstate(all="ignore"):
                    dfq = np.asarray(dfun(mesh.quad_points, mesh.at_quadrature(u)), dtype=float)
                dfq = np.where(np.isfinite(dfq), dfq, 0.0)
            J = jacobian(mesh, u, r, s, dfq)[free][:, free]
            du = spsolve(J.tocsc(), -res)
            if not np.all(np.isfinite(du)):
                raise NonConvergenceError("singular Newton system", NewtonStats(total, norms[-1], history))
            base = np.linalg.norm(res)
            step, accepted = 1.0, False
            for _ in range(31):
                trial = u.copy()
                trial[free] += step * du
                if lo is not None:
                    trial = np.clip(trial, lo, hi)
                rt = residual(trial, s)
                if rt is not None and np.linalg.norm(rt) < base:
                    u, res, accepted = trial, rt, True
                    break
                step *= 0.5
            total += 1
            norms.append(np.max(np.abs(res)))
            if not accepted or (len(norms) > 20 and norms[-1] > 1e-3 * norms[-21]):
                history.extend(norms)
                raise NonConvergenceError(
                    f"Newton stagnated at smoothing {s:g}: residual {norms[-1]:.3e}",
                    NewtonStats(total, norms[-1], history),
                )
        else:
            history.extend(norms)
            raise NonConvergenceError(
                f"Newton hit max_iter={max_iter} at smoothing {s:g}: residual {norms[-1]:.3e}",
                NewtonStats(total, norms[-1], history),
            )
        history.extend(norms)
    if stats is not None:
        stats.iterations, stats.residual, stats.history = total, history[-1], history
    return u


def lp_norm_power(mesh: Mesh, u: np.ndarray, r: float) -> float:
    """``int |u|^r`` by the element quadrature."""
    return mesh.integrate(np.abs(mesh.at_quadrature(u)) ** r)


def gradient_norm_power(mesh: Mesh, u: np.ndarray, r: float) -> float:
    """``int |grad u|^r`` (exact for piecewise-linear u)."""
    g = mesh.gradient(u)
    return float(np.sum(mesh.measures * np.sum(g * g, axis=1) ** (r / 2)))


def rayleigh_quotient(mesh: Mesh, u: np.ndarray, r: float) -> float:
    return gradient_norm_power(mesh, u, r) / lp_norm_power(mesh, u, r)


@dataclass(frozen=True, eq=False)
class EigenPair:
    r: float
    value: float
    phi: np.ndarray
    mesh: Mesh
    iterations: int = 0


def _initial_bump(mesh: Mesh) -> np.ndarray:
    u = np.ones(mesh.n_nodes)
    for k, (lo, hi) in enumerate(mesh.bounds):
        u *= np.sin(np.pi * (mesh.points[:, k] - lo) / (hi - lo))
    u = np.maximum(u, 0.0)
    u[mesh.boundary] = 0.0
    return u


def first_eigenpair(r: float, mesh: Mesh, max_iter: int = 500, tol: float = 1e-9) -> EigenPair:
    """First Dirichlet eigenpair of ``-Delta_r`` by inverse power iteration.

    The eigenfunction is positive and normalized so that ``int |phi|^r = 1``;
    the eigenvalue is its Rayleigh quotient.
    """
    _check_exponent(r)
    u = _initial_bump(mesh)
    u /= lp_norm_power(mesh, u, r) ** (1 / r)
    lam = rayleigh_quotient(mesh, u, r)
    smoothing = None
    for it in range(1, max_iter + 1):
        uq = mesh.at_quadrature(u)
        g = np.abs(uq) ** (r - 2) * uq
        guess = u * lam ** (-1 / (r - 1))
        w = solve_scalar(r, g, mesh, init=guess, smoothing=smoothing)
        # later iterations start close to the answer; skip the smoothing ramp
        if r != 2:
            smoothing = (1e-8, 0.0) if it >= 2 else None
        nw = lp_norm_power(mesh, w, r) ** (1 / r)
        lam = nw ** (1 - r)
        w = w / nw
        diff = np.max(np.abs(w - u))
        u = w
        if diff <= tol:
            break
    else:
        raise NonConvergenceError(f"inverse power iteration did not converge in {max_iter} steps")
    u = np.abs(u)
    u /= lp_norm_power(mesh, u, r) ** (1 / r)
    return EigenPair(r, rayleigh_quotient(mesh, u, r), u, mesh, it)


def geometric_etas(start: float = 1e-1, stop: float = 1e-8) -> np.ndarray:
    count = int(round(np.log10(start / stop))) + 1
    return np.geomspace(start, stop, count)


def singular_auxiliary_solve(
    r: float,
    amplitude: float,
    theta: float,
    mesh: Mesh,
    etas: Sequence[float] | None = None,
    tol: float = 1e-10,
) -> np.ndarray:
    """Solve ``-Delta_r xi = A xi^theta``, ``xi = 0`` on the boundary, for ``theta in (-1, 0)``.

    The singular power is shifted to ``(xi + eta)^theta`` and ``eta`` driven
    down a geometric ladder, warm-starting each stage.
    """
    _check_exponent(r)
    if not -1 < theta < 0:
        raise ValueError(f"theta must lie in (-1, 0), got {theta}")
    if not amplitude > 0:
        raise ValueError("amplitude must be positive")
    etas = geometric_etas() if etas is None else etas
    xi = np.zeros(mesh.n_nodes)
    bounds = (0.0, np.inf)
    for k, eta in enumerate(etas):

        def f(x, t, eta=eta):
            return amplitude * (t + eta) ** theta

        def df(x, t, eta=eta):
            return amplitude * theta * (t + eta) ** (theta - 1)

        xi = solve_scalar(
            r, f, mesh, bounds, xi, drhs=df, tol=tol,
            smoothing=None if k == 0 else ((1e-8, 0.0) if r != 2 else None),
        )
    if np.any(xi[mesh.interior] <= 0):
        raise NonConvergenceError("auxiliary solution is not positive in the interior")
    return xi


def plap_power_identity(eig: EigenPair, gamma: float, scale: float = 1.0) -> np.ndarray:
    """Nodal value of ``-Delta_r (scale^{1/(r-1)} phi^gamma)`` from the eigenpair.

    Evaluates ``scale * gamma^{r-1} phi^{gamma(r-1)-r} (lam phi^r -
    (gamma-1)(r-1)|grad phi|^r)`` with recovered nodal gradients.
    """
    if not gamma > 1:
        raise ValueError(f"gamma must exceed 1, got {gamma}")
    r, phi = eig.r, eig.phi
    g = np.linalg.norm(eig.mesh.recovered_gradient(phi), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = phi ** (gamma * (r - 1)) * eig.value - (gamma - 1) * (r - 1) * phi ** (gamma * (r - 1) - r) * g**r
    return scale * gamma ** (r - 1) * val
