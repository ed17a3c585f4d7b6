"""Explicit sub- and supersolution pairs and their discrete certification.

Lower barrier: ``(C^s phi_p^g, C^{s k} phi_q^g)`` built from the first
eigenfunctions on the domain.  Upper barrier: ``C^{-d} (xi1, xi2)`` where
``xi1, xi2`` solve singular problems ``-Delta_r xi = C^{d(r-1)} xi^t`` on a
padded domain and are restricted to the original mesh.

Certification checks the weak inequalities against every interior hat
function: the subsolution at the largest admissible regularization
``eps`` (its worst case, the right side decreases in eps) and the
supersolution at ``eps = 0`` (its worst case).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import mesh as msh
from .errors import CertificateError, HypothesisError
from .plaplace import EigenPair, first_eigenpair, singular_auxiliary_solve, weak_residual
from .problem import Classification, ProblemParams, epsilon0, validate

log = logging.getLogger(__name__)

MARGIN_TOL = 1e-10
C_LADDER = tuple(2.0**j for j in range(1, 31))


@dataclass(frozen=True)
class ComparisonConstants:
    l1: float
    l2: float
    l: float
    M: float
    mu: float
    rho: float
    c1: float
    c2: float
    c1p: float
    c2p: float
    aux_delta: float
    theta1: float
    theta2: float


@dataclass(frozen=True, eq=False)
class BarrierPair:
    lower_u: np.ndarray
    lower_v: np.ndarray
    upper_u: np.ndarray
    upper_v: np.ndarray
    C: float
    k: float
    sigma: int
    gamma: float


@dataclass(frozen=True)
class Margin:
    worst: float
    node: int
    where: tuple[float, ...]


@dataclass
class BarrierCertificate:
    margins: dict[str, Margin]
    diagnostics: dict[str, Margin]
    eps_range: tuple[float, float]
    eps: float
    passed: bool
    C: float
    lam: float

    def worst(self) -> tuple[str, Margin]:
        name = min(self.margins, key=lambda k: self.margins[k].worst)
        return name, self.margins[name]

    def report(self) -> str:
        lines = [
            f"verdict: {'pass' if self.passed else 'fail'}",
            f"C: {self.C!r}",
            f"lambda: {self.lam!r}",
            f"eps: {self.eps!r}",
            f"eps_range: [{self.eps_range[0]!r}, {self.eps_range[1]!r}]",
        ]
        for kind, table in (("margin", self.margins), ("diagnostic", self.diagnostics)):
            for name, m in table.items():
                loc = ", ".join(f"{c:.6g}" for c in m.where)
                lines.append(f"{kind}.{name}: {m.worst!r} at node {m.node} ({loc})")
        return "\n".join(lines) + "\n"


@dataclass(eq=False)
class BarrierSetup:
    """Everything the barrier formulas need that does not depend on C or lambda."""

    params: ProblemParams
    classification: Classification
    mesh: msh.Mesh
    mesh_tilde: msh.Mesh
    eigp: EigenPair
    eigq: EigenPair
    eigp_tilde: EigenPair
    eigq_tilde: EigenPair
    xi1_unit: np.ndarray  # amplitude-one auxiliary solutions on the padded mesh
    xi2_unit: np.ndarray
    theta1: float
    theta2: float
    aux_delta: float
    strip: msh.RegionMask
    extras: dict = field(default_factory=dict)

    @property
    def k(self) -> float:
        return self.classification.k

    def xi_fields(self, C: float) -> tuple[np.ndarray, np.ndarray]:
        """Auxiliary solutions at amplitude ``C^{d(r-1)}`` on the padded mesh.

        Uses the homothety of the r-Laplacian: if xi solves with amplitude 1
        then ``c xi`` solves with amplitude ``c^{r-1-t}``.
        """
        P, d = self.params, self.aux_delta
        e1 = d * (P.p - 1) / (P.p - 1 - self.theta1)
        e2 = d * (P.q - 1) / (P.q - 1 - self.theta2)
        return math.exp(e1 * math.log(C)) * self.xi1_unit, math.exp(e2 * math.log(C)) * self.xi2_unit


def default_thetas(params: ProblemParams) -> tuple[float, float]:
    return max(-1.0, params.alpha1) / 2, max(-1.0, params.beta2) / 2


def aux_delta_bound(params: ProblemParams, k: float, theta1: float, theta2: float) -> float:
    return min((params.p - 1) / theta1, k * (params.q - 1) / theta2)


def check_aux_exponents(params: ProblemParams, k: float, theta1: float, theta2: float, aux_delta: float) -> None:
    P = params
    if not max(-1.0, P.alpha1) < theta1 < 0:
        raise HypothesisError(f"theta1 = {theta1} outside ({max(-1.0, P.alpha1)}, 0)")
    if not max(-1.0, P.beta2) < theta2 < 0:
        raise HypothesisError(f"theta2 = {theta2} outside ({max(-1.0, P.beta2)}, 0)")
    bound = aux_delta_bound(P, k, theta1, theta2)
    if not aux_delta < bound:
        raise HypothesisError(f"aux_delta = {aux_delta} must be below {bound}")


def prepare(
    params: ProblemParams,
    spec: msh.DomainSpec,
    n: int,
    *,
    theta1: float | None = None,
    theta2: float | None = None,
    aux_delta: float | None = None,
    k: float | None = None,
    strip_width: float | None = None,
    classification: Classification | None = None,
) -> BarrierSetup:
    """Meshes, eigenpairs and unit auxiliary solutions for one problem."""
    cls = classification if classification is not None else validate(params, k)
    mesh = msh.build_mesh(spec, n)
    mesh_t = msh.enlarged_mesh(spec, match=mesh)
    dt1, dt2 = default_thetas(params)
    theta1 = dt1 if theta1 is None else theta1
    theta2 = dt2 if theta2 is None else theta2
    if aux_delta is None:
        aux_delta = 2 * aux_delta_bound(params, cls.k, theta1, theta2)
    check_aux_exponents(params, cls.k, theta1, theta2, aux_delta)
    if strip_width is None:
        # 4h, kept inside the admissible range on coarse meshes
        strip_width = min(4 * mesh.h, 0.25 * msh.inradius(mesh))
    strip = msh.boundary_strip(mesh, strip_width)

    eigp = first_eigenpair(params.p, mesh)
    eigq = eigp if params.q == params.p else first_eigenpair(params.q, mesh)
    eigp_t = first_eigenpair(params.p, mesh_t)
    eigq_t = eigp_t if params.q == params.p else first_eigenpair(params.q, mesh_t)
    xi1 = singular_auxiliary_solve(params.p, 1.0, theta1, mesh_t)
    if params.q == params.p and theta2 == theta1:
        xi2 = xi1
    else:
        xi2 = singular_auxiliary_solve(params.q, 1.0, theta2, mesh_t)
    return BarrierSetup(params, cls, mesh, mesh_t, eigp, eigq, eigp_t, eigq_t, xi1, xi2, theta1, theta2, aux_delta, strip)


def fit_comparison_constants(
    eigp: EigenPair,
    eigq: EigenPair,
    eigp_tilde: EigenPair,
    eigq_tilde: EigenPair,
    xi1: np.ndarray,
    xi2: np.ndarray,
    strip: msh.RegionMask,
    *,
    C: float,
    aux_delta: float,
    theta1: float,
    theta2: float,
) -> ComparisonConstants:
    """Fit the comparison constants of the barrier construction.

    ``xi1, xi2`` live on the padded mesh of ``eigp_tilde``; the tilde
    eigenfunctions are restricted to the original mesh where needed.
    """
    mesh, mesh_t = eigp.mesh, eigp_tilde.mesh
    inner = mesh.interior
    fp, fq = eigp.phi, eigq.phi
    ratio = fq[inner] / fp[inner]
    d = msh.distance_to_boundary(mesh)
    l = float(np.min(np.minimum(fp, fq)[inner] / d[inner]))
    tp = msh.transfer(eigp_tilde.phi, mesh_t, mesh)
    tq = msh.transfer(eigq_tilde.phi, mesh_t, mesh)
    M = max(fp.max(), fq.max(), tp.max(), tq.max())
    bulk = (~strip).mask & inner
    mu = min(msh.field_extrema(fp, bulk)[0], msh.field_extrema(fq, bulk)[0])
    rho = min(tp.min(), tq.min())
    it = mesh_t.interior
    scale = C**aux_delta
    r1 = xi1[it] / (scale * eigp_tilde.phi[it])
    r2 = xi2[it] / (scale * eigq_tilde.phi[it])
    return ComparisonConstants(
        l1=float(ratio.min()), l2=float(ratio.max()), l=l, M=float(M), mu=mu, rho=float(rho),
        c1=float(r1.min()), c2=float(r1.max()), c1p=float(r2.min()), c2p=float(r2.max()),
        aux_delta=aux_delta, theta1=theta1, theta2=theta2,
    )


def build_subsolution(params: ProblemParams, classification: Classification, eigp: EigenPair, eigq: EigenPair, C: float):
    s, k, g = classification.sigma, classification.k, params.gamma
    return C**s * eigp.phi**g, C ** (s * k) * eigq.phi**g


def build_supersolution(params: ProblemParams, aux_delta: float, xi1: np.ndarray, xi2: np.ndarray, C: float):
    """``C^{-aux_delta} (xi1, xi2)`` from auxiliary fields already on the original mesh."""
    if np.any(xi1 <= 0) or np.any(xi2 <= 0):
        raise CertificateError("auxiliary fields not positive on the closed domain; enlarge the padding")
    scale = C ** (-aux_delta)
    return scale * xi1, scale * xi2


def barriers_for(setup: BarrierSetup, C: float) -> BarrierPair:
    P, cls = setup.params, setup.classification
    lu, lv = build_subsolution(P, cls, setup.eigp, setup.eigq, C)
    # combine the C powers in log space; individually they overflow
    d = setup.aux_delta
    e1 = -d + d * (P.p - 1) / (P.p - 1 - setup.theta1)
    e2 = -d + d * (P.q - 1) / (P.q - 1 - setup.theta2)
    x1 = msh.transfer(setup.xi1_unit, setup.mesh_tilde, setup.mesh)
    x2 = msh.transfer(setup.xi2_unit, setup.mesh_tilde, setup.mesh)
    if np.any(x1 <= 0) or np.any(x2 <= 0):
        raise CertificateError("auxiliary fields not positive on the closed domain; enlarge the padding")
    uu = math.exp(e1 * math.log(C)) * x1
    uv = math.exp(e2 * math.log(C)) * x2
    return BarrierPair(lu, lv, uu, uv, C, cls.k, cls.sigma, P.gamma)


def _worst(values: np.ndarray, mask: np.ndarray, mesh: msh.Mesh) -> Margin:
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return Margin(math.inf, -1, ())
    j = idx[np.argmin(values[idx])]
    return Margin(float(values[j]), int(j), tuple(float(c) for c in mesh.points[j]))


def sub_margins(params: ProblemParams, lam: float, lu, lv, eps: float, mesh: msh.Mesh):
    """Nodal ``rhs - lhs`` of the two subsolution inequalities (nonnegative = satisfied)."""
    P = params
    uq, vq = mesh.at_quadrature(lu), mesh.at_quadrature(lv)
    fu = lam * (uq + eps) ** P.alpha1 * vq**P.beta1
    fv = lam * uq**P.alpha2 * (vq + eps) ** P.beta2
    return -weak_residual(P.p, lu, fu, mesh), -weak_residual(P.q, lv, fv, mesh)


def super_margins(params: ProblemParams, lam: float, uu, uv, mesh: msh.Mesh):
    """Nodal ``lhs - rhs`` of the two supersolution inequalities at ``eps = 0``."""
    P = params
    uq, vq = mesh.at_quadrature(uu), mesh.at_quadrature(uv)
    fu = lam * uq**P.alpha1 * vq**P.beta1
    fv = lam * uq**P.alpha2 * vq**P.beta2
    return weak_residual(P.p, uu, fu, mesh), weak_residual(P.q, uv, fv, mesh)


def certify_barriers(
    setup: BarrierSetup,
    lam: float,
    barriers: BarrierPair,
    eps: float,
    eps0: float | None = None,
) -> BarrierCertificate:
    """Evaluate every barrier inequality nodally; never raises on failure."""
    P, mesh = setup.params, setup.mesh
    cls = setup.classification
    eps0 = epsilon0(barriers.C, cls.sigma, cls.k) if eps0 is None else eps0
    if not 0 <= eps <= eps0:
        raise ValueError(f"eps = {eps} outside [0, eps0 = {eps0}]")
    inner = mesh.interior
    strip = setup.strip.mask & inner
    bulk = ~setup.strip.mask & inner
    with np.errstate(all="ignore"):
        su, sv = sub_margins(P, lam, barriers.lower_u, barriers.lower_v, eps, mesh)
        pu, pv = super_margins(P, lam, barriers.upper_u, barriers.upper_v, mesh)
    su, sv, pu, pv = (np.where(np.isfinite(a), a, -np.inf) for a in (su, sv, pu, pv))
    margins = {}
    for name, vals in (("sub_u", su), ("sub_v", sv), ("super_u", pu), ("super_v", pv)):
        margins[f"{name}.strip"] = _worst(vals, strip, mesh)
        margins[f"{name}.bulk"] = _worst(vals, bulk, mesh)
    all_nodes = np.ones(mesh.n_nodes, dtype=bool)
    margins["order_u"] = _worst(barriers.upper_u - barriers.lower_u, all_nodes, mesh)
    margins["order_v"] = _worst(barriers.upper_v - barriers.lower_v, all_nodes, mesh)
    margins["positivity_u"] = _worst(barriers.lower_u, inner, mesh)
    margins["positivity_v"] = _worst(barriers.lower_v, inner, mesh)

    diagnostics = {}
    for name, eig in (("gradient_dominance_p", setup.eigp), ("gradient_dominance_q", setup.eigq)):
        g = np.linalg.norm(mesh.recovered_gradient(eig.phi), axis=1)
        diagnostics[name] = _worst(g**eig.r - eig.value * eig.phi**eig.r, strip, mesh)

    passed = all(
        m.worst >= -MARGIN_TOL for key, m in margins.items() if not key.startswith("positivity")
    ) and margins["positivity_u"].worst > 0 and margins["positivity_v"].worst > 0
    return BarrierCertificate(margins, diagnostics, (0.0, eps0), eps, passed, barriers.C, lam)


def select_C(setup: BarrierSetup, lam: float, ladder=C_LADDER) -> tuple[float, BarrierCertificate]:
    """First C on the geometric ladder whose barriers certify at ``lam``.

    Only for ``theta != 0``; the homogeneous case searches lambda instead,
    see :func:`select_lambda_min`.  Raises CertificateError carrying the
    least-bad certificate when the ladder is exhausted.
    """
    if setup.classification.sigma == 0:
        raise HypothesisError("theta = 0: barriers do not depend on C; use select_lambda_min")
    best = None
    for C in ladder:
        bp = barriers_for(setup, C)
        cert = certify_barriers(setup, lam, bp, epsilon0(C, setup.classification.sigma, setup.k))
        if cert.passed:
            log.info("barriers certified at C = %g", C)
            return C, cert
        if best is None or cert.worst()[1].worst > best.worst()[1].worst:
            best = cert
    name, m = best.worst()
    raise CertificateError(f"no C <= {ladder[-1]:g} certifies; worst margin {name} = {m.worst:.3e} at {m.where}", best)


def select_lambda_min(
    setup: BarrierSetup,
    C: float = 2.0,
    lam_lo: float | None = None,
    growth: float = 2.0**0.25,
    steps: int = 120,
) -> tuple[float, BarrierCertificate]:
    """Smallest lambda on a geometric grid where the subsolution inequalities hold.

    Homogeneous case only.  The returned certificate is the full check
    (supersolution and ordering included) at that lambda; its verdict is
    reported, not enforced.
    """
    if setup.classification.sigma != 0:
        raise HypothesisError("select_lambda_min is for theta = 0")
    bp = barriers_for(setup, C)
    eps0 = epsilon0(C, 0, setup.k)
    lam = lam_lo if lam_lo is not None else 1e-2 * min(setup.eigp.value, setup.eigq.value)
    inner = setup.mesh.interior
    for _ in range(steps):
        with np.errstate(all="ignore"):
            su, sv = sub_margins(setup.params, lam, bp.lower_u, bp.lower_v, eps0, setup.mesh)
        if min(su[inner].min(), sv[inner].min()) >= -MARGIN_TOL:
            return lam, certify_barriers(setup, lam, bp, eps0, eps0)
        lam *= growth
    raise CertificateError(f"subsolution inequalities fail up to lambda = {lam:g}")
