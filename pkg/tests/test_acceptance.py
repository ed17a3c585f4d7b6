"""Acceptance criteria, one test each, at the stated tolerances.

Every test prints ``PASS criterion N: ...`` or ``FAIL criterion N: ...``;
the lines are repeated in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from plapsys import barriers as bar
from plapsys.cli import EXIT_OK, main
from plapsys.errors import HypothesisError
from plapsys.mesh import build_mesh
from plapsys.plaplace import first_eigenpair, plap_power_identity, weak_residual
from plapsys.problem import ProblemParams, choose_k, epsilon0, k_interval, lambda_star, sigma, theta
from plapsys.solver import SolveConfig, continuation_solve
from plapsys.verification import (
    Outcome,
    empirical_threshold,
    manufactured_convergence,
    nonexistence_probe,
)

from conftest import HOMOGENEOUS, REFERENCE, UNIT

RESULTS: dict[int, str] = {}


def verdict(n: int, checks: dict[str, bool], detail: str = "") -> None:
    failed = [name for name, ok in checks.items() if not ok]
    line = f"{'PASS' if not failed else 'FAIL'} criterion {n}: " + (
        "all checks met" if not failed else "failed " + ", ".join(failed)
    )
    if detail:
        line += f" ({detail})"
    RESULTS[n] = line
    print(line)
    assert not failed, line


def test_criterion_1_eigen_accuracy(eigen_oracle):
    m = build_mesh(UNIT, 512)
    t0 = time.perf_counter()
    e2 = first_eigenpair(2, m)
    t2 = time.perf_counter() - t0
    t0 = time.perf_counter()
    e3 = first_eigenpair(3, m)
    t3 = time.perf_counter() - t0
    ref3 = eigen_oracle["eigenvalues"]["3"]["shooting"]
    err2 = abs(e2.value - math.pi**2) / math.pi**2
    err3 = abs(e3.value - ref3) / ref3
    verdict(
        1,
        {"lambda_1,2 within 0.5%": err2 <= 5e-3, "lambda_1,3 within 1%": err3 <= 1e-2,
         "runtime p=2 < 5 s": t2 < 5, "runtime p=3 < 5 s": t3 < 5},
        f"rel err {err2:.2e}, {err3:.2e}; {t2:.2f} s, {t3:.2f} s",
    )


def test_criterion_2_power_identity():
    checks, finals = {}, []
    for r, gamma in [(2, 2), (3, 2), (1.5, 3)]:
        res = []
        for n in (64, 128, 256):
            m = build_mesh(UNIT, n)
            e = first_eigenpair(r, m)
            res.append(float(np.max(np.abs(weak_residual(r, e.phi**gamma, plap_power_identity(e, gamma), m)))))
        checks[f"decrease ({r},{gamma})"] = res[0] > res[1] > res[2]
        checks[f"final <= 0.05 ({r},{gamma})"] = res[2] <= 0.05
        finals.append(f"{res[2]:.2e}")
    verdict(2, checks, "final sup-norms " + ", ".join(finals))


def test_criterion_3_classification_arithmetic():
    tol = 1e-12
    P_sub = REFERENCE
    P_zero = HOMOGENEOUS
    P_super = ProblemParams(p=2, q=2, alpha1=-0.5, beta1=3, alpha2=3, beta2=-0.5)
    lo, hi = k_interval(P_sub)
    slo, shi = k_interval(P_super)
    checks = {
        "theta 2.0": abs(theta(P_sub) - 2.0) <= tol,
        "theta 0": abs(theta(P_zero)) <= tol,
        "theta -6.75": abs(theta(P_super) + 6.75) <= tol,
        "sigma": (sigma(2.0), sigma(0.0), sigma(-6.75)) == (-1, 0, 1),
        "k interval (.5, 2)": abs(slo - 0.5) <= tol and abs(shi - 2.0) <= tol,
        "k 1.25": abs(choose_k(P_super) - 1.25) <= tol,
        "k interval (1/3, 3)": abs(lo - 1 / 3) <= tol and abs(hi - 3.0) <= tol,
        "k 5/3": abs(choose_k(P_sub) - 5 / 3) <= tol,
        "k free": k_interval(P_zero) is None and choose_k(P_zero) == 1.0,
        "eps0 C=10": abs(epsilon0(10, -1, 5 / 3) - min(0.1, 10 ** (-5 / 3))) <= tol,
        "eps0 sigma=0": epsilon0(10, 0, 1.0) == 1.0,
        "lambda_star pi^2": abs(lambda_star(P_zero, math.pi**2, math.pi**2) - math.pi**2) <= tol,
        "lambda_star 1": abs(lambda_star(P_zero, 1.0, 1.0) - 1.0) <= tol,
    }
    try:
        epsilon0(1.0, -1, 1.0)
        checks["eps0 rejects C=1"] = False
    except ValueError:
        checks["eps0 rejects C=1"] = True
    try:
        lambda_star(P_sub, 1.0, 1.0)
        checks["lambda_star rejects theta != 0"] = False
    except HypothesisError:
        checks["lambda_star rejects theta != 0"] = True
    verdict(3, checks)


def test_criterion_4_barrier_certificate(reference_setup):
    s = reference_setup
    C, cert = bar.select_C(s, REFERENCE.lam)
    bp = bar.barriers_for(s, C)
    worst = min(m.worst for m in cert.margins.values())
    spots = [bar.certify_barriers(s, REFERENCE.lam, bp, cert.eps * f).passed for f in (0.1, 0.01)]
    verdict(
        4,
        {"C <= 2^30": C <= 2**30, "margins >= -1e-10": worst >= -1e-10,
         "ordering u": bool(np.all(bp.lower_u <= bp.upper_u)), "ordering v": bool(np.all(bp.lower_v <= bp.upper_v)),
         "eps spot-checks": all(spots)},
        f"C = {C:g}, worst margin {worst:.3e}",
    )


def test_criterion_5_system_solve(reference_setup):
    s = reference_setup
    C, cert = bar.select_C(s, REFERENCE.lam)
    bp = bar.barriers_for(s, C)
    cfg = SolveConfig(eps_stages=20)
    u, v, rep = continuation_solve(REFERENCE, REFERENCE.lam, s.mesh, bp, cert.eps, cfg)
    last_eps = rep.stages[-1].eps
    tail = rep.cauchy_diffs[-5:]
    res = max(rep.final_res_u, rep.final_res_v)
    verdict(
        5,
        {"reached eps0 * 2^-20": math.isclose(last_eps, cert.eps * 2.0**-20, rel_tol=1e-12),
         "final residual <= 1e-6": res <= 1e-6,
         "trapped at every stage": all(st.trapped for st in rep.stages),
         "symmetric |u - v| <= 1e-8": float(np.max(np.abs(u - v))) <= 1e-8,
         "Cauchy tail within factor 2": len(tail) == 5 and all(b <= 2 * a for a, b in zip(tail, tail[1:]))},
        f"residual {res:.2e}",
    )


def test_criterion_6_nonexistence(homogeneous_setup):
    s = homogeneous_setup
    lstar = lambda_star(HOMOGENEOUS, s.eigp.value, s.eigq.value)
    checks = {"lambda_star ~ pi^2": abs(lstar - math.pi**2) / math.pi**2 <= 5e-3}
    low = nonexistence_probe(s, 0.5 * lstar)
    checks["probe at lambda_star/2 is COLLAPSE or NONCONVERGENCE"] = low.outcome in (Outcome.COLLAPSE, Outcome.NONCONVERGENCE)
    lam_min, _ = bar.select_lambda_min(s)
    high = nonexistence_probe(s, 10 * lam_min)
    checks["probe at 10 lambda_min is CONVERGED_POSITIVE"] = high.outcome is Outcome.CONVERGED_POSITIVE
    energy_ok = False
    if high.energy is not None:
        energy_ok = high.energy.lhs <= high.energy.rhs * (1 + 1e-6)
    checks["energy bound within 1e-6"] = energy_ok
    try:
        th = empirical_threshold(s, lstar / 2, 20 * lstar, 10)
        checks["lambda_emp >= 0.9 lambda_star"] = th.lam_emp >= 0.9 * lstar
        emp = f"lambda_emp {th.lam_emp:.4g}"
    except ValueError as exc:
        checks["lambda_emp >= 0.9 lambda_star"] = False
        emp = f"threshold search: {exc}"
    verdict(
        6,
        checks,
        f"lambda_star {lstar:.4f}, lambda_min {lam_min:.4g}, probes {low.outcome.value}/{high.outcome.value}; {emp}",
    )


def test_criterion_7_manufactured_orders():
    checks, detail = {}, []
    for r, need in [(2.0, 1.8), (1.5, 0.9), (3.0, 0.9)]:
        t = manufactured_convergence(r, [64, 128, 256])
        checks[f"order r={r:g} >= {need}"] = min(t.orders) >= need
        detail.append(f"r={r:g}: {min(t.orders):.2f}")
    verdict(7, checks, ", ".join(detail))


def test_criterion_8_determinism(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text("[mesh]\nn = 256\n")
    codes = [main(["solve", str(cfg), "--out", str(tmp_path / d)]) for d in ("a", "b")]
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    same = names == sorted(p.name for p in (tmp_path / "b").iterdir()) and all(
        (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names
    )
    verdict(8, {"both runs exit 0": codes == [EXIT_OK, EXIT_OK], "byte-identical outputs": same}, f"{len(names)} files")
