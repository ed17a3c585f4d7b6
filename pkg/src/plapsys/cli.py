"""Command-line entry point: ``plapsys COMMAND CONFIG [--out DIR]``.

Exit codes: 0 success, 2 nonconvergence, 3 certificate failure, 64 usage
error (unknown command), 65 bad configuration or parameters.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import barriers as bar
from . import io
from .config import KEYS, RunConfig
from .errors import CertificateError, ConfigError, HypothesisError, MeshError, NonConvergenceError
from .mesh import build_mesh, enlarged_mesh
from .plaplace import first_eigenpair, lp_norm_power
from .problem import epsilon0, lambda_star, validate
from .solver import continuation_solve
from .verification import Outcome, empirical_threshold, energy_certificate, manufactured_convergence, nonexistence_probe

log = logging.getLogger("plapsys")

EXIT_OK = 0
EXIT_NONCONVERGENCE = 2
EXIT_CERTIFICATE = 3
EXIT_USAGE = 64
EXIT_CONFIG = 65

COMMANDS = ("classify", "eigen", "barriers", "solve", "sweep", "verify")


class Run:
    """One command invocation: config, output directory and provenance."""

    def __init__(self, config: RunConfig, out: Path):
        self.config = config
        self.out = out
        self.prov = io.Provenance(__version__, config.digest)
        self.out.mkdir(parents=True, exist_ok=True)

    def report(self, name: str, text: str) -> None:
        io.write_report(self.out / name, text, self.prov)
        sys.stdout.write(text)

    def fields(self, name: str, mesh, fields) -> None:
        io.write_fields(self.out / name, mesh, fields, self.prov)

    def setup(self):
        c = self.config
        return bar.prepare(c.params(), c.domain_spec(), c["mesh.n"], **c.barrier_kwargs())


def _constants_text(setup, C: float) -> str:
    xi1, xi2 = setup.xi_fields(C)
    cc = bar.fit_comparison_constants(
        setup.eigp, setup.eigq, setup.eigp_tilde, setup.eigq_tilde, xi1, xi2,
        setup.strip, C=C, aux_delta=setup.aux_delta, theta1=setup.theta1, theta2=setup.theta2,
    )
    return "".join(f"constant.{k}: {v!r}\n" for k, v in dataclasses.asdict(cc).items())


def _barriers(run: Run, setup):
    """Barrier pair and certificate at the configured lambda (never raises on a failed check)."""
    c = run.config
    lam = c["problem.lambda"]
    cls = setup.classification
    extra = ""
    if cls.sigma == 0:
        C = c["barrier.C_homogeneous"]
        bp = bar.barriers_for(setup, C)
        cert = bar.certify_barriers(setup, lam, bp, epsilon0(C, 0, setup.k))
        try:
            lam_min, _ = bar.select_lambda_min(setup, C)
            extra = f"lambda_min: {lam_min!r}\n"
        except CertificateError as exc:
            extra = f"lambda_min: not found ({exc})\n"
    elif c["barrier.C"] is not None:
        C = c["barrier.C"]
        bp = bar.barriers_for(setup, C)
        cert = bar.certify_barriers(setup, lam, bp, epsilon0(C, cls.sigma, setup.k))
    else:
        try:
            C, cert = bar.select_C(setup, lam)
        except CertificateError as exc:
            cert = exc.certificate
            C = cert.C
        bp = bar.barriers_for(setup, C)
    return bp, cert, extra


def cmd_classify(run: Run) -> int:
    c = run.config
    cls = validate(c.params(), c["barrier.k"])
    run.report("classify.txt", cls.report())
    return EXIT_OK


def cmd_eigen(run: Run) -> int:
    c = run.config
    P, spec = c.params(), c.domain_spec()
    mesh = build_mesh(spec, c["mesh.n"])
    mesh_t = enlarged_mesh(spec, match=mesh)
    lines = []
    for label, r in (("p", P.p), ("q", P.q)):
        for suffix, m in (("", mesh), ("_tilde", mesh_t)):
            eig = first_eigenpair(r, m)
            run.fields(f"eigen_{label}{suffix}.csv", m, {"phi": eig.phi})
            lines += [
                f"lambda_{label}{suffix}: {eig.value!r}",
                f"exponent_{label}{suffix}: {r!r}",
                f"norm_{label}{suffix}: {lp_norm_power(m, eig.phi, r)!r}",
                f"iterations_{label}{suffix}: {eig.iterations}",
            ]
    run.report("eigen.txt", "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_barriers(run: Run) -> int:
    setup = run.setup()
    bp, cert, extra = _barriers(run, setup)
    run.fields("barriers.csv", setup.mesh, {
        "lower_u": bp.lower_u, "lower_v": bp.lower_v, "upper_u": bp.upper_u, "upper_v": bp.upper_v,
    })
    run.report("certificate.txt", cert.report() + extra + _constants_text(setup, bp.C))
    return EXIT_OK if cert.passed else EXIT_CERTIFICATE


def cmd_solve(run: Run) -> int:
    c = run.config
    setup = run.setup()
    bp, cert, extra = _barriers(run, setup)
    run.report("certificate.txt", cert.report() + extra)
    if not cert.passed:
        return EXIT_CERTIFICATE
    io.write_mesh(run.out, "mesh", setup.mesh, run.prov)
    eps0 = epsilon0(bp.C, setup.classification.sigma, setup.k)
    try:
        u, v, rep = continuation_solve(setup.params, c["problem.lambda"], setup.mesh, bp, eps0, c.solve_config())
    except NonConvergenceError as exc:
        rep = exc.report
        if rep is not None and rep.u is not None:
            run.fields("solution.csv", setup.mesh, {"u": rep.u, "v": rep.v})
        run.report("solve_report.txt", rep.report() if rep is not None else f"passed: False\nmessage: {exc}\n")
        return EXIT_NONCONVERGENCE
    run.fields("solution.csv", setup.mesh, {"u": u, "v": v})
    run.report("solve_report.txt", rep.report())
    return EXIT_OK if rep.passed else EXIT_NONCONVERGENCE


def _lambda_grid(c: RunConfig) -> np.ndarray:
    return np.geomspace(c["sweep.lambda_min"], c["sweep.lambda_max"], c["sweep.count"])


def cmd_sweep(run: Run) -> int:
    c = run.config
    setup = run.setup()
    rows = {k: [] for k in ("lambda", "outcome", "max_u", "max_v", "res_u", "res_v")}

    def add(lam, outcome, rep, mu=np.nan, mv=np.nan):
        rows["lambda"].append(float(lam))
        rows["outcome"].append(outcome)
        rows["max_u"].append(mu)
        rows["max_v"].append(mv)
        rows["res_u"].append(rep.final_res_u if rep is not None else np.nan)
        rows["res_v"].append(rep.final_res_v if rep is not None else np.nan)

    homogeneous = setup.classification.sigma == 0
    for lam in _lambda_grid(c):
        if homogeneous:
            res = nonexistence_probe(setup, float(lam), c.solve_config(clamp=False))
            add(lam, res.outcome.value, res.report, res.max_u, res.max_v)
            continue
        try:
            C, _ = bar.select_C(setup, float(lam))
        except CertificateError:
            add(lam, "CERTIFICATE_FAILED", None)
            continue
        bp = bar.barriers_for(setup, C)
        eps0 = epsilon0(C, setup.classification.sigma, setup.k)
        try:
            u, v, rep = continuation_solve(setup.params, float(lam), setup.mesh, bp, eps0, c.solve_config())
        except NonConvergenceError as exc:
            add(lam, Outcome.NONCONVERGENCE.value, exc.report)
            continue
        outcome = Outcome.CONVERGED_POSITIVE if rep.passed else Outcome.NONCONVERGENCE
        add(lam, outcome.value, rep, float(u.max()), float(v.max()))
    io.write_table(run.out / "sweep.csv", rows, run.prov)
    lines = [f"regime: {setup.classification.regime}", f"points: {len(rows['lambda'])}"]
    if homogeneous:
        lines.append("note: probe outcomes are numerical evidence, not proof")
    lines += [f"lambda {lam!r}: {o}" for lam, o in zip(rows["lambda"], rows["outcome"])]
    run.report("sweep.txt", "\n".join(lines) + "\n")
    return EXIT_OK


def _required_order(r: float) -> float:
    return 1.8 if r == 2 else 0.9


def cmd_verify(run: Run) -> int:
    c = run.config
    status = EXIT_OK
    table = {k: [] for k in ("r", "n", "error", "order")}
    lines = []
    for r in c["verify.exponents"]:
        t = manufactured_convergence(r, c["verify.levels"])
        for n, err, order in t.rows():
            table["r"].append(float(r))
            table["n"].append(n)
            table["error"].append(err)
            table["order"].append(float(order))
        ok = min(t.orders) >= _required_order(r)
        lines.append(f"manufactured r={r!r}: min_order={min(t.orders)!r} required={_required_order(r)!r} pass={ok}")
        if not ok:
            status = EXIT_CERTIFICATE
    io.write_table(run.out / "manufactured.csv", table, run.prov)

    cls = validate(c.params(), c["barrier.k"])
    if cls.sigma != 0 or not cls.c or not cls.c2:
        lines.append("energy_certificate: not applicable (needs theta = 0 with (c) and (c2))")
        run.report("verify.txt", "\n".join(lines) + "\n")
        return status

    setup = run.setup()
    lam = c["problem.lambda"]
    lstar = lambda_star(setup.params, setup.eigp.value, setup.eigq.value)
    lines.append(f"lambda_star: {lstar!r}")
    probe = nonexistence_probe(setup, lam, c.solve_config(clamp=False))
    lines.append(f"probe: {probe.outcome.value}")
    lines.append(f"probe_note: {probe.note}")
    if probe.energy is not None:
        cert = probe.energy
        lines.append("energy_candidate: probe solution")
    else:
        lu, lv = bar.build_subsolution(setup.params, setup.classification, setup.eigp, setup.eigq, c["barrier.C_homogeneous"])
        cert = energy_certificate(setup.params, lam, lu, lv, setup.eigp.value, setup.eigq.value, setup.mesh)
        lines.append("energy_candidate: lower barrier fields")
    lines += [f"energy.{line}" for line in cert.report().splitlines()]

    steps = c["verify.threshold_steps"]
    if steps > 0:
        lo = c["verify.threshold_lo"] if c["verify.threshold_lo"] is not None else 0.5 * lstar
        hi = c["verify.threshold_hi"] if c["verify.threshold_hi"] is not None else 20 * lstar
        try:
            th = empirical_threshold(setup, lo, hi, steps, c.solve_config(clamp=False))
        except ValueError as exc:
            lines.append(f"threshold: failed ({exc})")
            status = EXIT_CERTIFICATE
        else:
            lines += [f"threshold.{line}" for line in th.report().splitlines()]
            if th.lam_emp < c["verify.slack"] * lstar:
                status = EXIT_CERTIFICATE
    run.report("verify.txt", "\n".join(lines) + "\n")
    return status


HANDLERS = {
    "classify": cmd_classify,
    "eigen": cmd_eigen,
    "barriers": cmd_barriers,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _key_help() -> str:
    return "config keys (default):\n" + "\n".join(f"  {k} ({v.default!r}): {v.doc}" for k, v in KEYS.items())


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(
        prog="plapsys",
        description="Barriers, solves and checks for a singular cooperative (p,q)-Laplacian system.",
        epilog=_key_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    ap.add_argument("command", help="one of " + ", ".join(COMMANDS))
    ap.add_argument("config", help="TOML file with sectioned keys")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=f"plapsys {__version__}")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command not in HANDLERS:
        print(f"plapsys: unknown command {args.command!r}; expected one of {', '.join(COMMANDS)}", file=sys.stderr)
        return EXIT_USAGE
    try:
        config = RunConfig.load(args.config)
        run = Run(config, Path(args.out if args.out else config["output.dir"]))
        return HANDLERS[args.command](run)
    except (ConfigError, HypothesisError, MeshError) as exc:
        print(f"plapsys: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"plapsys: nonconvergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except CertificateError as exc:
        print(f"plapsys: certificate failure: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE


if __name__ == "__main__":
    sys.exit(main())
