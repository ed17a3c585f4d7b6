"""Dense-grid finite-difference reference values for the 1D solver tests.

Independent of the package: three-point differences for -u'' on (0, 1),
Newton with a sparse Jacobian.  Writes tests/fixtures/collocation_oracle.json.

    python3 scripts/collocation_oracle.py
"""

import json
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

N = 2048
SAMPLES = np.arange(1, 16) / 16


def laplacian(n):
    h = 1.0 / n
    main = 2.0 * np.ones(n - 1)
    off = -np.ones(n - 2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csc") / h**2


def newton(F, J, x, tol=1e-14, max_iter=100):
    # residuals carry 1/h^2 roundoff, so stop on the step size
    for _ in range(max_iter):
        dx = spsolve(J(x), -F(x))
        t = 1.0
        while np.any(x + t * dx <= 0) and t > 1e-12:
            t *= 0.5
        x = x + t * dx
        if np.max(np.abs(t * dx)) < tol:
            return x
    raise RuntimeError("oracle Newton did not converge")


def scalar_reference():
    """-u'' = 1/(u+1), u(0) = u(1) = 0."""
    A = laplacian(N)
    xs = np.arange(1, N) / N
    u0 = 0.5 * xs * (1 - xs)
    u = newton(lambda u: A @ u - 1 / (u + 1), lambda u: (A + sp.diags(1 / (u + 1) ** 2)).tocsc(), u0)
    return np.interp(SAMPLES, np.r_[0, xs, 1], np.r_[0, u, 0])


def system_reference(lam, eps, a1=-0.5, b1=0.5, a2=0.5, b2=-0.5):
    """-u'' = lam (u+eps)^a1 v^b1, -v'' = lam u^a2 (v+eps)^b2."""
    A = laplacian(N)
    xs = np.arange(1, N) / N
    m = N - 1
    z0 = np.r_[0.5 * xs * (1 - xs), 0.5 * xs * (1 - xs)]

    def F(z):
        u, v = z[:m], z[m:]
        return np.r_[A @ u - lam * (u + eps) ** a1 * v**b1, A @ v - lam * u**a2 * (v + eps) ** b2]

    def J(z):
        u, v = z[:m], z[m:]
        fuu = lam * a1 * (u + eps) ** (a1 - 1) * v**b1
        fuv = lam * b1 * (u + eps) ** a1 * v ** (b1 - 1)
        fvu = lam * a2 * u ** (a2 - 1) * (v + eps) ** b2
        fvv = lam * b2 * u**a2 * (v + eps) ** (b2 - 1)
        return sp.bmat([[A - sp.diags(fuu), -sp.diags(fuv)], [-sp.diags(fvu), A - sp.diags(fvv)]], format="csc")

    z = newton(F, J, z0)
    full = lambda w: np.interp(SAMPLES, np.r_[0, xs, 1], np.r_[0, w, 0])
    return full(z[:m]), full(z[m:])


def main():
    out = {"grid": N, "samples": SAMPLES.tolist(), "scalar_inv_shift": scalar_reference().tolist()}
    for lam in (1.0, 2.0):
        u, v = system_reference(lam, 1e-2)
        out[f"system_lam{lam:g}_eps0.01"] = {"u": u.tolist(), "v": v.tolist()}
    u, v = system_reference(1.0, 0.0)
    out["system_lam1_eps0"] = {"u": u.tolist(), "v": v.tolist()}
    path = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "collocation_oracle.json"
    path.write_text(json.dumps(out, indent=2) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
