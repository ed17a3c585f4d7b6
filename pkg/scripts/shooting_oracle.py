"""Compute first Dirichlet eigenvalues of the 1D r-Laplacian on (0, 1) by shooting.

Integrates u' = |w|^{1/(r-1)} sgn(w), w' = -lam |u|^{r-2} u from u(0) = 0,
w(0) = 1 and finds lam with w(1/2) = 0 (symmetry of the first mode).
Writes tests/fixtures/eigen_oracle.json.

    python scripts/shooting_oracle.py
"""

import json
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

EXPONENTS = (1.5, 2.0, 3.0)


def flux_at_half(lam, r):
    def rhs(x, y):
        u, w = y
        return [np.sign(w) * abs(w) ** (1 / (r - 1)), -lam * np.sign(u) * abs(u) ** (r - 1)]

    sol = solve_ivp(rhs, (0.0, 0.5), [0.0, 1.0], rtol=1e-12, atol=1e-14, method="DOP853")
    return sol.y[1, -1]


def first_eigenvalue(r):
    lo, hi = 1.0, 2.0
    while flux_at_half(hi, r) > 0:
        lo, hi = hi, 2 * hi
    return brentq(flux_at_half, lo, hi, args=(r,), xtol=1e-13, rtol=1e-14)


def closed_form(r):
    pi_r = 2 * np.pi / (r * np.sin(np.pi / r))
    return (r - 1) * pi_r**r


def main():
    out = {
        "domain": [0.0, 1.0],
        "method": "shooting, DOP853 rtol=1e-12, brentq on w(1/2)=0",
        "eigenvalues": {
            f"{r:g}": {"shooting": first_eigenvalue(r), "closed_form": closed_form(r)} for r in EXPONENTS
        },
    }
    path = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "eigen_oracle.json"
    path.write_text(json.dumps(out, indent=2) + "\n")
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
