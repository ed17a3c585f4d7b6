"""Parameter checks and closed-form constants for the singular cooperative system

    -Delta_p u = lam u^a1 v^b1,   -Delta_q v = lam u^a2 v^b2,   u, v > 0,

with zero Dirichlet data and ``a1, b2 < 0 < a2, b1``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .errors import HypothesisError

C2_RTOL = 1e-12


@dataclass(frozen=True)
class ProblemParams:
    p: float
    q: float
    alpha1: float
    beta1: float
    alpha2: float
    beta2: float
    lam: float = 1.0
    gamma: float = 2.0

    def __post_init__(self):
        for name in ("p", "q"):
            if not getattr(self, name) > 1:
                raise HypothesisError(f"{name} must exceed 1, got {getattr(self, name)}")
        if not self.gamma > 1:
            raise HypothesisError(f"gamma must exceed 1, got {self.gamma}")
        if not self.lam > 0:
            raise HypothesisError(f"lambda must be positive, got {self.lam}")

    def with_lambda(self, lam: float) -> "ProblemParams":
        return ProblemParams(**{**asdict(self), "lam": lam})

    def swapped(self) -> "ProblemParams":
        """The same system with the roles of u and v exchanged."""
        return ProblemParams(self.q, self.p, self.beta2, self.alpha2, self.beta1, self.alpha1, self.lam, self.gamma)


@dataclass(frozen=True)
class Classification:
    theta: float
    sigma: int
    regime: str
    h1: bool
    h_prime: bool
    h_doubleprime: bool
    c: bool
    c2: bool
    k: float
    k_interval: tuple[float, float] | None  # None when k is free

    def report(self) -> str:
        lines = [
            f"theta: {self.theta!r}, sigma: {self.sigma}",
            f"regime: {self.regime}",
            f"h1: {self.h1}",
            f"h_prime: {self.h_prime}",
            f"h_doubleprime: {self.h_doubleprime}",
            f"c: {self.c}",
            f"c2: {self.c2}",
            f"k: {self.k!r}",
            "k_interval: free" if self.k_interval is None else f"k_interval: ({self.k_interval[0]!r}, {self.k_interval[1]!r})",
        ]
        return "\n".join(lines) + "\n"


def theta(params: ProblemParams) -> float:
    """Homogeneity constant ``(p-1-a1)(q-1-b2) - b1 a2``."""
    P = params
    return (P.p - 1 - P.alpha1) * (P.q - 1 - P.beta2) - P.beta1 * P.alpha2


def sigma(theta_value: float) -> int:
    """``-sgn(theta)``."""
    if theta_value < 0:
        return 1
    if theta_value > 0:
        return -1
    return 0


def _regime(s: int) -> str:
    return {-1: "subhomogeneous", 0: "homogeneous", 1: "superhomogeneous"}[s]


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= C2_RTOL * max(1.0, abs(a), abs(b))


def check_h1(params: ProblemParams) -> None:
    P = params
    for name, value, neg in (("alpha1", P.alpha1, True), ("beta2", P.beta2, True), ("alpha2", P.alpha2, False), ("beta1", P.beta1, False)):
        if (neg and not value < 0) or (not neg and not value > 0):
            side = "< 0" if neg else "> 0"
            raise HypothesisError(f"not cooperative-singular: {name} = {value} must be {side}")


def k_interval(params: ProblemParams, theta_value: float | None = None):
    """Open interval of admissible coupling exponents, or None when free."""
    th = theta(params) if theta_value is None else theta_value
    P = params
    left = (P.p - 1 - P.alpha1) / P.beta1
    right = P.alpha2 / (P.q - 1 - P.beta2)
    s = sigma(th)
    if s == 0:
        return None
    lo, hi = (left, right) if s == 1 else (right, left)
    if not lo < hi:
        raise AssertionError(f"empty k interval ({lo}, {hi}) although theta = {th}")
    return lo, hi


def choose_k(params: ProblemParams, classification: Classification | None = None, override: float | None = None) -> float:
    """Midpoint of the admissible interval (or ``override`` if it lies inside); 1 when free."""
    th = theta(params) if classification is None else classification.theta
    interval = k_interval(params, th)
    if interval is None:
        return 1.0 if override is None else float(override)
    lo, hi = interval
    if override is not None:
        if not lo < override < hi:
            raise HypothesisError(f"k = {override} outside the admissible interval ({lo}, {hi})")
        return float(override)
    k = 0.5 * (lo + hi)
    assert lo < k < hi
    return k


def validate(params: ProblemParams, k_override: float | None = None) -> Classification:
    """Classify the parameters; only (h1) violations are fatal."""
    check_h1(params)
    P = params
    th = theta(P)
    s = sigma(th)
    interval = k_interval(P, th)
    c2 = _close(P.beta1, P.q / P.p * (P.p - 1 - P.alpha1)) or _close(P.alpha2, P.p / P.q * (P.q - 1 - P.beta2))
    return Classification(
        theta=th,
        sigma=s,
        regime=_regime(s),
        h1=True,
        h_prime=P.alpha1 > -1 - 1 / P.gamma and P.beta2 > -1 - 1 / P.gamma,
        h_doubleprime=P.alpha1 > -1 / P.gamma and P.beta2 > -1 / P.gamma,
        c=-1 < P.alpha1 < 0 and -1 < P.beta2 < 0,
        c2=c2,
        k=choose_k(P, None, k_override),
        k_interval=interval,
    )


def epsilon0(C: float, sigma_value: int, k: float) -> float:
    """Regularization ceiling ``min(C^sigma, C^(sigma k))``."""
    if not C > 1:
        raise ValueError(f"C must exceed 1, got {C}")
    return min(C**sigma_value, C ** (sigma_value * k))


def lambda_star(params: ProblemParams, lam1p: float, lam1q: float) -> float:
    """Nonexistence threshold ``min(p lam1p/(a1+a2+1), q lam1q/(b1+b2+1))``.

    Defined only in the homogeneous case under (c) and (c2).
    """
    cls = validate(params)
    P = params
    if cls.sigma != 0:
        raise HypothesisError(f"lambda_star needs theta = 0, got {cls.theta}")
    if not cls.c:
        raise HypothesisError("lambda_star needs (c): alpha1, beta2 in (-1, 0)")
    if not cls.c2:
        raise HypothesisError("lambda_star needs (c2): beta1 = q(p-1-alpha1)/p or alpha2 = p(q-1-beta2)/q")
    sa, sb = P.alpha1 + P.alpha2 + 1, P.beta1 + P.beta2 + 1
    if not (sa > 0 and sb > 0):
        raise HypothesisError("lambda_star needs alpha1+alpha2+1 > 0 and beta1+beta2+1 > 0")
    return min(P.p / sa * lam1p, P.q / sb * lam1q)


def eigen_gaps(params: ProblemParams, lam: float, lam1p: float, lam1q: float) -> tuple[float, float]:
    """``lam1p - (a1+a2+1)/p lam`` and ``lam1q - (b1+b2+1)/q lam``."""
    P = params
    return (
        lam1p - (P.alpha1 + P.alpha2 + 1) / P.p * lam,
        lam1q - (P.beta1 + P.beta2 + 1) / P.q * lam,
    )

