"""Closed-form bound evaluators, thresholds, and statistical helpers.

Every function raises ParamError when a documented precondition fails;
`bound_report` wraps the same evaluations into a structured report for the
command line. Logarithms are natural unless a base is explicit in the name
of the quantity (the fair stability budget uses log base 4 of 1/eps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, NamedTuple

from .core import ParamError

E = math.e
Z95 = 1.959963984540054

# concentration constant 2 / (1 - 1/e)^2 used by the adaptive throttling bound
XI_CONST = 2.0 / (1.0 - 1.0 / E) ** 2


def stability_fair_T(k: int, epsilon: float) -> float:
    """Slots during which a fair protocol covers no new node with
    probability at least epsilon, against the throttling cluster scenario:
    k * log4(1/eps) / (4 ln k). Requires k >= 45 and 0 < eps < 1."""
    if k < 45:
        raise ParamError("stability_fair_T requires k >= 45")
    if not 0.0 < epsilon < 1.0:
        raise ParamError("stability_fair_T requires 0 < epsilon < 1")
    return k * (math.log(1.0 / epsilon) / math.log(4.0)) / (4.0 * math.log(k))


def stability_fair_T_loose(k: int, epsilon: float) -> float:
    """Looser variant of the fair stability budget: k * ln(1/eps) / (2 ln k)."""
    if k < 45:
        raise ParamError("stability_fair_T_loose requires k >= 45")
    if not 0.0 < epsilon < 1.0:
        raise ParamError("stability_fair_T_loose requires 0 < epsilon < 1")
    return k * math.log(1.0 / epsilon) / (2.0 * math.log(k))


def stability_oblivious_beta_max(k: int) -> float:
    """Largest stability window beta for which the oblivious throttling
    scenario works: k / (2 (1 + ln k)). Requires k >= e^3."""
    if k < E**3:
        raise ParamError("stability_oblivious_beta_max requires k >= e^3")
    return k / (2.0 * (1.0 + math.log(k)))


class AdaptiveParams(NamedTuple):
    """Parameters of the adaptive throttling scenario."""

    xi_const: float
    delta: float
    gamma: float
    beta_max: float


def stability_adaptive_params(k: int, beta: int) -> AdaptiveParams:
    """Adaptive throttling parameters for clique size k and window beta:
    delta = beta^2 k^(e/xi), gamma = xi ln delta, beta_max = k / (2 e gamma).
    Requires beta >= 1 and k above (2/(1-1/e))^(xi/e) ~ 8.34."""
    if beta < 1:
        raise ParamError("stability_adaptive_params requires beta >= 1")
    k_min = (2.0 / (1.0 - 1.0 / E)) ** (XI_CONST / E)
    if k <= k_min:
        raise ParamError(f"stability_adaptive_params requires k > {k_min:.3f}")
    delta = float(beta) ** 2 * float(k) ** (E / XI_CONST)
    gamma = XI_CONST * math.log(delta)
    beta_max = k / (2.0 * E * gamma)
    return AdaptiveParams(XI_CONST, delta, gamma, beta_max)


GEOCAST_KINDS = ("fair", "oblivious", "adaptive")


def geocast_lb(kind: str, n: int, alpha: int) -> float:
    """Expected-slots lower bound for solving geocast against the visitor
    scenario, by protocol class. alpha*n/2 accounts for the approach phases;
    the second term is the per-class interlude cost."""
    if kind not in GEOCAST_KINDS:
        raise ParamError(f"geocast_lb kind must be one of {GEOCAST_KINDS}")
    if alpha < 0:
        raise ParamError("geocast_lb requires alpha >= 0")
    base = alpha * n / 2.0
    if kind == "fair":
        if n <= 24:
            raise ParamError("geocast_lb(fair) requires n > 24")
        return base + n * n / (96.0 * math.log(n / 2.0))
    if kind == "oblivious":
        if n <= 3:
            raise ParamError("geocast_lb(oblivious) requires n > 3")
        return base + n * n / (48.0 * E * math.log(n / 2.0))
    if n <= 17:
        raise ParamError("geocast_lb(adaptive) requires n > 17")
    coeff = E**2 * (E + 1.0) ** 2 / (2.0 * (E - 1.0) ** 2)
    return base + coeff * n * n / math.log(n / 2.0)


def ub_budget(n: int, alpha: int, beta: int) -> float:
    """Dissemination budget of the fair flooding argument:
    alpha (n + S/beta) + S with S = 4 n (n-1) / ln n. Requires n > 2,
    beta >= 1, alpha >= 0."""
    if n <= 2:
        raise ParamError("ub_budget requires n > 2")
    if beta < 1:
        raise ParamError("ub_budget requires beta >= 1")
    if alpha < 0:
        raise ParamError("ub_budget requires alpha >= 0")
    s = 4.0 * n * (n - 1) / math.log(n)
    return alpha * (n + s / beta) + s


CHERNOFF_KINDS = ("lower-tight", "lower-exp", "upper-tight", "upper-count")


def chernoff(kind: str, mu: float, phi_or_r: float) -> float:
    """Binomial tail bounds for a sum with mean mu.

    lower-tight / lower-exp bound Pr[X <= (1-phi) mu] for 0 < phi < 1;
    upper-tight bounds Pr[X >= (1+phi) mu] for phi > 0; upper-count bounds
    Pr[X >= R] by 2^-R and requires R >= 6 mu.
    """
    if kind not in CHERNOFF_KINDS:
        raise ParamError(f"chernoff kind must be one of {CHERNOFF_KINDS}")
    if mu < 0 or not math.isfinite(mu):
        raise ParamError("chernoff requires mu >= 0")
    x = float(phi_or_r)
    if kind == "lower-tight":
        if not 0.0 < x < 1.0:
            raise ParamError("lower-tight requires 0 < phi < 1")
        return (math.exp(-x) / (1.0 - x) ** (1.0 - x)) ** mu
    if kind == "lower-exp":
        if not 0.0 < x < 1.0:
            raise ParamError("lower-exp requires 0 < phi < 1")
        return math.exp(-x * x * mu / 2.0)
    if kind == "upper-tight":
        if x <= 0.0:
            raise ParamError("upper-tight requires phi > 0")
        return (math.exp(x) / (1.0 + x) ** (1.0 + x)) ** mu
    if x < 6.0 * mu:
        raise ParamError("upper-count requires R >= 6 mu")
    return 2.0 ** (-x)


def unique_transmission_prob(count: int, p: float) -> float:
    """Probability exactly one of `count` independent p-transmitters fires:
    count * p * (1-p)^(count-1)."""
    if count < 0:
        raise ParamError("count must be >= 0")
    if not 0.0 <= p <= 1.0:
        raise ParamError("p must lie in [0, 1]")
    if count == 0:
        return 0.0
    return count * p * (1.0 - p) ** (count - 1)


def estimate_probability(successes: int, trials: int) -> tuple[float, tuple[float, float]]:
    """Point estimate and Wilson 95% interval for a Bernoulli rate."""
    if trials <= 0:
        raise ParamError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ParamError("successes must lie in [0, trials]")
    p_hat = successes / trials
    z2 = Z95 * Z95
    denom = 1.0 + z2 / trials
    center = (p_hat + z2 / (2.0 * trials)) / denom
    half = (Z95 / denom) * math.sqrt(p_hat * (1.0 - p_hat) / trials + z2 / (4.0 * trials * trials))
    # rounding can push a degenerate endpoint past the point estimate
    lo = min(max(0.0, center - half), p_hat)
    hi = max(min(1.0, center + half), p_hat)
    return p_hat, (lo, hi)


# thresholds shared by the adversarial scenarios and their tests

def fair_stability_threshold(k: int) -> float:
    """Fair-protocol contention threshold of the throttling scenario."""
    if k < 2:
        raise ParamError("fair_stability_threshold requires k >= 2")
    return 4.0 * math.log(k) / k


def oblivious_contention_threshold(k: int) -> float:
    """Summed-probability threshold above which the oblivious scenario
    treats a slot as high contention."""
    if k < 2:
        raise ParamError("oblivious_contention_threshold requires k >= 2")
    return 1.0 + math.log(k)


def geocast_fair_threshold(n: int) -> float:
    """Fair-protocol threshold of the visitor scenario: 8 ln(n/2) / n."""
    if n < 6:
        raise ParamError("geocast_fair_threshold requires n >= 6")
    return 8.0 * math.log(n / 2.0) / n


def geocast_interlude_cap(n: int) -> int:
    """Interlude length cap of the capped visitor scenarios:
    floor(n / (24 e ln(n/2))), at least 1."""
    if n < 6:
        raise ParamError("geocast_interlude_cap requires n >= 6")
    return max(1, math.floor(n / (24.0 * E * math.log(n / 2.0))))


@dataclass(frozen=True)
class BoundReport:
    """Structured result of one bound evaluation."""

    name: str
    inputs: dict[str, Any]
    value: float
    preconditions_ok: bool
    violated: tuple[str, ...] = ()
    extras: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "inputs": self.inputs,
            "value": self.value,
            "preconditions_ok": self.preconditions_ok,
            "violated": list(self.violated),
            "extras": self.extras,
        }


_REPORTABLE = (
    "stability_fair_T",
    "stability_oblivious_beta_max",
    "stability_adaptive_params",
    "geocast_lb",
    "ub_budget",
    "chernoff",
)


def bound_report(name: str, **inputs: Any) -> BoundReport:
    """Evaluate one named bound into a BoundReport. Precondition failures
    are reported, not raised; unknown names and missing or non-numeric
    inputs raise ParamError."""
    if name not in _REPORTABLE:
        raise ParamError(f"unknown bound {name!r}; choose from {_REPORTABLE}")
    extras: dict[str, Any] = {}
    try:
        if name == "stability_fair_T":
            k, eps = int(inputs["k"]), float(inputs["epsilon"])
            value = stability_fair_T(k, eps)
            extras["loose_T"] = stability_fair_T_loose(k, eps)
        elif name == "stability_oblivious_beta_max":
            value = stability_oblivious_beta_max(int(inputs["k"]))
        elif name == "stability_adaptive_params":
            params = stability_adaptive_params(int(inputs["k"]), int(inputs["beta"]))
            value = params.beta_max
            extras.update(params._asdict())
        elif name == "geocast_lb":
            value = geocast_lb(str(inputs["kind"]), int(inputs["n"]), int(inputs["alpha"]))
        elif name == "ub_budget":
            value = ub_budget(int(inputs["n"]), int(inputs["alpha"]), int(inputs["beta"]))
        else:
            value = chernoff(str(inputs["kind"]), float(inputs["mu"]), float(inputs["phi_or_r"]))
    except KeyError as exc:
        raise ParamError(f"bound {name!r} is missing input {exc.args[0]!r}") from exc
    except ParamError as exc:
        return BoundReport(
            name=name,
            inputs=dict(inputs),
            value=math.nan,
            preconditions_ok=False,
            violated=(str(exc),),
            extras=extras,
        )
    return BoundReport(name=name, inputs=dict(inputs), value=float(value),
                       preconditions_ok=True, extras=extras)
