"""Finite-sample error bounds for the offline change-point estimators.

Every bound has the shape ``beta = min(1, 2 * min(series, chernoff_term))``.
:class:`BoundReport` keeps the two raw terms (without the factor 2) as
``bound_a`` and ``bound_b``. Here

    series = sum_{i=1}^{i*} exp(-2^(i-1) * alpha * C^2 / s^2),
    i* = max(1, ceil(log2((n - 1) / alpha))).

The non-private bound uses the sensitivity ``s`` (projective distance of the
pre/post-change pmfs), ``C = min(KL(p0||p1), KL(p1||p0))`` and the Chernoff
term ``exp(-alpha * I_ch)``. The private bounds replace ``(s, C)`` by
contracted constants and the Chernoff term by ``(1 - C'/2)^(alpha/2)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

from .divergence import (
    DistLike,
    as_distribution,
    chernoff_information,
    jeffreys_renyi,
    kl_divergence,
    tv_distance,
)


@dataclass(frozen=True)
class BoundInputs:
    n: int
    alpha: float
    s: float
    C: float
    ich: float = 0.0
    epsilon: Optional[float] = None
    q: Optional[int] = None
    dtv: Optional[float] = None
    s_tau_gap: Optional[float] = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not 1 <= self.alpha <= self.n:
            raise ValueError(f"alpha must lie in [1, n], got {self.alpha}")
        if self.s < 0 or self.C < 0 or self.ich < 0:
            raise ValueError("s, C and I_ch must be non-negative")

    def with_alpha(self, alpha: float) -> "BoundInputs":
        d = asdict(self)
        d["alpha"] = alpha
        return BoundInputs(**d)


@dataclass(frozen=True)
class BoundReport:
    bound_a: float
    bound_a_closed: float
    bound_b: float
    beta: float
    regime: str
    constants: dict

    def as_row(self) -> dict:
        return {"bound_a": self.bound_a, "bound_b": self.bound_b, "beta": self.beta}


def sensitivity(p0: DistLike, p1: DistLike) -> float:
    """Range of the per-symbol log-likelihood ratio (``inf`` off mutual support)."""
    return jeffreys_renyi(math.inf, p0, p1)


def min_kl(p0: DistLike, p1: DistLike) -> float:
    return min(kl_divergence(p0, p1), kl_divergence(p1, p0))


def i_star(n: int, alpha: float) -> int:
    return max(1, math.ceil(math.log2((n - 1) / alpha)))


def _exponent_rate(C: float, s: float) -> float:
    """C^2 / s^2 with the conventions s = inf -> 0 and s = 0 -> 0."""
    if not math.isfinite(s) or s <= 0:
        return 0.0
    return (C / s) ** 2


def series_term(n: int, alpha: float, C: float, s: float) -> float:
    """``sum_{i=1}^{i*} exp(-2^(i-1) alpha C^2/s^2)`` (not doubled, not clipped)."""
    if not math.isfinite(s) or s <= 0:
        # vacuous: each summand is treated as 1
        return float(i_star(n, alpha))
    rate = alpha * _exponent_rate(C, s)
    return math.fsum(math.exp(-(2.0 ** (i - 1)) * rate) for i in range(1, i_star(n, alpha) + 1))


def geometric_closed(n: int, alpha: float, C: float, s: float) -> float:
    """``t (1 - t^M) / (1 - t)`` with ``t = exp(-alpha C^2/s^2)``, ``M = floor((n-1)/alpha)``.

    ``M`` is kept at least 1 so the relaxation never drops below the
    one-term series. Returns ``inf`` when ``t >= 1`` (vacuous).
    """
    if not math.isfinite(s) or s <= 0:
        return math.inf
    t = math.exp(-alpha * _exponent_rate(C, s))
    if t >= 1.0:
        return math.inf
    m = max(1, math.floor((n - 1) / alpha))
    return t * (1.0 - t**m) / (1.0 - t)


def _report(series: float, closed: float, chern: float, constants: dict) -> BoundReport:
    # bound_a / bound_b are the raw terms; the factor 2 enters beta only
    beta = min(1.0, 2.0 * min(series, chern))
    regime = "A" if series <= chern else "B"
    if beta >= 1.0:
        regime = "vacuous"
    return BoundReport(
        bound_a=series,
        bound_a_closed=closed,
        bound_b=chern,
        beta=max(0.0, beta),
        regime=regime,
        constants=constants,
    )


def theorem_npcpd(inp: BoundInputs) -> BoundReport:
    """Non-private bound ``min(1, 2 min(series(C, s), exp(-alpha I_ch)))``."""
    series = series_term(inp.n, inp.alpha, inp.C, inp.s)
    closed = geometric_closed(inp.n, inp.alpha, inp.C, inp.s)
    chern = math.exp(-inp.alpha * inp.ich)
    return _report(series, closed, chern, {"s": inp.s, "C": inp.C, "ich": inp.ich})


def corollary_npcpd_closed(inp: BoundInputs) -> float:
    """Closed-form relaxation of :func:`theorem_npcpd`; 1 when ``t >= 1``."""
    closed = geometric_closed(inp.n, inp.alpha, inp.C, inp.s)
    if not math.isfinite(closed):
        return 1.0
    return 2.0 * min(closed, math.exp(-inp.alpha * inp.ich))


def _require(inp: BoundInputs, *names: str) -> None:
    missing = [nm for nm in names if getattr(inp, nm) is None]
    if missing:
        raise ValueError(f"bound needs {', '.join(missing)}")


def contracted_sensitivity(eps: float, s: float) -> float:
    """``min(2 eps, tanh(eps/2) s)``; stays ``2 eps`` when ``s`` is infinite."""
    th = math.tanh(eps / 2.0)
    return min(2.0 * eps, th * s) if math.isfinite(s) else 2.0 * eps


def theorem_rrcpd(inp: BoundInputs) -> BoundReport:
    """Bound for the randomized-response estimator.

    ``s_r = min(2 eps, tanh(eps/2) s)`` and
    ``C_r = 2 ((e^eps - 1)/(e^eps + q - 1))^2 d_TV^2``.
    """
    _require(inp, "epsilon", "q", "dtv")
    eps, q = inp.epsilon, inp.q
    # (e^eps - 1)/(e^eps + q - 1) rewritten to avoid overflow
    contraction = (1.0 - math.exp(-eps)) / (1.0 + (q - 1) * math.exp(-eps))
    s_r = contracted_sensitivity(eps, inp.s)
    c_r = 2.0 * contraction**2 * inp.dtv**2
    series = series_term(inp.n, inp.alpha, c_r, s_r)
    closed = geometric_closed(inp.n, inp.alpha, c_r, s_r)
    chern = max(0.0, 1.0 - c_r / 2.0) ** (inp.alpha / 2.0)
    return _report(series, closed, chern, {"s_r": s_r, "C_r": c_r})


def theorem_bmcpd(inp: BoundInputs, squared_gap: bool = False) -> BoundReport:
    """Bound for the binary-mechanism estimator.

    ``s_b = min(2 eps, tanh(eps/2) s)``, ``C_b = 2 tanh^2(eps/2) d_TV^2`` and
    ``C~_b = 2 tanh^2(eps/2) * gap`` where ``gap`` is the summed
    ``|p0(x) - p1(x)|`` over ``S_tau*``. ``squared_gap=True`` squares the gap
    instead; it is off by default and only meant for sensitivity studies.
    """
    _require(inp, "epsilon", "dtv", "s_tau_gap")
    eps = inp.epsilon
    th2 = math.tanh(eps / 2.0) ** 2
    s_b = contracted_sensitivity(eps, inp.s)
    c_b = 2.0 * th2 * inp.dtv**2
    gap = inp.s_tau_gap**2 if squared_gap else inp.s_tau_gap
    c_tilde = 2.0 * th2 * gap
    series = series_term(inp.n, inp.alpha, c_tilde, s_b)
    closed = geometric_closed(inp.n, inp.alpha, c_tilde, s_b)
    chern = max(0.0, 1.0 - c_b / 2.0) ** (inp.alpha / 2.0)
    return _report(series, closed, chern, {"s_b": s_b, "C_b": c_b, "C_tilde_b": c_tilde})


def privacy_cost_factor(eps: float) -> float:
    if not eps > 0:
        raise ValueError("privacy budget must be positive")
    return math.tanh(eps / 2.0) ** 2


def beta_floor(trials: int) -> float:
    return 1.0 / (2.0 * trials)


def error_exponent(alpha: float, beta: float, trials: Optional[int] = None) -> float:
    """``-ln(beta / 2) / alpha``; with ``trials`` given, beta is floored at 1/(2 trials)."""
    if alpha < 1:
        raise ValueError("alpha must be at least 1")
    if trials is not None:
        beta = max(beta, beta_floor(trials))
    if not beta > 0:
        raise ValueError("beta must be positive (pass trials to floor empirical zeros)")
    return -math.log(beta / 2.0) / alpha


def s_tau_gap(p0: DistLike, p1: DistLike, in_s) -> float:
    a, b = as_distribution(p0).mass, as_distribution(p1).mass
    return float(sum(abs(a[x] - b[x]) for x, m in enumerate(in_s) if m))


def inputs_for(p0: DistLike, p1: DistLike, n: int, alpha: float, epsilon=None, in_s=None) -> BoundInputs:
    """Assemble :class:`BoundInputs` from a pair of pmfs."""
    p0, p1 = as_distribution(p0), as_distribution(p1)
    return BoundInputs(
        n=n,
        alpha=alpha,
        s=sensitivity(p0, p1),
        C=min_kl(p0, p1),
        ich=chernoff_information(p0, p1).value,
        epsilon=epsilon,
        q=p0.alphabet_size,
        dtv=tv_distance(p0, p1),
        s_tau_gap=None if in_s is None else s_tau_gap(p0, p1, in_s),
    )
