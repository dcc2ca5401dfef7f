"""Divergence measures between probability mass functions on a finite alphabet.

All logarithms are natural. Bernoulli convention: ``bernoulli(theta)`` is the
pmf ``[1 - theta, theta]`` over ``{0, 1}``.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence, Union

import numpy as np

_SUM_TOL = 1e-12
_RENORM_TOL = 1e-9

# golden ratio conjugate, (sqrt(5) - 1) / 2
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class IncompatibleSupportError(ValueError):
    """Two distributions (or a distribution and a channel) disagree in size."""


class Distribution:
    """Immutable probability mass function over ``{0, ..., q-1}``.

    Masses within 1e-9 of summing to one are renormalized; anything further
    off is rejected.
    """

    __slots__ = ("_mass",)

    def __init__(self, mass: Sequence[float] | np.ndarray):
        arr = np.array(mass, dtype=float).reshape(-1)
        if arr.size < 1:
            raise ValueError("distribution needs at least one atom")
        if not np.all(np.isfinite(arr)):
            raise ValueError("distribution masses must be finite")
        if np.any(arr < 0.0) or np.any(arr > 1.0 + _RENORM_TOL):
            raise ValueError(f"masses must lie in [0, 1], got {arr.tolist()}")
        total = float(arr.sum())
        if abs(total - 1.0) > _RENORM_TOL:
            raise ValueError(f"masses sum to {total!r}, not 1")
        if abs(total - 1.0) > _SUM_TOL:
            arr = arr / total
        arr = np.clip(arr, 0.0, 1.0)
        arr.setflags(write=False)
        self._mass = arr

    @property
    def mass(self) -> np.ndarray:
        return self._mass

    @property
    def alphabet_size(self) -> int:
        return int(self._mass.size)

    def __len__(self) -> int:
        return self.alphabet_size

    def __getitem__(self, x: int) -> float:
        return float(self._mass[x])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.alphabet_size == other.alphabet_size and bool(
            np.array_equal(self._mass, other._mass)
        )

    def __hash__(self) -> int:
        return hash(self._mass.tobytes())

    def __repr__(self) -> str:
        return f"Distribution({self._mass.tolist()})"

    def tolist(self) -> list[float]:
        return self._mass.tolist()


DistLike = Union[Distribution, Sequence[float], np.ndarray]


def as_distribution(p: DistLike) -> Distribution:
    return p if isinstance(p, Distribution) else Distribution(p)


def bernoulli(theta: float) -> Distribution:
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"Bernoulli parameter must be in [0, 1], got {theta}")
    return Distribution([1.0 - theta, theta])


def point_mass(x: int, q: int) -> Distribution:
    m = np.zeros(q)
    m[x] = 1.0
    return Distribution(m)


def _pair(p: DistLike, q: DistLike) -> tuple[np.ndarray, np.ndarray]:
    p, q = as_distribution(p), as_distribution(q)
    if p.alphabet_size != q.alphabet_size:
        raise IncompatibleSupportError(
            f"alphabet sizes differ: {p.alphabet_size} vs {q.alphabet_size}"
        )
    return p.mass, q.mass


def tv_distance(p: DistLike, q: DistLike) -> float:
    a, b = _pair(p, q)
    return float(min(1.0, 0.5 * np.abs(a - b).sum()))


def kl_divergence(p: DistLike, q: DistLike) -> float:
    a, b = _pair(p, q)
    supp = a > 0
    if np.any(b[supp] == 0):
        return math.inf
    val = float(np.sum(a[supp] * (np.log(a[supp]) - np.log(b[supp]))))
    return max(val, 0.0)


def _log_bhattacharyya_sum(a: np.ndarray, b: np.ndarray, lam: float) -> float:
    """ln sum_x a(x)^lam b(x)^(1-lam) over the common support.

    Atoms where either mass vanishes contribute zero (0^lam * y^(1-lam) := 0).
    """
    both = (a > 0) & (b > 0)
    if not np.any(both):
        return -math.inf
    logs = lam * np.log(a[both]) + (1.0 - lam) * np.log(b[both])
    top = logs.max()
    return float(top + math.log(np.exp(logs - top).sum()))


def renyi_divergence(rho: float, p: DistLike, q: DistLike) -> float:
    """Rényi divergence D_rho(p || q) for rho in [1, inf].

    ``rho == 1`` is the KL divergence and ``rho == inf`` is
    ``ln max_{x: p(x) > 0} p(x) / q(x)``.
    """
    if math.isnan(rho) or rho < 1.0:
        raise ValueError(f"Rényi order must be >= 1, got {rho}")
    a, b = _pair(p, q)
    if rho == 1.0:
        return kl_divergence(a, b)
    supp = a > 0
    if np.any(b[supp] == 0):
        return math.inf
    la, lb = np.log(a[supp]), np.log(b[supp])
    if math.isinf(rho):
        return max(float(np.max(la - lb)), 0.0)
    logs = rho * la + (1.0 - rho) * lb
    top = logs.max()
    val = (top + math.log(np.exp(logs - top).sum())) / (rho - 1.0)
    return max(float(val), 0.0)


def jeffreys_renyi(rho: float, p: DistLike, q: DistLike) -> float:
    """Symmetrized Rényi divergence D_rho(p||q) + D_rho(q||p).

    At ``rho = inf`` this is the projective distance.
    """
    return renyi_divergence(rho, p, q) + renyi_divergence(rho, q, p)


def f_lambda_divergence(lam: float, p: DistLike, q: DistLike) -> float:
    """f-divergence with f(t) = 1 - t^lam, i.e. 1 - sum p^lam q^(1-lam)."""
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    a, b = _pair(p, q)
    return 1.0 - math.exp(_log_bhattacharyya_sum(a, b, lam))


def golden_section_min(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200):
    """Minimize a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``.

    The endpoints are compared against the interior estimate so that
    boundary minima of monotone functions are reported exactly.
    """
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol and it < max_iter:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
        it += 1
    x, fx = (c, fc) if fc <= fd else (d, fd)
    for edge in (lo, hi):
        fe = f(edge)
        if fe < fx:
            x, fx = edge, fe
    return x, fx


class ChernoffResult(NamedTuple):
    value: float
    lam: float


_LAM_LO = 1e-9
_LAM_HI = 1.0 - 1e-9


def _psi(a: np.ndarray, b: np.ndarray):
    """``lambda -> ln sum a^lambda b^(1-lambda)`` with the logs precomputed."""
    both = (a > 0) & (b > 0)
    lb = np.log(b[both])
    d = np.log(a[both]) - lb
    if lb.size <= 32:
        # scalar loop beats numpy call overhead on small alphabets
        lb_l, d_l = lb.tolist(), d.tolist()
        exp, log = math.exp, math.log

        def psi(lam: float) -> float:
            logs = [y + lam * z for y, z in zip(lb_l, d_l)]
            top = max(logs)
            return top + log(sum(exp(v - top) for v in logs))

        return psi

    def psi_np(lam: float) -> float:
        logs = lb + lam * d
        top = logs.max()
        return float(top + math.log(np.exp(logs - top).sum()))

    return psi_np


def chernoff_information(p: DistLike, q: DistLike) -> ChernoffResult:
    """Chernoff information -min_lambda ln sum p^lambda q^(1-lambda).

    Returns the value together with the minimizing lambda. Disjoint supports
    give ``inf`` (with ``lam = 0.5``).
    """
    a, b = _pair(p, q)
    if not np.any((a > 0) & (b > 0)):
        return ChernoffResult(math.inf, 0.5)
    lam, psi = golden_section_min(_psi(a, b), _LAM_LO, _LAM_HI)
    return ChernoffResult(max(-psi, 0.0), lam)
