"""Local differential privacy mechanisms on finite alphabets.

A :class:`Channel` is a row-stochastic matrix ``rows[x, y] = W(y | x)``.
Randomized response keeps the input symbol with probability
``e^eps / (e^eps + q - 1)``; the binary mechanism first thresholds the
likelihood ratio ``p0(x) / p1(x)`` and then applies binary randomized response.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .divergence import (
    DistLike,
    Distribution,
    IncompatibleSupportError,
    as_distribution,
    chernoff_information,
    jeffreys_renyi,
)

_ROW_TOL = 1e-12
_LDP_SLACK = 1e-12


class Channel:
    """Row-stochastic transition matrix from ``input_size`` to ``output_size`` symbols."""

    __slots__ = ("_rows", "_cdf")

    def __init__(self, rows: Sequence[Sequence[float]] | np.ndarray):
        arr = np.array(rows, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("channel rows must form a non-empty 2-D matrix")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1 + _ROW_TOL):
            raise ValueError("channel entries must lie in [0, 1]")
        sums = arr.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValueError(f"channel rows must sum to 1, got {sums.tolist()}")
        bad = np.abs(sums - 1.0) > _ROW_TOL
        if np.any(bad):
            arr[bad] /= sums[bad, None]
        arr = np.clip(arr, 0.0, 1.0)
        arr.setflags(write=False)
        self._rows = arr
        cdf = np.cumsum(arr, axis=1)
        cdf[:, -1] = 1.0
        cdf.setflags(write=False)
        self._cdf = cdf

    @property
    def rows(self) -> np.ndarray:
        return self._rows

    @property
    def input_size(self) -> int:
        return int(self._rows.shape[0])

    @property
    def output_size(self) -> int:
        return int(self._rows.shape[1])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Channel):
            return NotImplemented
        return bool(np.array_equal(self._rows, other._rows))

    def __repr__(self) -> str:
        return f"Channel({self._rows.tolist()})"

    def compose(self, other: "Channel") -> "Channel":
        """Channel that applies ``self`` and then ``other``."""
        if self.output_size != other.input_size:
            raise IncompatibleSupportError("channel dimensions do not chain")
        return Channel(self._rows @ other._rows)

    def sample(self, symbols: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
        """Pass each symbol through the channel by inverse CDF on its row.

        Exactly one uniform variate per symbol is consumed, in order.
        """
        symbols = np.asarray(symbols, dtype=np.intp)
        cdf = self._cdf[symbols]
        out = (np.asarray(uniforms)[:, None] >= cdf).sum(axis=1)
        return np.minimum(out, self.output_size - 1)

    def to_json(self, epsilon: float | None = None) -> str:
        return json.dumps({"rows": self._rows.tolist(), "epsilon": epsilon})

    @classmethod
    def from_json(cls, text: str) -> tuple["Channel", float | None]:
        obj = json.loads(text)
        if "rows" not in obj:
            raise ValueError("channel JSON needs a 'rows' field")
        eps = obj.get("epsilon")
        return cls(obj["rows"]), (None if eps is None else float(eps))


@dataclass(frozen=True)
class SymmetricChannelParams:
    """q-ary symmetric channel: ``v`` on the diagonal, ``u`` elsewhere."""

    q: int
    u: float
    v: float

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("alphabet size must be positive")
        if not (0 <= self.u <= 1 and 0 <= self.v <= 1):
            raise ValueError("u and v must lie in [0, 1]")
        if abs(self.v - (1.0 - (self.q - 1) * self.u)) > _ROW_TOL:
            raise ValueError("symmetric channel needs v = 1 - (q - 1) u")

    @classmethod
    def from_u(cls, q: int, u: float) -> "SymmetricChannelParams":
        return cls(q, u, 1.0 - (q - 1) * u)

    @classmethod
    def randomized_response(cls, q: int, eps: float) -> "SymmetricChannelParams":
        _check_eps(eps)
        if q < 2:
            raise ValueError("randomized response needs q >= 2")
        # 1 / (e^eps + q - 1) written to stay finite for huge eps
        u = math.exp(-eps) / (1.0 + (q - 1) * math.exp(-eps))
        return cls(q, u, 1.0 - (q - 1) * u)

    def channel(self) -> Channel:
        rows = np.full((self.q, self.q), self.u)
        np.fill_diagonal(rows, self.v)
        return Channel(rows)


def _check_eps(eps: float) -> None:
    if not (eps > 0) or math.isnan(eps):
        raise ValueError(f"privacy budget must be positive, got {eps}")


def rr_channel(q: int, eps: float) -> Channel:
    """q-ary randomized response at budget ``eps``."""
    return SymmetricChannelParams.randomized_response(q, eps).channel()


def binary_rr_rows(eps: float) -> np.ndarray:
    _check_eps(eps)
    keep = 1.0 / (1.0 + math.exp(-eps))
    flip = 1.0 - keep
    return np.array([[keep, flip], [flip, keep]])


@dataclass(frozen=True)
class Quantizer:
    """Likelihood-ratio threshold: ``S_tau = {x : p0(x) >= tau * p1(x)}``.

    Members of ``S_tau`` map to bit 0, the rest to bit 1.
    """

    tau: float
    in_s: tuple[bool, ...]

    @property
    def s_tau(self) -> tuple[bool, ...]:
        return self.in_s

    @property
    def bits(self) -> np.ndarray:
        return np.where(np.array(self.in_s, dtype=bool), 0, 1)

    @property
    def size(self) -> int:
        return sum(self.in_s)

    def channel(self) -> Channel:
        bits = self.bits
        rows = np.zeros((bits.size, 2))
        rows[np.arange(bits.size), bits] = 1.0
        return Channel(rows)


def _in_s(a: np.ndarray, b: np.ndarray, tau: float) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        member = a >= tau * b
    # p1(x) = 0: ratio is +inf when p0(x) > 0; empty atoms go to S_tau
    member = np.where(b == 0, True, member)
    return member


def quantizer(p0: DistLike, p1: DistLike, tau: float) -> Quantizer:
    p0, p1 = as_distribution(p0), as_distribution(p1)
    if p0.alphabet_size != p1.alphabet_size:
        raise IncompatibleSupportError("p0 and p1 have different alphabets")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    member = _in_s(p0.mass, p1.mass, tau)
    return Quantizer(float(tau), tuple(bool(m) for m in member))


def quantized_rr(z: Quantizer, eps: float) -> Channel:
    return Channel(z.channel().rows @ binary_rr_rows(eps))


def binary_mechanism(p0: DistLike, p1: DistLike, tau: float, eps: float) -> Channel:
    """Quantize with ``S_tau`` and privatize the bit with binary randomized response."""
    return quantized_rr(quantizer(p0, p1, tau), eps)


def pushforward(p: DistLike, w: Channel) -> Distribution:
    p = as_distribution(p)
    if p.alphabet_size != w.input_size:
        raise IncompatibleSupportError(
            f"distribution has {p.alphabet_size} atoms, channel expects {w.input_size}"
        )
    out = p.mass @ w.rows
    return Distribution(np.clip(out, 0.0, 1.0))


@dataclass(frozen=True)
class TauSelection:
    tau_star: float
    quantizer: Quantizer
    ich: float


def _tau_candidates(a: np.ndarray, b: np.ndarray) -> list[float]:
    # atoms with p0(x) = 0 < p1(x) never enter S_tau for tau > 0, so only the
    # positive ratios (including +inf where p1(x) = 0) are breakpoints
    ratios = set()
    for x in np.flatnonzero(a > 0):
        ratios.add(math.inf if b[x] == 0 else float(a[x] / b[x]))
    return sorted(ratios)


def select_tau_star(p0: DistLike, p1: DistLike, eps: float) -> TauSelection:
    """Threshold maximizing the post-privatization Chernoff information.

    The objective only changes when ``tau`` crosses a likelihood ratio, so
    every distinct partition is enumerated. Ties prefer the smaller ``S_tau``
    and then the smaller ``tau``.
    """
    p0, p1 = as_distribution(p0), as_distribution(p1)
    if p0.alphabet_size != p1.alphabet_size:
        raise IncompatibleSupportError("p0 and p1 have different alphabets")
    if np.array_equal(p0.mass, p1.mass):
        raise ValueError("p0 == p1: no informative quantizer exists")
    _check_eps(eps)
    rr = binary_rr_rows(eps)
    best: tuple | None = None
    for tau in _tau_candidates(p0.mass, p1.mass):
        z = quantizer(p0, p1, tau) if math.isfinite(tau) else _quantizer_inf(p0, p1)
        zr = z.channel().rows @ rr
        ich = chernoff_information(p0.mass @ zr, p1.mass @ zr).value
        key = (ich, -z.size, -tau)
        if best is None or _better(key, best[0]):
            best = (key, z, ich)
    assert best is not None
    _, z, ich = best
    return TauSelection(z.tau, z, ich)


def _quantizer_inf(p0: Distribution, p1: Distribution) -> Quantizer:
    member = (p1.mass == 0)
    return Quantizer(math.inf, tuple(bool(m) for m in member))


def _better(key: tuple, best: tuple) -> bool:
    ich, neg_size, neg_tau = key
    bich, bneg_size, bneg_tau = best
    tol = 1e-12 * max(1.0, abs(bich))
    if ich > bich + tol:
        return True
    if ich < bich - tol:
        return False
    return (neg_size, neg_tau) > (bneg_size, bneg_tau)


def verify_ldp(w: Channel, eps: float) -> bool:
    """True iff ``W(y|x) <= e^eps W(y|x') + 1e-12`` for every y, x, x'."""
    rows = w.rows
    col_max = rows.max(axis=0)
    col_min = rows.min(axis=0)
    return bool(np.all(col_max <= math.exp(eps) * col_min + _LDP_SLACK))


def ldp_divergence_cap_check(p0: DistLike, p1: DistLike, w: Channel, eps: float) -> bool:
    """Projective distance after an eps-LDP channel is at most ``2 eps``."""
    q0, q1 = pushforward(p0, w), pushforward(p1, w)
    return jeffreys_renyi(math.inf, q0, q1) <= 2.0 * eps + 1e-9
