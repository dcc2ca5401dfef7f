"""Offline change-point estimators based on the log-likelihood ratio scan.

``detect`` is the non-private estimator: it scores every candidate k by the
suffix sum ``l(D, k) = sum_{i >= k} ln(p1(x_i) / p0(x_i))`` and returns the
smallest maximizing k (1-based). ``rr_cpd`` and ``bm_cpd`` privatize every
symbol first, through randomized response or the binary mechanism, and run
the same scan against the induced output distributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .divergence import DistLike, Distribution, IncompatibleSupportError, as_distribution
from .mechanisms import (
    Channel,
    pushforward,
    quantized_rr,
    rr_channel,
    select_tau_star,
)


class InvalidDataError(ValueError):
    """An observed symbol has zero probability under both hypotheses."""


class IndeterminateScoreError(ValueError):
    """A suffix mixes +inf and -inf log-likelihood ratios."""


@dataclass(frozen=True)
class Dataset:
    symbols: np.ndarray
    alphabet_size: int
    true_change_point: Optional[int] = None

    def __post_init__(self):
        arr = np.asarray(self.symbols, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "symbols", arr)
        arr.setflags(write=False)
        if arr.size < 2:
            raise ValueError("a dataset needs at least two symbols")
        if self.alphabet_size < 1:
            raise ValueError("alphabet size must be positive")
        if arr.min() < 0 or arr.max() >= self.alphabet_size:
            raise ValueError("symbols must lie in [0, alphabet_size)")
        k = self.true_change_point
        if k is not None and not 1 < k <= arr.size:
            raise ValueError(f"change point must lie in (1, n], got {k}")

    @property
    def n(self) -> int:
        return int(self.symbols.size)


@dataclass(frozen=True)
class DetectionResult:
    k_hat: int
    scores: np.ndarray = field(repr=False)
    privatized: Optional[Dataset] = field(default=None, repr=False)
    channel: Optional[Channel] = field(default=None, repr=False)


def _log_ratio_table(p0: Distribution, p1: Distribution):
    """Per-symbol ln(p1/p0) split into a finite part and +/-inf indicators."""
    a, b = p0.mass, p1.mass
    pos = (a == 0) & (b > 0)
    neg = (b == 0) & (a > 0)
    dead = (a == 0) & (b == 0)
    fin = np.zeros_like(a)
    ok = (a > 0) & (b > 0)
    fin[ok] = np.log(b[ok]) - np.log(a[ok])
    return fin, pos, neg, dead


def _suffix_sum(x: np.ndarray) -> np.ndarray:
    return np.cumsum(x[::-1])[::-1]


def glrt_scores(d: Dataset, p0: DistLike, p1: DistLike) -> np.ndarray:
    """Score vector ``l(D, k)`` for k = 1..n (index k-1), via one suffix scan.

    Infinite log-ratios are tracked as counts so that an infinite term of one
    sign absorbs finite ones, while both signs in one suffix raise
    :class:`IndeterminateScoreError`.
    """
    p0, p1 = as_distribution(p0), as_distribution(p1)
    if p0.alphabet_size != p1.alphabet_size:
        raise IncompatibleSupportError("p0 and p1 have different alphabets")
    if d.alphabet_size > p0.alphabet_size:
        raise IncompatibleSupportError("dataset alphabet exceeds the distributions'")
    fin, pos, neg, dead = _log_ratio_table(p0, p1)
    x = d.symbols
    if np.any(dead[x]):
        bad = int(x[np.argmax(dead[x])])
        raise InvalidDataError(f"symbol {bad} has zero mass under both p0 and p1")
    scores = _suffix_sum(fin[x])
    if not (np.any(pos[x]) or np.any(neg[x])):
        return scores
    n_pos = _suffix_sum(pos[x].astype(np.int64))
    n_neg = _suffix_sum(neg[x].astype(np.int64))
    if np.any((n_pos > 0) & (n_neg > 0)):
        raise IndeterminateScoreError("suffix contains both +inf and -inf log-ratios")
    scores = scores.copy()
    scores[n_pos > 0] = math.inf
    scores[n_neg > 0] = -math.inf
    return scores


def argmax_first(scores: np.ndarray) -> int:
    """1-based index of the first maximum."""
    return int(np.argmax(scores)) + 1


def detect(d: Dataset, p0: DistLike, p1: DistLike) -> DetectionResult:
    scores = glrt_scores(d, p0, p1)
    return DetectionResult(k_hat=argmax_first(scores), scores=scores)


def detect_privatized(
    d: Dataset, p0: DistLike, p1: DistLike, w: Channel, rng: np.random.Generator
) -> DetectionResult:
    """Privatize each symbol through ``w`` and scan against the pushed-forward pmfs.

    Consumes exactly ``n`` uniforms from ``rng``.
    """
    q0, q1 = pushforward(p0, w), pushforward(p1, w)
    y = w.sample(d.symbols, rng.random(d.n))
    dt = Dataset(y, w.output_size, d.true_change_point)
    res = detect(dt, q0, q1)
    return DetectionResult(k_hat=res.k_hat, scores=res.scores, privatized=dt, channel=w)


def rr_cpd(
    d: Dataset, p0: DistLike, p1: DistLike, eps: float, rng: np.random.Generator
) -> DetectionResult:
    """Randomized-response estimator."""
    p0 = as_distribution(p0)
    return detect_privatized(d, p0, p1, rr_channel(p0.alphabet_size, eps), rng)


def bm_cpd(
    d: Dataset, p0: DistLike, p1: DistLike, eps: float, rng: np.random.Generator
) -> DetectionResult:
    """Binary-mechanism estimator with the Chernoff-optimal threshold."""
    sel = select_tau_star(p0, p1, eps)
    return detect_privatized(d, p0, p1, quantized_rr(sel.quantizer, eps), rng)

