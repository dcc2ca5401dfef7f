"""Strong data-processing (contraction) coefficients of finite channels.

Closed forms cover q-ary symmetric channels. For arbitrary channels the
supremum over input pairs is searched numerically over pairs supported on
two atoms, which is where it is attained for Rényi divergences of order
``rho >= 1`` and for the order-infinity Jeffreys-Rényi divergence. A
full-simplex random search is provided as an independent oracle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .divergence import Distribution
from .mechanisms import Channel, SymmetricChannelParams

_MIN_INPUT_DIV = 1e-12
# output divergences below this are float noise from the matrix product
_OUTPUT_NOISE = 1e-15


@dataclass(frozen=True)
class SearchParams:
    delta: float = 1e-4
    resolution: int = 200
    rounds: int = 3
    shrink: float = 10.0


@dataclass(frozen=True)
class SdpiEstimate:
    eta: float
    achieved_ratio: float
    is_closed_form: bool
    witness_p0: Distribution | None = None
    witness_p1: Distribution | None = None
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "achieved_ratio": self.achieved_ratio,
            "is_closed_form": self.is_closed_form,
            "witness_p0": None if self.witness_p0 is None else self.witness_p0.tolist(),
            "witness_p1": None if self.witness_p1 is None else self.witness_p1.tolist(),
            "degenerate": self.degenerate,
        }


def _closed(eta: float) -> SdpiEstimate:
    return SdpiEstimate(eta=eta, achieved_ratio=eta, is_closed_form=True)


def eta_tv_symmetric(params: SymmetricChannelParams) -> SdpiEstimate:
    """Dobrushin coefficient ``|v - u|``."""
    return _closed(abs(params.v - params.u))


def eta_renyi_inf_symmetric(params: SymmetricChannelParams) -> SdpiEstimate:
    """Order-infinity Rényi coefficient ``|v - u| / max(u, v)``."""
    return _closed(abs(params.v - params.u) / max(params.u, params.v))


def eta_jeffreys_inf_symmetric(params: SymmetricChannelParams) -> SdpiEstimate:
    """Order-infinity Jeffreys-Rényi coefficient ``|v - u| / (v + u)``."""
    return _closed(abs(params.v - params.u) / (params.v + params.u))


# -- batched divergences -----------------------------------------------------


def _renyi_batch(rho: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise D_rho(a || b) for stacked pmfs ``a``, ``b`` of shape (N, k)."""
    supp = a > 0
    violation = np.any(supp & (b <= 0), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        la = np.where(supp, np.log(np.where(supp, a, 1.0)), 0.0)
        lb = np.where(b > 0, np.log(np.where(b > 0, b, 1.0)), 0.0)
        if rho == 1.0:
            out = np.sum(np.where(supp, a * (la - lb), 0.0), axis=1)
        elif math.isinf(rho):
            out = np.max(np.where(supp, la - lb, -np.inf), axis=1)
        else:
            logs = np.where(supp, rho * la + (1.0 - rho) * lb, -np.inf)
            top = np.max(logs, axis=1)
            out = (top + np.log(np.sum(np.exp(logs - top[:, None]), axis=1))) / (rho - 1.0)
    out = np.maximum(out, 0.0)
    out[violation] = np.inf
    return out


def _div_batch(rho: float, jeffreys: bool, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = _renyi_batch(rho, a, b)
    if jeffreys:
        d = d + _renyi_batch(rho, b, a)
    return d


def _ratios(rho, jeffreys, w: np.ndarray, p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    din = _div_batch(rho, jeffreys, p0, p1)
    dout = _div_batch(rho, jeffreys, p0 @ w, p1 @ w)
    dout = np.where(dout < _OUTPUT_NOISE, 0.0, dout)
    ok = np.isfinite(din) & (din >= _MIN_INPUT_DIV)
    r = np.zeros_like(din)
    r[ok] = dout[ok] / din[ok]
    return r


def _check_order(rho: float, jeffreys: bool) -> None:
    if math.isnan(rho) or rho < 1.0:
        raise ValueError(f"Rényi order must be >= 1, got {rho}")
    if jeffreys and not math.isinf(rho):
        raise ValueError("Jeffreys search is only supported at rho = inf")


def _pair_inputs(k: int, i: int, j: int, a: np.ndarray, b: np.ndarray):
    p0 = np.zeros((a.size, k))
    p1 = np.zeros((a.size, k))
    p0[:, i], p0[:, j] = a, 1.0 - a
    p1[:, i], p1[:, j] = b, 1.0 - b
    return p0, p1


def eta_numeric(
    w: Channel,
    rho: float,
    jeffreys: bool = False,
    search: SearchParams = SearchParams(),
) -> SdpiEstimate:
    """Lower estimate of the contraction coefficient over two-atom input pairs.

    A ``resolution x resolution`` grid over ``(p0(x1), p1(x1))`` in
    ``[delta, 1 - delta]``, plus the endpoints 0 and 1, is scanned for every
    atom pair. The best point of each pair is then polished by coordinate
    descent with a step that shrinks by ``search.shrink`` per round.
    """
    _check_order(rho, jeffreys)
    rows = w.rows
    k = w.input_size
    lo, hi = search.delta, 1.0 - search.delta
    # the exact endpoints are kept too: suprema often sit on a degenerate
    # input, and the ratio there is well defined whenever the input
    # divergence is finite
    grid = np.concatenate([[0.0], np.linspace(lo, hi, search.resolution), [1.0]])
    ga, gb = np.meshgrid(grid, grid, indexing="ij")
    ga, gb = ga.ravel(), gb.ravel()
    step0 = (hi - lo) / max(search.resolution - 1, 1)

    def ratio_at(i, j, a, b):
        p0, p1 = _pair_inputs(k, i, j, np.atleast_1d(a), np.atleast_1d(b))
        return _ratios(rho, jeffreys, rows, p0, p1)

    best = (0.0, -1, 0, 0, 0.5, 0.5)
    for idx, (i, j) in enumerate(itertools.combinations(range(k), 2)):
        r = ratio_at(i, j, ga, gb)
        m = int(np.argmax(r))
        a, b, val = float(ga[m]), float(gb[m]), float(r[m])
        if val <= 0.0:
            continue
        step = step0
        offsets = np.linspace(-1.0, 1.0, 21)
        for _ in range(search.rounds):
            step /= search.shrink
            for _sweep in range(2):
                ca = np.clip(a + offsets * step * 10, 0.0, 1.0)
                ra = ratio_at(i, j, ca, np.full_like(ca, b))
                ma = int(np.argmax(ra))
                if ra[ma] > val:
                    a, val = float(ca[ma]), float(ra[ma])
                cb = np.clip(b + offsets * step * 10, 0.0, 1.0)
                rb = ratio_at(i, j, np.full_like(cb, a), cb)
                mb = int(np.argmax(rb))
                if rb[mb] > val:
                    b, val = float(cb[mb]), float(rb[mb])
        # strict comparison keeps the lowest atom-pair index on ties
        if val > best[0]:
            best = (val, idx, i, j, a, b)

    val, idx, i, j, a, b = best
    if idx < 0:
        return SdpiEstimate(eta=0.0, achieved_ratio=0.0, is_closed_form=False, degenerate=True)
    p0, p1 = _pair_inputs(k, i, j, np.array([a]), np.array([b]))
    return SdpiEstimate(
        eta=min(val, 1.0),
        achieved_ratio=val,
        is_closed_form=False,
        witness_p0=Distribution(p0[0]),
        witness_p1=Distribution(p1[0]),
    )


def _simplex_grid(k: int, steps: int) -> np.ndarray:
    pts = []
    for comp in itertools.product(range(steps + 1), repeat=k - 1):
        if sum(comp) <= steps:
            pts.append(list(comp) + [steps - sum(comp)])
    return np.array(pts, dtype=float) / steps


def eta_bruteforce_oracle(
    w: Channel,
    rho: float,
    jeffreys: bool = False,
    samples: int = 10_000,
    seed: int = 0,
) -> float:
    """Best divergence ratio over input pairs drawn from the whole simplex.

    Pairs are Dirichlet(1, ..., 1) draws, preceded by all pairs of points on a
    coarse simplex grid. Pairs with an input divergence below 1e-12 or an
    infinite one are skipped.
    """
    _check_order(rho, jeffreys)
    k = w.input_size
    if k > 4:
        raise ValueError("brute-force oracle is limited to input_size <= 4")
    rows = w.rows
    grid = _simplex_grid(k, 4 if k <= 3 else 3)
    gi, gj = np.meshgrid(np.arange(len(grid)), np.arange(len(grid)), indexing="ij")
    mask = gi.ravel() != gj.ravel()
    p0_grid = grid[gi.ravel()[mask]][:samples]
    p1_grid = grid[gj.ravel()[mask]][:samples]
    rest = samples - len(p0_grid)
    rng = np.random.default_rng(seed)
    p0 = np.vstack([p0_grid, rng.dirichlet(np.ones(k), size=rest)])
    p1 = np.vstack([p1_grid, rng.dirichlet(np.ones(k), size=rest)])
    best = 0.0
    for start in range(0, len(p0), 4096):
        r = _ratios(rho, jeffreys, rows, p0[start:start + 4096], p1[start:start + 4096])
        if r.size:
            best = max(best, float(r.max()))
    return best
