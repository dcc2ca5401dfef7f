"""Seeded Monte Carlo harness for accuracy curves and privacy sweeps.

Every trial draws its randomness from two independent counter-based streams
(Philox), one for sampling the dataset and one for privatizing it. The key of
the stream for trial ``t`` and stage ``tag`` is the 128-bit BLAKE2b digest of
the little-endian bytes of ``(master_seed, t)`` followed by the ASCII tag
(``b"data"`` or ``b"privatize"``). Results therefore do not depend on the
order in which trials run or on the number of worker threads.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from scipy import stats

from . import __version__
from .bounds import inputs_for, theorem_bmcpd, theorem_npcpd, theorem_rrcpd
from .bounds import error_exponent, privacy_cost_factor
from .detector import Dataset, argmax_first, glrt_scores
from .divergence import Distribution, as_distribution
from .mechanisms import pushforward, quantized_rr, rr_channel, select_tau_star

MECHANISMS = ("none", "rr", "bm")
THREADS_ENV = "PRIVCPD_THREADS"


# -- distribution families ---------------------------------------------------


@dataclass(frozen=True)
class FamilySpec:
    """Named pmf family, e.g. ``FamilySpec("truncated_poisson", {"lam": 1, "m": 10})``.

    Supported families and parameters: ``bernoulli(theta)``,
    ``binomial(n, p)``, ``truncated_poisson(lam, m)``,
    ``truncated_geometric(p, m)`` and ``explicit(pmf)``. Truncated families
    live on ``{0, ..., m}`` and are renormalized.
    """

    family: str
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, obj: dict) -> "FamilySpec":
        obj = dict(obj)
        fam = obj.pop("family", None)
        if fam is None:
            raise ValueError("family spec needs a 'family' field")
        return cls(fam, obj)

    def to_dict(self) -> dict:
        return {"family": self.family, **self.params}


def _truncate(pmf: np.ndarray) -> Distribution:
    return Distribution(pmf / pmf.sum())


def make_family(spec: FamilySpec) -> Distribution:
    fam, p = spec.family, spec.params
    try:
        if fam == "bernoulli":
            theta = float(p["theta"])
            if not 0 <= theta <= 1:
                raise ValueError("theta must lie in [0, 1]")
            return Distribution([1.0 - theta, theta])
        if fam == "binomial":
            nb, pb = int(p["n"]), float(p["p"])
            if nb < 1 or not 0 <= pb <= 1:
                raise ValueError("binomial needs n >= 1 and p in [0, 1]")
            return _truncate(stats.binom.pmf(np.arange(nb + 1), nb, pb))
        if fam == "truncated_poisson":
            lam, m = float(p["lam"]), int(p["m"])
            if lam <= 0 or m < 0:
                raise ValueError("truncated Poisson needs lam > 0 and m >= 0")
            return _truncate(stats.poisson.pmf(np.arange(m + 1), lam))
        if fam == "truncated_geometric":
            pg, m = float(p["p"]), int(p["m"])
            if not 0 < pg <= 1 or m < 0:
                raise ValueError("truncated geometric needs p in (0, 1] and m >= 0")
            # support starts at 0: mass proportional to (1 - p)^k p
            return _truncate(pg * (1.0 - pg) ** np.arange(m + 1))
        if fam == "explicit":
            return Distribution(p["pmf"])
    except KeyError as exc:
        raise ValueError(f"family {fam!r} is missing parameter {exc}") from None
    raise ValueError(f"unknown family {fam!r}")


# -- randomness --------------------------------------------------------------

STAGE_DATA = b"data"
STAGE_PRIVATIZE = b"privatize"


def stream_key(master_seed: int, trial: int, stage: bytes) -> np.ndarray:
    msg = struct.pack("<QQ", master_seed & (2**64 - 1), trial) + stage
    digest = hashlib.blake2b(msg, digest_size=16).digest()
    return np.frombuffer(digest, dtype="<u8").copy()


def trial_stream(master_seed: int, trial: int, stage: bytes) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(master_seed, trial, stage)))


def sample_dataset(
    p0: Distribution, p1: Distribution, n: int, k_star: int, rng: np.random.Generator
) -> Dataset:
    """``x_1..x_{k*-1} ~ p0`` and ``x_{k*}..x_n ~ p1``, one uniform per symbol."""
    p0, p1 = as_distribution(p0), as_distribution(p1)
    if not 2 <= k_star <= n:
        raise ValueError(f"k_star must lie in [2, n], got {k_star}")
    q = max(p0.alphabet_size, p1.alphabet_size)
    u = rng.random(n)
    x = np.empty(n, dtype=np.int64)
    x[: k_star - 1] = _inverse_cdf(p0, u[: k_star - 1])
    x[k_star - 1:] = _inverse_cdf(p1, u[k_star - 1:])
    return Dataset(x, q, k_star)


def _inverse_cdf(p: Distribution, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(p.mass)
    cdf[-1] = 1.0
    return np.minimum(np.searchsorted(cdf, u, side="right"), p.alphabet_size - 1)


# -- configuration -----------------------------------------------------------


@dataclass
class ExperimentConfig:
    p0: FamilySpec
    p1: FamilySpec
    n: int = 2000
    k_star: int = 1000
    trials: int = 10_000
    alpha_grid: list = field(default_factory=lambda: [5])
    epsilon_grid: Optional[list] = None
    mechanism: str = "none"
    master_seed: int = 0
    experiment: str = "curve"

    def __post_init__(self):
        if isinstance(self.p0, dict):
            self.p0 = FamilySpec.from_dict(self.p0)
        if isinstance(self.p1, dict):
            self.p1 = FamilySpec.from_dict(self.p1)
        self.alpha_grid = [_plain_number(a) for a in self.alpha_grid]
        if self.epsilon_grid is not None:
            self.epsilon_grid = [float(e) for e in self.epsilon_grid]
        self.validate()

    def validate(self) -> None:
        if self.n < 2 or not 2 <= self.k_star <= self.n:
            raise ValueError("need n >= 2 and 2 <= k_star <= n")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.alpha_grid or any(not 1 <= a <= self.n for a in self.alpha_grid):
            raise ValueError("alpha_grid must be non-empty with entries in [1, n]")
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"mechanism must be one of {MECHANISMS}")
        if self.experiment not in ("curve", "eps_sweep", "exponent_ratio"):
            raise ValueError("experiment must be curve, eps_sweep or exponent_ratio")
        if self.epsilon_grid is not None and any(not e > 0 for e in self.epsilon_grid):
            raise ValueError("epsilons must be positive")
        needs_eps = self.experiment != "curve" or self.mechanism != "none"
        if needs_eps and not self.epsilon_grid:
            raise ValueError("this experiment needs a non-empty epsilon_grid")

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        return cls(**obj)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p0"], d["p1"] = self.p0.to_dict(), self.p1.to_dict()
        return d


def _plain_number(x) -> int | float:
    x = float(x)
    return int(x) if x.is_integer() else x


# -- results -----------------------------------------------------------------


@dataclass
class ResultTable:
    columns: list
    rows: list
    metadata: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]


AccuracyCurve = ResultTable


def write_results(table: ResultTable, path: str | os.PathLike, fmt: str = "csv") -> None:
    """Write ``table`` as CSV (header + rows) or JSON (records + metadata + version)."""
    if fmt == "csv":
        text = dumps_csv(table)
    elif fmt == "json":
        text = dumps_json(table) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc.strerror or exc}") from exc


def dumps_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=table.columns, lineterminator="\n")
    w.writeheader()
    for row in table.rows:
        w.writerow({c: _fmt_cell(row.get(c)) for c in table.columns})
    return buf.getvalue()


def dumps_json(table: ResultTable) -> str:
    doc = {
        "version": __version__,
        "metadata": table.metadata,
        "columns": table.columns,
        "records": [{c: _json_cell(r.get(c)) for c in table.columns} for r in table.rows],
    }
    return json.dumps(doc, indent=2, allow_nan=False)


def _fmt_cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_cell(v: Any) -> Any:
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return v


def read_csv(path: str | os.PathLike) -> ResultTable:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            rows.append({k: _parse_cell(v) for k, v in raw.items()})
        return ResultTable(list(reader.fieldnames or []), rows)


def _parse_cell(v: str) -> Any:
    if v == "":
        return None
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


# -- trial engine ------------------------------------------------------------


class _Pipeline:
    """Precomputed detector for one (p0, p1, mechanism, eps) setting."""

    def __init__(self, p0: Distribution, p1: Distribution, mechanism: str, eps: float | None):
        self.mechanism = mechanism
        self.selection = None
        if mechanism == "none":
            self.channel = None
            q0, q1 = p0, p1
        else:
            if mechanism == "rr":
                self.channel = rr_channel(p0.alphabet_size, eps)
            else:
                self.selection = select_tau_star(p0, p1, eps)
                self.channel = quantized_rr(self.selection.quantizer, eps)
            q0, q1 = pushforward(p0, self.channel), pushforward(p1, self.channel)
        self.q0, self.q1 = q0, q1
        self.out_size = q0.alphabet_size

    def k_hat(self, data: Dataset, priv_rng: np.random.Generator | None) -> int:
        if self.channel is not None:
            y = self.channel.sample(data.symbols, priv_rng.random(data.n))
            data = Dataset(y, self.out_size, data.true_change_point)
        return argmax_first(glrt_scores(data, self.q0, self.q1))


def _resolve_threads(threads: int) -> int:
    if threads and threads > 0:
        return threads
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_trials(
    p0: Distribution,
    p1: Distribution,
    n: int,
    k_star: int,
    trials: int,
    master_seed: int,
    pipelines: Sequence[_Pipeline],
    threads: int = 1,
) -> np.ndarray:
    """Estimated change points, shape ``(len(pipelines), trials)``.

    Every pipeline sees the same dataset in a given trial and re-seeds the
    privatization stream, so mechanisms are compared on common random numbers.
    """
    out = np.zeros((len(pipelines), trials), dtype=np.int64)

    def work(lo: int, hi: int) -> None:
        for t in range(lo, hi):
            data = sample_dataset(p0, p1, n, k_star, trial_stream(master_seed, t, STAGE_DATA))
            for j, pipe in enumerate(pipelines):
                priv = None
                if pipe.channel is not None:
                    priv = trial_stream(master_seed, t, STAGE_PRIVATIZE)
                out[j, t] = pipe.k_hat(data, priv)

    nthreads = min(_resolve_threads(threads), trials)
    if nthreads <= 1:
        work(0, trials)
    else:
        bounds = np.linspace(0, trials, nthreads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=nthreads) as ex:
            futures = [ex.submit(work, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
            for f in futures:
                f.result()
    return out


def empirical_beta(k_hats: np.ndarray, k_star: int, alpha: float) -> float:
    """Fraction of estimates outside ``[k* - alpha, k* + alpha]``."""
    miss = np.abs(np.asarray(k_hats) - k_star) > alpha
    return float(np.count_nonzero(miss)) / miss.size


def _metadata(cfg: ExperimentConfig, **extra) -> dict:
    meta = {
        "config": cfg.to_dict(),
        "rng": "philox4x64; key = blake2b-128(master_seed, trial, stage)",
        "truncation_support": "{0,...,m} renormalized",
        "beta_floor": "1/(2*trials) before exponent computation",
        "library_version": __version__,
    }
    meta.update(extra)
    return meta


def _theory(p0, p1, cfg: ExperimentConfig, alpha, eps, pipe: _Pipeline) -> float:
    inp = inputs_for(
        p0, p1, cfg.n, alpha, epsilon=eps,
        in_s=None if pipe.selection is None else pipe.selection.quantizer.in_s,
    )
    if cfg.mechanism == "none":
        return theorem_npcpd(inp).beta
    if cfg.mechanism == "rr":
        return theorem_rrcpd(inp).beta
    return theorem_bmcpd(inp).beta


CURVE_COLUMNS = ["alpha", "beta_empirical", "beta_theory", "trials", "epsilon"]


def run_accuracy_curve(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Empirical and theoretical beta over ``cfg.alpha_grid``.

    For a private mechanism one block of rows is produced per epsilon.
    """
    p0, p1 = make_family(cfg.p0), make_family(cfg.p1)
    eps_list = [None] if cfg.mechanism == "none" else list(cfg.epsilon_grid)
    pipes = [_Pipeline(p0, p1, cfg.mechanism, e) for e in eps_list]
    k_hats = run_trials(p0, p1, cfg.n, cfg.k_star, cfg.trials, cfg.master_seed, pipes, threads)
    rows = []
    for eps, pipe, kh in zip(eps_list, pipes, k_hats):
        for alpha in cfg.alpha_grid:
            rows.append({
                "alpha": alpha,
                "beta_empirical": empirical_beta(kh, cfg.k_star, alpha),
                "beta_theory": _theory(p0, p1, cfg, alpha, eps, pipe),
                "trials": cfg.trials,
                "epsilon": eps,
            })
    return ResultTable(list(CURVE_COLUMNS), rows, _metadata(cfg, experiment="curve"))


SWEEP_COLUMNS = ["alpha", "epsilon", "beta_rr", "beta_bm", "beta_nonprivate", "trials"]


def _sweep_k_hats(cfg: ExperimentConfig, threads: int):
    p0, p1 = make_family(cfg.p0), make_family(cfg.p1)
    eps_list = list(cfg.epsilon_grid)
    pipes = [_Pipeline(p0, p1, "none", None)]
    for e in eps_list:
        pipes.append(_Pipeline(p0, p1, "rr", e))
        pipes.append(_Pipeline(p0, p1, "bm", e))
    k_hats = run_trials(p0, p1, cfg.n, cfg.k_star, cfg.trials, cfg.master_seed, pipes, threads)
    return eps_list, k_hats


def run_eps_sweep(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Private and non-private beta per (alpha, epsilon).

    The non-private baseline runs once on the same per-trial datasets.
    """
    if not cfg.epsilon_grid:
        raise ValueError("epsilon sweep needs a non-empty epsilon_grid")
    eps_list, k_hats = _sweep_k_hats(cfg, threads)
    rows = []
    for alpha in cfg.alpha_grid:
        b_np = empirical_beta(k_hats[0], cfg.k_star, alpha)
        for i, eps in enumerate(eps_list):
            rows.append({
                "alpha": alpha,
                "epsilon": eps,
                "beta_rr": empirical_beta(k_hats[1 + 2 * i], cfg.k_star, alpha),
                "beta_bm": empirical_beta(k_hats[2 + 2 * i], cfg.k_star, alpha),
                "beta_nonprivate": b_np,
                "trials": cfg.trials,
            })
    return ResultTable(list(SWEEP_COLUMNS), rows, _metadata(cfg, experiment="eps_sweep"))


RATIO_COLUMNS = [
    "alpha", "epsilon", "ratio_rr", "ratio_bm", "tanh_sq",
    "beta_rr", "beta_bm", "beta_nonprivate", "trials",
]


def run_exponent_ratio(cfg: ExperimentConfig, threads: int = 1, clip: bool = False) -> ResultTable:
    """Ratio of private to non-private empirical error exponents per epsilon.

    Zero empirical betas are floored at ``1/(2 trials)``. With ``clip`` the
    ratios are capped at 1.
    """
    sweep = run_eps_sweep(cfg, threads)
    rows = []
    for r in sweep.rows:
        a, t = r["alpha"], cfg.trials
        lam_np = error_exponent(a, r["beta_nonprivate"], t)
        ratio_rr = error_exponent(a, r["beta_rr"], t) / lam_np
        ratio_bm = error_exponent(a, r["beta_bm"], t) / lam_np
        if clip:
            ratio_rr, ratio_bm = min(ratio_rr, 1.0), min(ratio_bm, 1.0)
        rows.append({
            "alpha": a,
            "epsilon": r["epsilon"],
            "ratio_rr": ratio_rr,
            "ratio_bm": ratio_bm,
            "tanh_sq": privacy_cost_factor(r["epsilon"]),
            "beta_rr": r["beta_rr"],
            "beta_bm": r["beta_bm"],
            "beta_nonprivate": r["beta_nonprivate"],
            "trials": t,
        })
    return ResultTable(list(RATIO_COLUMNS), rows,
                       _metadata(cfg, experiment="exponent_ratio", clipped=clip))


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    if cfg.experiment == "curve":
        return run_accuracy_curve(cfg, threads)
    if cfg.experiment == "eps_sweep":
        return run_eps_sweep(cfg, threads)
    return run_exponent_ratio(cfg, threads)
