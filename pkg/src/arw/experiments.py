"""Monte-Carlo trials over the wave ensemble and their statistics.

Each trial is a pure function of (master_seed, trial_index), so runs are
reproducible at any parallelism.  Statistics are computed over certified
trials only, with the uncertified fraction reported alongside; grid counts
from uncertified trials would pollute the estimates the concentration
statements are about.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientTrials, MemoryBudgetExceeded, ValidationError
from .field import min_alias_free_M, sample_coefficients
from .lattice import enumerate_shell
from .nodal import analyze

CSV_COLUMNS = (
    "trial_index",
    "seed",
    "d",
    "n",
    "dim_HL",
    "M",
    "k",
    "r",
    "min_domain_vol",
    "sum_diameters",
    "alpha",
    "beta",
    "certified",
    "wall_time_ms",
)

# d=2 products of primes 1 mod 4 (5, 5*13, 5^2*13, 5*13*17): shell sizes
# 8, 16, 24, 32 grow while L stays moderate.  Admissibility is a measured
# diagnostic (equidistribution_report), not an assumption.
BUILTIN_D2_SEQUENCE = (5, 65, 325, 1105)


@dataclass(frozen=True)
class MPolicy:
    """Grid-size policy: fixed(M), per_L(K) with M = K*ceil(sqrt(n)), or
    auto_refine from the smallest alias-free grid."""

    kind: str
    value: int = 0

    @staticmethod
    def parse(text: str) -> "MPolicy":
        text = text.strip()
        if text == "auto_refine":
            return MPolicy("auto_refine")
        if ":" in text:
            kind, _, raw = text.partition(":")
            kind = kind.strip()
            if kind in ("fixed", "per_L"):
                try:
                    return MPolicy(kind, int(raw))
                except ValueError:
                    raise ValidationError(f"m_policy value {raw!r} is not an integer") from None
        raise ValidationError(f"unknown m_policy {text!r}")

    def __str__(self) -> str:
        if self.kind == "auto_refine":
            return "auto_refine"
        return f"{self.kind}:{self.value}"

    def grid_size(self, n: int) -> int:
        floor = min_alias_free_M(n)
        if self.kind == "fixed":
            return max(self.value, floor)
        if self.kind == "per_L":
            return max(self.value * math.isqrt(n - 1) + self.value, floor)
        return floor

    @property
    def auto_refine(self) -> bool:
        return self.kind == "auto_refine"


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    seed: int
    d: int
    n: int
    dim_HL: int
    M: int
    k: int
    r: int
    min_domain_vol: float
    sum_diameters: float
    alpha: float
    beta: float
    certified: bool
    wall_time_ms: float
    error: str = ""  # flagged failures; not part of the CSV contract

    @property
    def scaled_count(self) -> float:
        """k / L^d = k / n^(d/2)."""
        return self.k / float(self.n) ** (self.d / 2.0)


def run_trial(d: int, n: int, m_policy: MPolicy, master_seed: int, trial_index: int) -> TrialRecord:
    """One trial: sample, analyze, summarize.  Memory failures are flagged
    in the record instead of raised."""
    t0 = time.perf_counter()
    shell = enumerate_shell(d, n)
    sample = sample_coefficients(shell, master_seed, trial_index)
    M = m_policy.grid_size(n)
    try:
        summary = analyze(sample, M, auto_refine=m_policy.auto_refine)
    except MemoryBudgetExceeded as exc:
        return TrialRecord(
            trial_index=trial_index,
            seed=master_seed,
            d=d,
            n=n,
            dim_HL=shell.dim_HL,
            M=M,
            k=0,
            r=0,
            min_domain_vol=0.0,
            sum_diameters=0.0,
            alpha=0.0,
            beta=0.0,
            certified=False,
            wall_time_ms=(time.perf_counter() - t0) * 1e3,
            error=f"MemoryBudgetExceeded: {exc}",
        )
    min_vol = float(np.min(summary.domain_volumes)) if summary.r else 0.0
    return TrialRecord(
        trial_index=trial_index,
        seed=master_seed,
        d=d,
        n=n,
        dim_HL=shell.dim_HL,
        M=summary.M,
        k=summary.k,
        r=summary.r,
        min_domain_vol=min_vol,
        sum_diameters=float(np.sum(summary.component_diameters)),
        alpha=summary.alpha,
        beta=summary.beta,
        certified=summary.certified,
        wall_time_ms=(time.perf_counter() - t0) * 1e3,
    )


def _run_trial_args(args) -> TrialRecord:
    return run_trial(*args)


def run_trials(
    d: int,
    n: int,
    trials: int,
    m_policy: MPolicy,
    master_seed: int,
    parallelism: int = 1,
) -> list[TrialRecord]:
    """Run `trials` independent trials; records are identical at any
    parallelism (wall times aside) because trial t draws from the
    (master_seed, t) stream."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    jobs = [(d, n, m_policy, master_seed, t) for t in range(trials)]
    if parallelism <= 1:
        return [run_trial(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        records = list(pool.map(_run_trial_args, jobs, chunksize=max(1, trials // (4 * parallelism))))
    records.sort(key=lambda rec: rec.trial_index)
    return records


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_trials_csv(path: str, records: Sequence[TrialRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([_fmt(getattr(rec, col)) for col in CSV_COLUMNS])


def read_trials_csv(path: str) -> list[TrialRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out.append(
                TrialRecord(
                    trial_index=int(row["trial_index"]),
                    seed=int(row["seed"]),
                    d=int(row["d"]),
                    n=int(row["n"]),
                    dim_HL=int(row["dim_HL"]),
                    M=int(row["M"]),
                    k=int(row["k"]),
                    r=int(row["r"]),
                    min_domain_vol=float(row["min_domain_vol"]),
                    sum_diameters=float(row["sum_diameters"]),
                    alpha=float(row["alpha"]),
                    beta=float(row["beta"]),
                    certified=row["certified"] == "true",
                    wall_time_ms=float(row["wall_time_ms"]),
                )
            )
    return out


@dataclass(frozen=True)
class PerNStats:
    n: int
    dim_HL: int
    trials: int
    certified_trials: int
    uncertified_fraction: float
    mean: float
    median: float
    variance: float
    tail_freqs: dict[float, float]


@dataclass(frozen=True)
class ConcentrationReport:
    epsilons: tuple[float, ...]
    per_n: list[PerNStats] = field(default_factory=list)
    # fitted slope of log(tail frequency) against dim_HL, per epsilon;
    # absent (None) when fewer than 3 strictly positive frequencies exist
    slopes: dict[float, Optional[float]] = field(default_factory=dict)


def _group_certified(records: Sequence[TrialRecord]) -> dict[int, list[TrialRecord]]:
    groups: dict[int, list[TrialRecord]] = {}
    for rec in records:
        groups.setdefault(rec.n, []).append(rec)
    return groups


def concentration_report(
    records: Sequence[TrialRecord],
    epsilons: Optional[Sequence[float]] = None,
    min_trials: int = 30,
) -> ConcentrationReport:
    """Per-n medians, variances, and epsilon-tail frequencies of k/L^d.

    Only certified trials enter the statistics; the uncertified fraction is
    reported.  The default epsilon list scales {1%, 2%, 5%, 10%} of the
    pooled certified median.  Tail-decay slopes are fitted per epsilon on
    log(frequency) vs dim_HL using only strictly positive frequencies and
    at least three support points.
    """
    groups = _group_certified(records)
    if not groups:
        raise InsufficientTrials("no records")
    certified_all = [rec.scaled_count for rec in records if rec.certified]
    if not certified_all:
        raise InsufficientTrials("no certified records")
    if epsilons is None:
        base = float(np.median(certified_all))
        epsilons = tuple(round(f * base, 12) for f in (0.01, 0.02, 0.05, 0.1))
    else:
        epsilons = tuple(float(e) for e in epsilons)

    per_n: list[PerNStats] = []
    for n in sorted(groups):
        recs = groups[n]
        cert = [rec for rec in recs if rec.certified]
        if len(cert) < min_trials:
            raise InsufficientTrials(f"n={n}: {len(cert)} certified trials < {min_trials}")
        values = np.array([rec.scaled_count for rec in cert])
        med = float(np.median(values))
        tails = {
            eps: float(np.mean(np.abs(values - med) > eps)) for eps in epsilons
        }
        per_n.append(
            PerNStats(
                n=n,
                dim_HL=cert[0].dim_HL,
                trials=len(recs),
                certified_trials=len(cert),
                uncertified_fraction=1.0 - len(cert) / len(recs),
                mean=float(np.mean(values)),
                median=med,
                variance=float(np.var(values, ddof=1)) if len(cert) > 1 else 0.0,
                tail_freqs=tails,
            )
        )

    slopes: dict[float, Optional[float]] = {}
    for eps in epsilons:
        xs = [stats.dim_HL for stats in per_n if stats.tail_freqs[eps] > 0.0]
        ys = [math.log(stats.tail_freqs[eps]) for stats in per_n if stats.tail_freqs[eps] > 0.0]
        if len(xs) >= 3 and len(set(xs)) >= 3:
            slopes[eps] = float(np.polyfit(np.array(xs, dtype=float), np.array(ys), 1)[0])
        else:
            slopes[eps] = None
    return ConcentrationReport(epsilons=epsilons, per_n=per_n, slopes=slopes)


@dataclass(frozen=True)
class NuEstimate:
    per_n_mean: dict[int, float]
    nu_hat: float
    std_error: float
    stabilization_gap: float


def nu_estimate(records: Sequence[TrialRecord]) -> NuEstimate:
    """Mean of k/L^d per n; the estimate is the mean at the largest n, with
    the relative gap to the second largest as the stabilization measure."""
    groups = _group_certified(records)
    means: dict[int, float] = {}
    counts: dict[int, int] = {}
    stds: dict[int, float] = {}
    for n, recs in groups.items():
        vals = [rec.scaled_count for rec in recs if rec.certified]
        if vals:
            means[n] = float(np.mean(vals))
            counts[n] = len(vals)
            stds[n] = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
    if len(means) < 2:
        raise InsufficientTrials("need certified trials at >= 2 distinct n")
    ordered = sorted(means)
    top, second = ordered[-1], ordered[-2]
    gap = abs(means[top] - means[second]) / means[top] if means[top] else math.inf
    return NuEstimate(
        per_n_mean=means,
        nu_hat=means[top],
        std_error=stds[top] / math.sqrt(counts[top]),
        stabilization_gap=gap,
    )


def diameter_scaling(records: Sequence[TrialRecord], d: int) -> float:
    """Least-squares exponent of mean total component diameter against
    L = sqrt(n); the trigonometric degree bound predicts d-1."""
    groups = _group_certified(records)
    xs, ys = [], []
    for n in sorted(groups):
        vals = [rec.sum_diameters for rec in groups[n] if rec.certified]
        if vals:
            mean = float(np.mean(vals))
            if mean > 0:
                xs.append(0.5 * math.log(n))
                ys.append(math.log(mean))
    if len(xs) < 3:
        raise InsufficientTrials("need >= 3 distinct n with certified trials")
    return float(np.polyfit(np.array(xs), np.array(ys), 1)[0])


@dataclass(frozen=True)
class ProofExponents:
    """Closed-form solution of the concentration proof's exponent system.

    Parameters scale as powers of epsilon: alpha ~ eps^a, beta ~ eps^b,
    delta ~ eps^(2k), gamma ~ eps^g, tau ~ eps^t, rho ~ eps^h, R ~ eps^(-r),
    and the decay rate satisfies c(eps) ~ eps^c_exponent with
    c_exponent = (d+2)^2 - 1.
    """

    d: int
    a: Fraction
    b: Fraction
    k: Fraction
    g: Fraction
    t: Fraction
    h: Fraction
    r: Fraction
    c_exponent: Fraction

    def inequalities(self) -> dict[str, bool]:
        a, b, k, g, t, h, r = self.a, self.b, self.k, self.g, self.t, self.h, self.r
        d = self.d
        ineq1 = 2 * k + d * g <= min(a, b + g, 2 * g - k, t - k) + d * min(b, g - k, t - k)
        return {
            "ineq1": bool(ineq1),
            "ineq2": b <= a + r,
            "ineq3": r >= 1,
            "ineq4": 2 * k >= 1 + r * d,
            "ineq5": 2 * h >= 1 + 2 * a + r * d,
        }

    @property
    def satisfied(self) -> bool:
        return all(self.inequalities().values())


def proof_exponents(d: int) -> ProofExponents:
    """Exponents minimizing max(h, t): b = a + 1, 2k = d + 1,
    4g = (d+1)(d+3), r = 1, 2a = (d+1)(d+2), and 2h = 2t = (d+2)^2 - 1."""
    if d < 2:
        raise ValueError("d must be >= 2")
    a = Fraction((d + 1) * (d + 2), 2)
    h = Fraction(d + 1, 2) + a
    return ProofExponents(
        d=d,
        a=a,
        b=a + 1,
        k=Fraction(d + 1, 2),
        g=Fraction((d + 1) * (d + 3), 4),
        t=h,
        h=h,
        r=Fraction(1),
        c_exponent=Fraction((d + 2) ** 2 - 1),
    )
