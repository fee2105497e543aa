"""Area of Conflict: closed forms, Monte Carlo verification, region bounds.

The AoC of a decision model is the fraction of its coefficient space where
the two agents' independent decisions clash.  Every closed form below is a
function of the antidiagonal reward gaps alone
(``row_gap = r(A2,B1) - r(A1,B2)`` for the row agent and symmetrically for
the column agent), so the results are invariant under positive affine maps
of the rewards.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .game import (
    AGGRESSIVE,
    PASSIVE,
    ModelKind,
    RewardMatrix,
    effective_own,
    validate_matrix,
)

HALF_PI = math.pi / 2.0

# Fixed Monte Carlo chunk so estimates depend only on (seed, chunk index),
# never on the worker count.
_MC_CHUNK = 1 << 15


class DomainError(ValueError):
    """Gap or coefficient outside the formula's domain."""


class NonpositiveGap(ValueError):
    """Antidiagonal margins must be strictly positive."""


class UnsupportedKind(ValueError):
    """Model kind not handled by this operation."""


@dataclass(frozen=True)
class GapPair:
    """Antidiagonal reward margins that parametrize every conflict formula."""

    row_gap: float
    col_gap: float


class AocResult(NamedTuple):
    value: float
    breakdown: tuple[float, float] | None = None


class MonteCarloEstimate(NamedTuple):
    estimate: float
    standard_error: float


@dataclass(frozen=True)
class RegionBounds:
    """Conflict intervals of the second coefficient per first-coefficient sample."""

    kind: ModelKind
    coefficients: tuple[float, ...]
    intervals: tuple[tuple[tuple[float, float], ...], ...]


@dataclass(frozen=True)
class CurveRow:
    kind: ModelKind
    row_gap: float
    col_gap: float
    aoc: float


def gaps(m: RewardMatrix) -> GapPair:
    """Antidiagonal margins of a validated matrix."""
    a = m.row_reward(AGGRESSIVE, PASSIVE) - m.row_reward(PASSIVE, AGGRESSIVE)
    b = m.col_reward(PASSIVE, AGGRESSIVE) - m.col_reward(AGGRESSIVE, PASSIVE)
    if a <= 0 or b <= 0:
        raise NonpositiveGap(
            f"antidiagonal margins must be positive (got {a}, {b}); "
            "was the matrix validated?"
        )
    return GapPair(a, b)


def _check_gaps(g: GapPair) -> tuple[float, float]:
    a, b = g.row_gap, g.col_gap
    if not (a > 0 and b > 0) or not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError(f"gaps must be positive finite, got ({a}, {b})")
    return a, b


def aoc_analytical(kind: ModelKind, g: GapPair) -> AocResult:
    """Closed-form conflict area for one decision model.

    baseline            1
    pure altruism       min(a/b, b/a)
    altruism            2ab / (a+b)^2
    augmented altruism  ln(a+b)(a/b + b/a) - (a/b)ln a - (b/a)ln b - 1
    svo                 (p1 p2 + (pi/2-p1)(pi/2-p2)) / (pi/2)^2,
                        p1 = clamp(atan(a/b)), p2 = clamp(atan(b/a))
    """
    a, b = _check_gaps(g)
    if kind is ModelKind.BASELINE:
        return AocResult(1.0)
    if kind is ModelKind.PURE_ALTRUISM:
        return AocResult(min(a / b, b / a))
    if kind is ModelKind.ALTRUISM:
        return AocResult(2.0 * a * b / (a + b) ** 2)
    if kind is ModelKind.AUGMENTED_ALTRUISM:
        value = (
            math.log(a + b) * (a / b + b / a)
            - (a / b) * math.log(a)
            - (b / a) * math.log(b)
            - 1.0
        )
        return AocResult(value)
    if kind is ModelKind.SVO:
        p1 = min(max(math.atan(a / b), 0.0), HALF_PI)
        p2 = min(max(math.atan(b / a), 0.0), HALF_PI)
        value = (p1 * p2 + (HALF_PI - p1) * (HALF_PI - p2)) / HALF_PI**2
        return AocResult(value, (p1, p2))
    raise UnsupportedKind(f"no closed form for {kind!r}")


def conflict_mask(
    kind: ModelKind, m: RewardMatrix, c1: np.ndarray, c2: np.ndarray
) -> np.ndarray:
    """Vectorized decision rule: True where a coefficient pair is in conflict.

    Applies the same effective-reward comparison as ``game.decide`` (ties
    aggressive) to arrays of coefficient pairs.
    """
    rp1 = m.row_reward(AGGRESSIVE, PASSIVE)
    rp2 = m.col_reward(AGGRESSIVE, PASSIVE)
    rq1 = m.row_reward(PASSIVE, AGGRESSIVE)
    rq2 = m.col_reward(PASSIVE, AGGRESSIVE)
    row_aggressive = effective_own(kind, c1, c2, rp1, rp2) >= effective_own(
        kind, c1, c2, rq1, rq2
    )
    col_aggressive = effective_own(kind, c2, c1, rq2, rq1) >= effective_own(
        kind, c2, c1, rp2, rp1
    )
    return row_aggressive == col_aggressive


def _mc_chunk_count(kind: ModelKind, m: RewardMatrix, seed: int, index: int, size: int) -> int:
    rng = np.random.default_rng([seed, index])
    pairs = rng.random((2, size))
    if kind is ModelKind.SVO:
        pairs = pairs * HALF_PI
    return int(np.count_nonzero(conflict_mask(kind, m, pairs[0], pairs[1])))


def aoc_monte_carlo(
    kind: ModelKind,
    m: RewardMatrix,
    n: int,
    seed: int,
    jobs: int = 1,
) -> MonteCarloEstimate:
    """Estimate the conflict area by uniform coefficient sampling.

    Coefficients are drawn from [0,1)^2 (altruistic variants) or
    [0, pi/2)^2 (SVO); the estimate is the conflict fraction under the
    decision rule, with its binomial standard error.  Sampling is chunked so
    the result is bit-identical for a given (n, seed) regardless of ``jobs``.
    Baseline needs no sampling: it is always in conflict.
    """
    if kind not in ModelKind.__members__.values():
        raise UnsupportedKind(f"unknown model kind {kind!r}")
    if n < 10**3:
        raise ValueError("need at least 1000 samples")
    validate_matrix(m)
    if kind is ModelKind.BASELINE:
        return MonteCarloEstimate(1.0, 0.0)

    sizes = [_MC_CHUNK] * (n // _MC_CHUNK)
    if n % _MC_CHUNK:
        sizes.append(n % _MC_CHUNK)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            counts = list(
                pool.map(
                    lambda args: _mc_chunk_count(kind, m, seed, *args),
                    enumerate(sizes),
                )
            )
    else:
        counts = [_mc_chunk_count(kind, m, seed, i, s) for i, s in enumerate(sizes)]
    hits = sum(counts)
    p = hits / n
    return MonteCarloEstimate(p, math.sqrt(p * (1.0 - p) / n))


def _interval(lo: float, hi: float, top: float) -> tuple[tuple[float, float], ...]:
    lo = min(max(lo, 0.0), top)
    hi = min(max(hi, 0.0), top)
    if lo >= hi:
        return ()
    return ((lo, hi),)


def conflict_region_bounds(
    kind: ModelKind, g: GapPair, c1_samples: Sequence[float]
) -> RegionBounds:
    """Conflict interval(s) of the second coefficient at each first-coefficient sample.

    For the quadrant-style models (pure altruism, altruism, SVO) the region
    is a pair of opposite quadrants, so each sample yields one interval: the
    both-aggressive block below the thresholds or the both-passive block
    above them.  Augmented altruism has a single curved band with at most one
    interval per sample, empty at c1 = 0 where its lower-bound expression is
    undefined.
    """
    a, b = _check_gaps(g)
    top = HALF_PI if kind is ModelKind.SVO else 1.0
    out: list[tuple[tuple[float, float], ...]] = []
    for c1 in c1_samples:
        if kind is ModelKind.AUGMENTED_ALTRUISM:
            if not (0.0 <= c1 < 1.0):
                raise DomainError(f"augmented coefficient must lie in [0, 1), got {c1}")
        elif not (0.0 <= c1 <= top):
            raise DomainError(f"coefficient {c1} outside [0, {top:.6g}]")

        if kind is ModelKind.BASELINE:
            out.append(((0.0, top),))
        elif kind is ModelKind.PURE_ALTRUISM:
            p = min(a / b, 1.0)
            q = min(b / a, 1.0)
            out.append(_interval(0.0, q, top) if c1 <= p else _interval(q, 1.0, top))
        elif kind is ModelKind.ALTRUISM:
            p = a / (a + b)
            q = b / (a + b)
            out.append(_interval(0.0, q, top) if c1 <= p else _interval(q, 1.0, top))
        elif kind is ModelKind.SVO:
            p1 = min(max(math.atan(a / b), 0.0), HALF_PI)
            p2 = min(max(math.atan(b / a), 0.0), HALF_PI)
            out.append(_interval(0.0, p2, top) if c1 <= p1 else _interval(p2, top, top))
        elif kind is ModelKind.AUGMENTED_ALTRUISM:
            if c1 == 0.0:
                out.append(())
            else:
                lo = 1.0 - (1.0 - c1) / c1 * (a / b)
                hi = b / (b + (1.0 - c1) * a)
                out.append(_interval(lo, hi, top))
        else:
            raise UnsupportedKind(f"no region bounds for {kind!r}")
    return RegionBounds(kind, tuple(float(c) for c in c1_samples), tuple(out))


def in_region(bounds: RegionBounds, index: int, c2: float) -> bool:
    return any(lo <= c2 <= hi for lo, hi in bounds.intervals[index])


def aoc_curve(
    kinds: Sequence[ModelKind], a_values: Sequence[float], col_gap: float
) -> list[CurveRow]:
    """Closed-form AoC on a grid of row gaps at a fixed column gap."""
    rows = [
        CurveRow(kind, float(a), float(col_gap), aoc_analytical(kind, GapPair(a, col_gap)).value)
        for kind in kinds
        for a in a_values
    ]
    rows.sort(key=lambda r: (r.kind.value, r.row_gap))
    return rows


def _fmt(x: float) -> str:
    return format(x, ".9g")


def write_curve_csv(rows: Sequence[CurveRow], path, manifest: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if manifest:
            fh.write(f"# manifest: {manifest}\n")
        writer = csv.writer(fh)
        writer.writerow(["kind", "A", "B", "aoc"])
        for r in rows:
            writer.writerow([r.kind.value, _fmt(r.row_gap), _fmt(r.col_gap), _fmt(r.aoc)])


def write_region_csv(bounds: RegionBounds, path, manifest: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if manifest:
            fh.write(f"# manifest: {manifest}\n")
        writer = csv.writer(fh)
        writer.writerow(["kind", "alpha1", "lo", "hi"])
        for c1, intervals in zip(bounds.coefficients, bounds.intervals):
            for lo, hi in intervals:
                writer.writerow([bounds.kind.value, _fmt(c1), _fmt(lo), _fmt(hi)])
