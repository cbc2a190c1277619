"""Brute-force reference implementations used to freeze expected values.

Everything here is written directly from the defining formulas as plain
Python loops over lists, on purpose: no numpy, no imports from the package
under test. The equivalence suites compare the fast implementations against
these.
"""

from __future__ import annotations

import math
import statistics


def mse_score_loop(predicted: list[list[float]], reference: list[list[float]]) -> float:
    """-(1/L) sum over steps of the squared L2 distance between action rows."""
    assert len(predicted) == len(reference) and len(predicted) >= 1
    total = 0.0
    for p_row, r_row in zip(predicted, reference):
        assert len(p_row) == len(r_row)
        for p, r in zip(p_row, r_row):
            total += (p - r) ** 2
    return -total / len(predicted)


def smoothness_loop(angles: list[list[float]], dt: float) -> float:
    """-sum over every consecutive frame triple and joint of |a'' | / dt^2."""
    total = 0.0
    joints = len(angles[0])
    for k in range(len(angles) - 2):
        for j in range(joints):
            second = angles[k + 2][j] - 2.0 * angles[k + 1][j] + angles[k][j]
            total += abs(second / (dt * dt))
    return -total


def limit_loop(angles: list[list[float]], lowers: list[float], uppers: list[float]) -> int:
    """1 iff every angle sits inside its joint's inclusive [lower, upper] band."""
    for row in angles:
        for j, a in enumerate(row):
            if a < lowers[j] or a > uppers[j]:
                return 0
    return 1


def minmax_loop(values: list[float]) -> list[float]:
    lo = min(values)
    hi = max(values)
    if hi == lo:
        return [0.5 for _ in values]
    return [(v - lo) / (hi - lo) for v in values]


def accel_loop(angles: list[list[float]], dt: float) -> float:
    """Mean over triples and joints of |second difference| / dt^2."""
    joints = len(angles[0])
    triples = len(angles) - 2
    assert triples >= 1
    total = 0.0
    for k in range(triples):
        for j in range(joints):
            second = angles[k + 2][j] - 2.0 * angles[k + 1][j] + angles[k][j]
            total += abs(second / (dt * dt))
    return total / (triples * joints)


def overlimit_loop(angles: list[list[float]], lowers: list[float], uppers: list[float]) -> int:
    """Count frames where at least one joint leaves its band."""
    count = 0
    for row in angles:
        for j, a in enumerate(row):
            if a < lowers[j] or a > uppers[j]:
                count += 1
                break
    return count


def depth_metrics_loop(pred: list[float], gt: list[float]) -> tuple[float, float, float, float]:
    """(rmse, abs_rel, sq_rel, scale) after median alignment, over flat pixels."""
    scale = statistics.median(gt) / statistics.median(pred)
    aligned = [scale * p for p in pred]
    n = len(gt)
    rmse = math.sqrt(sum((a - g) ** 2 for a, g in zip(aligned, gt)) / n)
    abs_rel = sum(abs(a - g) / g for a, g in zip(aligned, gt)) / n
    sq_rel = sum((a - g) ** 2 / g for a, g in zip(aligned, gt)) / n
    return rmse, abs_rel, sq_rel, scale


def match_count_loop(
    center: list[list[float]],
    side: list[list[float]],
    patch: int = 8,
    stride: int = 8,
    tau: float | None = None,
) -> int:
    """Exhaustive patch-match count: for each patch of `center` on the stride
    grid, scan every horizontal position of `side` at the same rows and keep
    the patch if its best SSD is within tau."""
    if tau is None:
        tau = 1e-6 * patch * patch
    height = len(center)
    width = len(center[0])
    side_width = len(side[0])
    matches = 0
    for top in range(0, height - patch + 1, stride):
        for left in range(0, width - patch + 1, stride):
            best = math.inf
            for offset in range(0, side_width - patch + 1):
                ssd = 0.0
                for dy in range(patch):
                    for dx in range(patch):
                        d = center[top + dy][left + dx] - side[top + dy][offset + dx]
                        ssd += d * d
                if ssd < best:
                    best = ssd
            if best <= tau:
                matches += 1
    return matches


def weight_loop(scores: list[float], gamma: float, lam: float) -> list[float]:
    raw = [gamma + lam * (1.0 - s) for s in scores]
    total = sum(raw)
    return [r / total for r in raw]
