"""Weighted isotonic and antitonic least-squares regression via pool adjacent violators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInput


@dataclass(frozen=True)
class WeightedVector:
    """Values g_i with positive weights w_i to be projected onto a monotone cone."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).reshape(-1)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if values.size == 0:
            raise InvalidInput("cannot regress an empty vector")
        if values.size != weights.size:
            raise InvalidInput(f"{values.size} values but {weights.size} weights")
        if not np.all(np.isfinite(values)):
            raise InvalidInput("values must be finite")
        bad = np.flatnonzero(~(np.isfinite(weights) & (weights > 0)))
        if bad.size:
            i = int(bad[0])
            raise InvalidInput(f"weight {i} must be positive and finite, got {weights[i]}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    @property
    def k(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class Block:
    """Level set [start, end) sharing one fitted value."""

    start: int
    end: int
    value: float
    weight: float

    def __len__(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class BlockSolution:
    fitted: np.ndarray
    blocks: tuple[Block, ...]

    @property
    def pooled(self) -> bool:
        """True when at least one block spans several levels."""
        return any(len(b) > 1 for b in self.blocks)


def _pava(values: Sequence[float], weights: Sequence[float]) -> list[list[float]]:
    # Each stack entry: [start, end, weight_sum, weighted_value_sum]
    stack: list[list[float]] = []
    for i, (g, w) in enumerate(zip(values, weights)):
        stack.append([i, i + 1, w, w * g])
        # merge while the previous block's mean strictly exceeds the last one's
        while len(stack) > 1 and stack[-2][3] * stack[-1][2] > stack[-1][3] * stack[-2][2]:
            last = stack.pop()
            prev = stack[-1]
            prev[1] = last[1]
            prev[2] += last[2]
            prev[3] += last[3]
    return stack


def isotonic_regression(v: WeightedVector) -> BlockSolution:
    """Weighted least-squares projection onto non-decreasing vectors.

    Single-pass stack PAVA, O(k). Ties are not violations and stay unpooled.
    """
    stack = _pava(v.values.tolist(), v.weights.tolist())
    fitted = np.empty(v.k)
    blocks = []
    for start, end, wsum, vsum in stack:
        value = vsum / wsum
        fitted[int(start):int(end)] = value
        blocks.append(Block(int(start), int(end), value, wsum))
    return BlockSolution(fitted=fitted, blocks=tuple(blocks))


def antitonic_regression(v: WeightedVector) -> BlockSolution:
    """Weighted least-squares projection onto non-increasing vectors (reversed isotonic)."""
    k = v.k
    rev = isotonic_regression(WeightedVector(v.values[::-1], v.weights[::-1]))
    blocks = tuple(Block(k - b.end, k - b.start, b.value, b.weight) for b in reversed(rev.blocks))
    return BlockSolution(fitted=rev.fitted[::-1].copy(), blocks=blocks)
