"""Tournament trees with winner tracking for max and min reductions.

A tree holds a fixed-length vector of finite values in its leaves, padded to a
power-of-two capacity with sentinels (-inf for max trees, +inf for min trees).
Every internal node caches the winning value of its subtree together with the
leaf index that realizes it, so the overall extremum and its argindex are O(1)
reads at the root while a single-leaf write costs one node per level.

Ties always resolve to the smallest leaf index, which keeps arg-selection
deterministic across runs.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["MaxTree", "MinTree", "UpdateResult", "build"]


@dataclass(frozen=True)
class UpdateResult:
    """Outcome of a single-leaf update."""

    old_root: float
    new_root: float
    nodes_touched: int
    touched: tuple  # heap indices written, leaf first, root last


class _TournamentTree:
    """Shared machinery; use MaxTree / MinTree."""

    # subclasses set these
    _sentinel = None
    _is_max = True

    def __init__(self, values):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("tree requires a non-empty 1-D value vector")
        if not np.all(np.isfinite(values)):
            raise ValueError("tree values must be finite")
        self.logical_size = int(values.size)
        self.capacity = 1 << (self.logical_size - 1).bit_length()
        # heap layout: index 0 unused, internals 1..capacity-1,
        # leaves capacity..2*capacity-1
        self._values = np.full(2 * self.capacity, self._sentinel, dtype=np.float64)
        self._winners = np.arange(2 * self.capacity, dtype=np.int64) - self.capacity
        self._values[self.capacity : self.capacity + self.logical_size] = values
        self._build_internal()

    def _build_internal(self):
        cap = self.capacity
        vals, wins = self._values, self._winners
        lo = cap
        while lo > 1:
            lo //= 2
            left = vals[2 * lo : 4 * lo : 2]
            right = vals[2 * lo + 1 : 4 * lo : 2]
            if self._is_max:
                take_left = left >= right
            else:
                take_left = left <= right
            vals[lo : 2 * lo] = np.where(take_left, left, right)
            wins[lo : 2 * lo] = np.where(
                take_left, wins[2 * lo : 4 * lo : 2], wins[2 * lo + 1 : 4 * lo : 2]
            )

    def __len__(self):
        return self.logical_size

    @property
    def height(self):
        return self.capacity.bit_length() - 1

    def root(self):
        """Return (extremum value, smallest leaf index attaining it)."""
        return float(self._values[1]), int(self._winners[1])

    def leaf_value(self, leaf):
        if not 0 <= leaf < self.logical_size:
            raise IndexError(f"leaf {leaf} out of range [0, {self.logical_size})")
        return float(self._values[self.capacity + leaf])

    def leaf_values(self):
        """Copy of the live leaf vector (logical leaves only)."""
        return self._values[self.capacity : self.capacity + self.logical_size].copy()

    def update(self, leaf, new_value):
        """Write one leaf and refresh the path to the root.

        Touches exactly height+1 nodes regardless of whether values change,
        so callers can rely on the cost model.
        """
        if not 0 <= leaf < self.logical_size:
            raise IndexError(f"leaf {leaf} out of range [0, {self.logical_size})")
        new_value = float(new_value)
        if not np.isfinite(new_value):
            raise ValueError("leaf values must be finite")
        vals, wins = self._values, self._winners
        old_root = float(vals[1])
        idx = self.capacity + leaf
        vals[idx] = new_value
        touched = [idx]
        idx >>= 1
        while idx >= 1:
            left, right = 2 * idx, 2 * idx + 1
            if self._is_max:
                take_left = vals[left] >= vals[right]
            else:
                take_left = vals[left] <= vals[right]
            child = left if take_left else right
            vals[idx] = vals[child]
            wins[idx] = wins[child]
            touched.append(idx)
            idx >>= 1
        return UpdateResult(
            old_root=old_root,
            new_root=float(vals[1]),
            nodes_touched=len(touched),
            touched=tuple(touched),
        )


class MaxTree(_TournamentTree):
    """Tournament tree reporting max value and its smallest arg leaf."""

    _sentinel = -np.inf
    _is_max = True


class MinTree(_TournamentTree):
    """Tournament tree reporting min value and its smallest arg leaf."""

    _sentinel = np.inf
    _is_max = False


def build(values, semantics):
    """Build a tree with the requested semantics ("max" or "min")."""
    if semantics == "max":
        return MaxTree(values)
    if semantics == "min":
        return MinTree(values)
    raise ValueError(f"unknown semantics {semantics!r}")
