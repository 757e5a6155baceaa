"""Incrementally-maintained forward state for the three-layer network.

Training on the worst-sample objective changes only a handful of weights per
iteration, so the full forward state of the dataset can be kept alive and
repaired along the touched reduction paths instead of being recomputed. This
module stores, for every sample, one min-reduction tree per hidden unit and
one max-reduction tree per class, packed so that a single weight delta is
propagated across all samples with a few contiguous vector operations:

* max-layer weight (h, d): fix leaf h in tree (n, d) for every n, then
  refresh log-sum-exp / loss only where the class score actually moved;
* min-layer weight (i, h): fix leaf i in tree (n, h); where the hidden value
  moved, fix leaf h in the class trees of those samples;
* expansion weight i: recompute the signed feature column and fix leaf i in
  every hidden tree, cascading as above (the expensive path that skip
  scheduling amortizes).

Node storage is plane-major: nodes[j] is the (samples x trees) plane of heap
node j, so one level of every tree is one contiguous array. The bottom
`block` leaves of each subtree stay implicit (leaf values are derivable from
the live weight arrays); a changed leaf updates its block minimum in O(1)
per sample by comparing old and new leaf values, re-scanning the block only
for samples where the previous winner was raised. Node values are identical
to plain per-sample binary trees, and ties resolve to the smallest index
everywhere.

A loss tree over all N samples sits on top and yields the worst sample in
O(1) per iteration.
"""

from dataclasses import dataclass

import numpy as np

from .model import (
    batch_signed_features,
    losses_from_scores,
)
from .subgrad import ActiveSet, Layer, SparseGrad, min_max_entries

__all__ = ["ConsistencyError", "UpdateReport", "VectorMaxTree", "TraceForest"]


class ConsistencyError(RuntimeError):
    """Incremental state diverged from a from-scratch rebuild."""


def _next_pow2(n):
    return 1 << max(0, (int(n) - 1).bit_length())


@dataclass
class UpdateReport:
    """Work accounting for one sparse update application."""

    alpha: float = 0.0
    leaves_updated: int = 0      # (sample, tree) leaf/block writes
    trees_touched: int = 0       # (sample, tree) root-path walks
    rows_refreshed: int = 0      # samples whose loss was recomputed
    w0_applied: bool = False


class VectorMaxTree:
    """One max tournament tree with batched leaf assignment.

    Heap layout in a flat array: index 0 unused, internals 1..cap-1, leaves
    cap..2cap-1 (padding -inf). Batched writes repair each level once via the
    unique dirty parents, so k leaf updates cost O(k log(cap)) node visits.
    """

    def __init__(self, values):
        values = np.asarray(values, dtype=np.float64)
        self.size = values.size
        self.capacity = _next_pow2(max(1, self.size))
        self.nodes = np.full(2 * self.capacity, -np.inf)
        self.nodes[self.capacity : self.capacity + self.size] = values
        lo = self.capacity
        while lo > 1:
            lo //= 2
            self.nodes[lo : 2 * lo] = np.maximum(
                self.nodes[2 * lo : 4 * lo : 2], self.nodes[2 * lo + 1 : 4 * lo : 2]
            )

    def root(self):
        """(max value, smallest leaf index attaining it)."""
        nodes, cap = self.nodes, self.capacity
        idx = 1
        top = nodes[1]
        while idx < cap:
            left = 2 * idx
            idx = left if nodes[left] == top else left + 1
        return float(top), int(idx - cap)

    def leaf_value(self, leaf):
        return float(self.nodes[self.capacity + leaf])

    def assign(self, leaves, values):
        """Set leaves[k] := values[k] and repair all affected paths."""
        leaves = np.asarray(leaves, dtype=np.int64)
        if leaves.size == 0:
            return
        self.nodes[self.capacity + leaves] = values
        pos = np.unique((self.capacity + leaves) >> 1)
        pos = pos[pos >= 1]
        while pos.size:
            self.nodes[pos] = np.maximum(self.nodes[2 * pos], self.nodes[2 * pos + 1])
            pos = np.unique(pos >> 1)
            pos = pos[pos >= 1]


def _block_layout(leaf_count, max_block_leaves=128):
    """(capacity, block width, block-leaf count) for a blocked tree."""
    cap = _next_pow2(max(1, leaf_count))
    n_blocks = min(cap, max_block_leaves)
    return cap, cap // n_blocks, n_blocks


class _TreePlanes:
    """A bank of (samples x trees) tournament trees stored plane-major.

    nodes[j] holds heap node j for every (sample, tree); blocks at
    nodes[m + b] cover implicit leaves [b*width, (b+1)*width). The leaf
    values themselves live with the caller (weights plus caches), which
    supplies old/new leaf columns on update.
    """

    def __init__(self, n_rows, n_trees, leaf_count, is_max, max_block_leaves):
        self.rows = n_rows
        self.trees = n_trees
        self.leaves = leaf_count
        self.is_max = is_max
        _, self.width, self.m = _block_layout(leaf_count, max_block_leaves)
        fill = -np.inf if is_max else np.inf
        self.nodes = np.full((2 * self.m, n_rows, n_trees), fill)
        self._op = np.maximum if is_max else np.minimum

    @property
    def roots(self):
        return self.nodes[1]

    def block_span(self, leaf):
        b = leaf // self.width
        lo = b * self.width
        return b, lo, min(lo + self.width, self.leaves)

    def build_from_blocks(self):
        """Internal levels from already-filled block planes."""
        lo = self.m
        while lo > 1:
            lo //= 2
            self.nodes[lo : 2 * lo] = self._op(
                self.nodes[2 * lo : 4 * lo : 2], self.nodes[2 * lo + 1 : 4 * lo : 2]
            )

    def walk_up(self, block, rows=None, col=None):
        """Recompute the path from one block plane to the root.

        rows/col restrict the repair to a subset of samples / one tree.
        """
        pos = self.m + block
        while pos > 1:
            pos >>= 1
            left, right = self.nodes[2 * pos], self.nodes[2 * pos + 1]
            if col is None and rows is None:
                self.nodes[pos] = self._op(left, right)
            elif col is None:
                self.nodes[pos][rows] = self._op(left[rows], right[rows])
            elif rows is None:
                self.nodes[pos][:, col] = self._op(left[:, col], right[:, col])
            else:
                self.nodes[pos][rows, col] = self._op(left[rows, col], right[rows, col])

    def update_leaf_column(self, leaf, col, old_vals, new_vals, rows=None):
        """Leaf `leaf` of tree `col` changed from old_vals to new_vals.

        The block minimum/maximum is repaired in O(1) per sample; the block
        is re-scanned only for samples where the previous winner moved the
        wrong way. `rescan(rows)` must return the exact block extremum.
        Returns the rescan row indices (callers provide the scan).
        """
        b, lo, hi = self.block_span(leaf)
        plane = self.nodes[self.m + b]
        block = plane[:, col] if col is not None else plane
        if rows is not None:
            block = block[rows]
        if self.is_max:
            needs_scan = (old_vals == block) & (new_vals < block)
        else:
            needs_scan = (old_vals == block) & (new_vals > block)
        better = self._op(block, new_vals)
        self._write_block(b, col, rows, better)
        return b, needs_scan

    def _write_block(self, b, col, rows, values):
        plane = self.nodes[self.m + b]
        if col is None and rows is None:
            plane[:] = values
        elif col is None:
            plane[rows] = values
        elif rows is None:
            plane[:, col] = values
        else:
            plane[rows, col] = values


class TraceForest:
    """Live forward state of a MinMaxModel over a fixed dataset."""

    def __init__(self, model, X, y, max_block_leaves=128, build_chunk_bytes=2.0e8):
        self.model = model
        self.X = np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.int64)
        if self.X.shape[1] != model.n_features:
            raise ValueError("dataset feature count does not match model")
        self.n = self.X.shape[0]
        self.p2 = 2 * model.n_features
        self.h = model.n_hidden
        self.c = model.n_classes
        self._max_block_leaves = max_block_leaves
        self._build_chunk_bytes = float(build_chunk_bytes)
        self._build()

    # -- construction -------------------------------------------------------

    def _build(self):
        model, n = self.model, self.n
        self.signed = batch_signed_features(model, self.X)
        self.min_planes = _TreePlanes(n, self.h, self.p2, False, self._max_block_leaves)
        self.max_planes = _TreePlanes(n, self.c, self.h, True, self._max_block_leaves)

        bw = self.min_planes.width
        chunk = max(1, int(self._build_chunk_bytes // (8 * max(1, bw) * self.h)))
        for b in range(self.min_planes.m):
            lo, hi = b * bw, min((b + 1) * bw, self.p2)
            if lo >= self.p2:
                break
            plane = self.min_planes.nodes[self.min_planes.m + b]
            for r0 in range(0, n, chunk):
                r1 = min(r0 + chunk, n)
                plane[r0:r1] = np.min(
                    self.signed[r0:r1, lo:hi, None] + model.w_min[None, lo:hi, :],
                    axis=1,
                )
        self.min_planes.build_from_blocks()
        self.hidden = self.min_planes.roots          # (N, H) live view

        bw = self.max_planes.width
        for b in range(self.max_planes.m):
            lo, hi = b * bw, min((b + 1) * bw, self.h)
            if lo >= self.h:
                break
            self.max_planes.nodes[self.max_planes.m + b] = np.max(
                self.hidden[:, lo:hi, None] + model.w_max[None, lo:hi, :], axis=1
            )
        self.max_planes.build_from_blocks()
        self.scores = self.max_planes.roots          # (N, C) live view

        self.lse, self.loss = losses_from_scores(self.scores, self.y)
        self.loss_tree = VectorMaxTree(self.loss)

    # -- reads ---------------------------------------------------------------

    def max_loss(self):
        """(worst loss, worst sample index), from the loss tree root."""
        return self.loss_tree.root()

    def yhat(self, row):
        return np.exp(self.scores[row] - self.lse[row])

    def active_set(self):
        """Winning indices at the current worst sample."""
        _, n_star = self.loss_tree.root()
        winner_hidden = np.argmax(
            self.hidden[n_star][:, None] + self.model.w_max, axis=0
        )
        winner_input = np.argmin(
            self.signed[n_star][:, None] + self.model.w_min[:, winner_hidden], axis=0
        )
        return ActiveSet(
            sample=int(n_star),
            label=int(self.y[n_star]),
            winner_hidden=winner_hidden.astype(np.int64),
            winner_input=winner_input.astype(np.int64),
        )

    def sparse_grad(self, active):
        return SparseGrad(
            min_max_entries(
                self.yhat(active.sample),
                active.label,
                self.X[active.sample],
                active.winner_hidden,
                active.winner_input,
            )
        )

    def memory_bytes(self):
        """Bytes held by the trace forest (trees, caches, loss tree)."""
        return (
            self.min_planes.nodes.nbytes
            + self.max_planes.nodes.nbytes
            + self.signed.nbytes
            + self.lse.nbytes
            + self.loss.nbytes
            + self.loss_tree.nodes.nbytes
        )

    # -- incremental updates ---------------------------------------------------

    def apply_grad(self, grad, alpha, update_w0=True):
        """Apply weights -= alpha * grad and repair all affected state.

        Entries are grouped per layer; the expansion entries are only applied
        when `update_w0` is set. Returns an UpdateReport of touched work.
        """
        report = UpdateReport(alpha=float(alpha))
        if alpha == 0.0 or not grad.entries:
            return report
        changed_rows = np.zeros(self.n, dtype=bool)

        max_entries = grad.by_layer(Layer.MAX)
        if max_entries:
            self._apply_max_entries(max_entries, alpha, changed_rows, report)
        min_entries = grad.by_layer(Layer.MIN)
        if min_entries:
            self._apply_min_entries(min_entries, alpha, changed_rows, report)
        pattern_entries = grad.by_layer(Layer.PATTERN)
        if pattern_entries and update_w0:
            self._apply_pattern_entries(pattern_entries, alpha, changed_rows, report)
            report.w0_applied = True

        rows = np.nonzero(changed_rows)[0]
        if rows.size:
            self.lse[rows], self.loss[rows] = losses_from_scores(
                self.scores[rows], self.y[rows]
            )
            self.loss_tree.assign(rows, self.loss[rows])
        report.rows_refreshed = int(rows.size)
        return report

    # max layer ---------------------------------------------------------------

    def _apply_max_entries(self, entries, alpha, changed_rows, report):
        for e in entries:
            h, d = e.index
            old_leaf = self.hidden[:, h] + self.model.w_max[h, d]
            self.model.w_max[h, d] -= alpha * e.value
            new_leaf = self.hidden[:, h] + self.model.w_max[h, d]
            old_root = self.scores[:, d].copy()
            self._update_max_leaf(h, d, old_leaf, new_leaf, rows=None)
            changed_rows |= old_root != self.scores[:, d]
            report.leaves_updated += self.n
            report.trees_touched += self.n

    def _update_max_leaf(self, leaf, col, old_vals, new_vals, rows):
        """Repair max tree column `col` after one leaf changed."""
        planes = self.max_planes
        b, scan = planes.update_leaf_column(leaf, col, old_vals, new_vals, rows)
        if np.any(scan):
            lo, hi = b * planes.width, min((b + 1) * planes.width, self.h)
            scan_rows = np.nonzero(scan)[0] if rows is None else rows[scan]
            planes.nodes[planes.m + b][scan_rows, col] = np.max(
                self.hidden[scan_rows, lo:hi] + self.model.w_max[lo:hi, col], axis=1
            )
        planes.walk_up(b, rows=rows, col=col)

    # min layer ---------------------------------------------------------------

    def _apply_min_entries(self, entries, alpha, changed_rows, report):
        for e in entries:
            i, h = e.index
            old_leaf = self.signed[:, i] + self.model.w_min[i, h]
            self.model.w_min[i, h] -= alpha * e.value
            new_leaf = self.signed[:, i] + self.model.w_min[i, h]
            old_root = self.hidden[:, h].copy()
            self._update_min_leaf(i, h, old_leaf, new_leaf)
            moved = np.nonzero(old_root != self.hidden[:, h])[0]
            report.leaves_updated += self.n
            report.trees_touched += self.n
            if moved.size:
                self._cascade_hidden_rows(
                    moved, old_root[moved], int(h), changed_rows, report
                )

    def _update_min_leaf(self, leaf, col, old_vals, new_vals):
        planes = self.min_planes
        b, scan = planes.update_leaf_column(leaf, col, old_vals, new_vals, rows=None)
        if np.any(scan):
            lo, hi = b * planes.width, min((b + 1) * planes.width, self.p2)
            scan_rows = np.nonzero(scan)[0]
            planes.nodes[planes.m + b][scan_rows, col] = np.min(
                self.signed[scan_rows, lo:hi] + self.model.w_min[lo:hi, col], axis=1
            )
        planes.walk_up(b, rows=None, col=col)

    def _cascade_hidden_rows(self, rows, old_hidden_rows, h_leaf, changed_rows, report):
        """Hidden unit h moved for `rows`: fix leaf h in their class trees."""
        planes = self.max_planes
        old_leaf = old_hidden_rows[:, None] + self.model.w_max[h_leaf]
        new_leaf = self.hidden[rows, h_leaf][:, None] + self.model.w_max[h_leaf]
        old_scores = self.scores[rows].copy()
        b, scan = planes.update_leaf_column(h_leaf, None, old_leaf, new_leaf, rows=rows)
        if np.any(scan):
            lo, hi = b * planes.width, min((b + 1) * planes.width, self.h)
            si, sj = np.nonzero(scan)
            planes.nodes[planes.m + b][rows[si], sj] = np.max(
                self.hidden[rows[si], lo:hi] + self.model.w_max[lo:hi, sj].T, axis=1
            )
        planes.walk_up(b, rows=rows, col=None)
        moved = np.any(old_scores != self.scores[rows], axis=1)
        changed_rows[rows[moved]] = True
        report.leaves_updated += int(rows.size) * self.c
        report.trees_touched += int(rows.size) * self.c

    # expansion layer ------------------------------------------------------------

    def _apply_pattern_entries(self, entries, alpha, changed_rows, report):
        idx = np.array([e.index[0] for e in entries], dtype=np.int64)
        deltas = np.array([-alpha * e.value for e in entries])
        np.add.at(self.model.w_pattern, idx, deltas)
        idx = np.unique(idx)
        old_hidden = self.hidden.copy()
        for i in idx:
            old_col = self.signed[:, i].copy()
            self.signed[:, i] = self.model.w_pattern[i] * self.X[:, i // 2]
            self._update_min_leaf_all_trees(int(i), old_col)
            report.leaves_updated += self.n * self.h
            report.trees_touched += self.n * self.h
        moved_rows = np.nonzero(np.any(old_hidden != self.hidden, axis=1))[0]
        if moved_rows.size:
            self._rebuild_max_rows(moved_rows, changed_rows, report)

    def _update_min_leaf_all_trees(self, leaf, old_col):
        """Signed feature `leaf` changed for all samples: repair every hidden
        tree's block via the O(1) comparison, re-scanning only where needed."""
        planes = self.min_planes
        old_vals = old_col[:, None] + self.model.w_min[leaf]      # (N, H)
        new_vals = self.signed[:, leaf][:, None] + self.model.w_min[leaf]
        b, scan = planes.update_leaf_column(leaf, None, old_vals, new_vals, rows=None)
        if np.any(scan):
            lo, hi = b * planes.width, min((b + 1) * planes.width, self.p2)
            si, sj = np.nonzero(scan)
            planes.nodes[planes.m + b][si, sj] = np.min(
                self.signed[si, lo:hi] + self.model.w_min[lo:hi, sj].T, axis=1
            )
        planes.walk_up(b)

    def _rebuild_max_rows(self, rows, changed_rows, report):
        """Rebuild the class trees of `rows` from their (updated) hidden values."""
        planes = self.max_planes
        old_scores = self.scores[rows].copy()
        bw = planes.m * planes.width // planes.m  # == planes.width
        temp = np.full((2 * planes.m, rows.size, self.c), -np.inf)
        for b in range(planes.m):
            lo, hi = b * planes.width, min((b + 1) * planes.width, self.h)
            if lo >= self.h:
                break
            temp[planes.m + b] = np.max(
                self.hidden[rows, lo:hi][:, :, None] + self.model.w_max[None, lo:hi, :],
                axis=1,
            )
        lo = planes.m
        while lo > 1:
            lo //= 2
            temp[lo : 2 * lo] = np.maximum(
                temp[2 * lo : 4 * lo : 2], temp[2 * lo + 1 : 4 * lo : 2]
            )
        planes.nodes[:, rows, :] = temp
        moved = np.any(old_scores != self.scores[rows], axis=1)
        changed_rows[rows[moved]] = True
        report.leaves_updated += int(rows.size) * self.c
        report.trees_touched += int(rows.size) * self.c

    # -- auditing --------------------------------------------------------------

    def rebuilt_arrays(self):
        """Fresh hidden/scores/lse/loss from the current weights (reference path)."""
        from .model import batch_hidden, batch_scores

        signed = batch_signed_features(self.model, self.X)
        hidden = batch_hidden(self.model, signed)
        scores = batch_scores(self.model, hidden)
        lse, loss = losses_from_scores(scores, self.y)
        return {
            "signed": signed, "hidden": hidden, "scores": scores,
            "lse": lse, "loss": loss,
        }

    def audit(self, tol=1e-6):
        """Compare live state against a from-scratch rebuild; raise on divergence."""
        ref = self.rebuilt_arrays()
        worst = 0.0
        for name, mine in (
            ("signed", self.signed), ("hidden", self.hidden),
            ("scores", self.scores), ("lse", self.lse), ("loss", self.loss),
        ):
            worst = max(worst, float(np.max(np.abs(mine - ref[name]))))
        tree_leaves = self.loss_tree.nodes[
            self.loss_tree.capacity : self.loss_tree.capacity + self.n
        ]
        worst = max(worst, float(np.max(np.abs(tree_leaves - ref["loss"]))))
        if not np.isfinite(worst) or worst > tol:
            raise ConsistencyError(
                f"incremental state diverged from rebuild by {worst:.3e} (tol {tol:.1e})"
            )
        return worst
