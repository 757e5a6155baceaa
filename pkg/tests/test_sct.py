"""Tournament tree unit tests: build/update/root contracts and invariants."""

import numpy as np
import pytest

from tropicnet.sct import MaxTree, MinTree, build


class TestBuild:
    def test_known_max(self):
        tree = MaxTree([3, 1, 4, 1, 5, 9, 2, 6])
        assert tree.root() == (9.0, 5)

    def test_singleton(self):
        tree = MaxTree([7])
        assert tree.capacity == 1
        assert tree.root() == (7.0, 0)

    def test_min_semantics(self):
        tree = MinTree([3, 1, 4, 1, 5])
        assert tree.root() == (1.0, 1)  # smallest index among the two 1s

    def test_build_dispatcher(self):
        assert build([2, 9], "max").root() == (9.0, 1)
        assert build([2, 9], "min").root() == (2.0, 0)
        with pytest.raises(ValueError):
            build([1], "median")

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            MaxTree([])

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            MaxTree([1.0, np.inf])

    def test_random_roots_match_scan(self):
        """Root equals the linear-scan extremum for many random sizes."""
        rng = np.random.default_rng(42)
        for _ in range(300):
            n = int(rng.integers(1, 600))
            values = rng.normal(size=n)
            tree = MaxTree(values)
            value, winner = tree.root()
            assert value == values.max()
            assert winner == int(np.argmax(values))
            mtree = MinTree(values)
            value, winner = mtree.root()
            assert value == values.min()
            assert winner == int(np.argmin(values))


class TestUpdate:
    def test_known_sequence(self):
        tree = MaxTree([3, 1, 4, 1, 5, 9, 2, 6])
        result = tree.update(5, 0)
        assert result.old_root == 9.0
        assert result.new_root == 6.0
        assert tree.root() == (6.0, 7)
        assert result.nodes_touched == 4  # log2(8) + 1

    def test_same_value_touches_full_path(self):
        tree = MaxTree([3, 1, 4, 1, 5, 9, 2, 6])
        before = tree.root()
        result = tree.update(2, 4.0)
        assert tree.root() == before
        assert result.nodes_touched == 4

    def test_out_of_range(self):
        tree = MaxTree([1, 2, 3])
        with pytest.raises(IndexError):
            tree.update(3, 1.0)
        with pytest.raises(IndexError):
            tree.leaf_value(5)

    def test_update_rejects_non_finite(self):
        tree = MaxTree([1, 2, 3])
        with pytest.raises(ValueError):
            tree.update(0, np.nan)

    def test_random_updates_match_scan(self):
        """Shadow-array oracle over a long random update sequence."""
        rng = np.random.default_rng(7)
        shadow = rng.normal(size=1024)
        tree = MaxTree(shadow)
        for _ in range(2000):
            leaf = int(rng.integers(1024))
            value = float(rng.normal())
            shadow[leaf] = value
            tree.update(leaf, value)
            root_value, winner = tree.root()
            assert root_value == shadow.max()
            assert winner == int(np.argmax(shadow))

    def test_update_locality_one_node_per_level(self):
        """Exactly one touched node per level, leaf to root."""
        rng = np.random.default_rng(3)
        tree = MaxTree(rng.normal(size=37))
        for _ in range(50):
            leaf = int(rng.integers(37))
            result = tree.update(leaf, float(rng.normal()))
            assert result.nodes_touched == tree.height + 1
            levels = sorted(int(np.log2(i)) for i in result.touched)
            assert levels == list(range(tree.height + 1))


class TestInvariants:
    def test_heap_property_full_traversal(self):
        rng = np.random.default_rng(11)
        tree = MaxTree(rng.normal(size=100))
        for _ in range(200):
            tree.update(int(rng.integers(100)), float(rng.normal()))
        cap = tree.capacity
        vals = tree._values
        wins = tree._winners
        for node in range(1, cap):
            assert vals[node] == max(vals[2 * node], vals[2 * node + 1])
            child = 2 * node if vals[2 * node] >= vals[2 * node + 1] else 2 * node + 1
            assert wins[node] == wins[child]

    def test_leaf_value_roundtrip(self):
        tree = MaxTree([3, 1, 4, 1])
        assert tree.leaf_value(2) == 4.0
        tree.update(2, -2.0)
        assert tree.leaf_value(2) == -2.0
        np.testing.assert_array_equal(tree.leaf_values(), [3, 1, -2, 1])

    def test_tie_breaking_smallest_index(self):
        tree = MaxTree([5.0, 5.0, 5.0, 5.0])
        assert tree.root() == (5.0, 0)
        tree.update(0, 1.0)
        assert tree.root() == (5.0, 1)
        mtree = MinTree([2.0, 2.0, 2.0])
        assert mtree.root() == (2.0, 0)

    def test_padding_never_wins(self):
        tree = MaxTree([-50.0, -60.0, -70.0])  # capacity 4, one -inf pad
        value, winner = tree.root()
        assert (value, winner) == (-50.0, 0)
        mtree = MinTree([50.0, 60.0, 70.0])
        assert mtree.root() == (50.0, 0)
