import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hdprior import tree as tr
from hdprior.errors import ValidationError


def pc(median=0.25):
    return tr.SplitPriorSpec(kind="pc", median=median)


def flat_tree():
    """Single triple split over {a, b, c} (the unstructured layout)."""
    return tr.tree_from_nested(
        {
            "children": [{"leaf": "a"}, {"leaf": "b"}, {"leaf": "c"}],
            "prior": tr.SplitPriorSpec(kind="dirichlet", concentration=1.0),
        }
    )


def nested_tree():
    """{a, b} vs {c} at the root, then a vs b (the structured layout)."""
    return tr.tree_from_nested(
        {
            "children": [
                {
                    "children": [{"leaf": "a"}, {"leaf": "b"}],
                    "base": [0, 1],
                    "prior": pc(),
                },
                {"leaf": "c"},
            ],
            "base": [0, 1],
            "prior": pc(),
        }
    )


class TestValidate:
    def test_flat(self):
        t = flat_tree()
        diag = tr.validate(t)
        assert diag["n_splits"] == 1
        assert diag["child_counts"][1] == 3

    def test_nested_descendants(self):
        t = nested_tree()
        diag = tr.validate(t)
        assert diag["n_splits"] == 2
        assert diag["descendants"][1] == [2]
        assert diag["descendants"][2] == []

    def test_overlapping_children(self):
        splits = (
            tr.Split(index=1, parent=("a", "b", "c"),
                     children=(("a", "b"), ("b", "c")), base=(0.5, 0.5), prior=pc()),
        )
        t = tr.DecompositionTree(effects=("a", "b", "c"), splits=splits)
        with pytest.raises(ValidationError, match="partition|overlap"):
            tr.validate(t)

    def test_unreachable_effect(self):
        splits = (
            tr.Split(index=1, parent=("a", "b"), children=(("a",), ("b",)),
                     base=(0.5, 0.5), prior=pc()),
        )
        t = tr.DecompositionTree(effects=("a", "b", "c"), splits=splits)
        with pytest.raises(ValidationError):
            tr.validate(t)

    def test_single_leaf_tree_is_valid(self):
        t = tr.tree_from_nested({"leaf": "only"})
        assert tr.validate(t)["n_splits"] == 0

    def test_bad_base_rejected(self):
        with pytest.raises(ValidationError, match="sum to 1"):
            tr.tree_from_nested(
                {"children": [{"leaf": "a"}, {"leaf": "b"}], "base": [0.5, 0.4],
                 "prior": pc()}
            )


class TestTransforms:
    def test_single_split(self):
        t = flat_tree()
        w = tr.WeightAssignment(t=1.0, omega=((0.2, 0.3, 0.5),))
        assert np.allclose(tr.weights_to_variances(t, w), [0.2, 0.3, 0.5])

    def test_nested_arithmetic(self):
        t = nested_tree()
        w = tr.WeightAssignment(t=2.0, omega=((0.75, 0.25), (0.4, 0.6)))
        assert np.allclose(tr.weights_to_variances(t, w), [0.6, 0.9, 0.5])

    def test_inverse_single(self):
        t = flat_tree()
        w = tr.variances_to_weights(t, [0.2, 0.3, 0.5])
        assert w.t == pytest.approx(1.0, abs=1e-15)
        assert np.allclose(w.omega[0], [0.2, 0.3, 0.5])

    def test_nested_weight_formula(self):
        t = nested_tree()
        va, vb, vc = 0.3, 0.5, 0.2
        w = tr.variances_to_weights(t, [va, vb, vc])
        total = va + vb + vc
        assert w.omega[0] == pytest.approx(((va + vb) / total, vc / total))
        assert w.omega[1] == pytest.approx((va / (va + vb), vb / (va + vb)))

    def test_degenerate_parent_mass(self):
        t = nested_tree()
        with pytest.raises(ValidationError, match="zero total"):
            tr.variances_to_weights(t, [0.0, 0.0, 1.0])

    def test_roundtrip_random_trees(self):
        rng = np.random.default_rng(3)
        for trial in range(100):
            t = _random_tree(rng)
            v = rng.uniform(0.05, 3.0, size=len(t.effects))
            w = tr.variances_to_weights(t, v)
            back = tr.weights_to_variances(t, w)
            assert np.abs(back - v).max() < 1e-12
            assert abs(back.sum() - w.t) < 1e-12 * max(1.0, w.t)

    @given(st.lists(st.floats(min_value=0.01, max_value=10.0), min_size=3, max_size=3))
    def test_conservation(self, values):
        t = nested_tree()
        w = tr.variances_to_weights(t, values)
        assert sum(values) == pytest.approx(w.t, rel=1e-14)

    def test_permutation_equivariance(self):
        t = nested_tree()
        w = tr.WeightAssignment(t=1.7, omega=((0.6, 0.4), (0.3, 0.7)))
        v = tr.weights_to_variances(t, w)
        relabel = {"a": "b", "b": "a", "c": "c"}
        t2 = tr.DecompositionTree(
            effects=tuple(relabel[e] for e in t.effects),
            splits=tuple(
                tr.Split(
                    index=s.index,
                    parent=tuple(relabel[e] for e in s.parent),
                    children=tuple(tuple(relabel[e] for e in c) for c in s.children),
                    base=s.base,
                    prior=s.prior,
                )
                for s in t.splits
            ),
        )
        v2 = tr.weights_to_variances(t2, w)
        assert np.array_equal(v, v2)  # same positions, permuted labels


def _random_tree(rng: np.random.Generator) -> tr.DecompositionTree:
    """Random recursive partition of 2..7 effects."""
    n = int(rng.integers(2, 8))
    names = [f"e{i}" for i in range(n)]

    def build(node_names):
        if len(node_names) == 1:
            return {"leaf": node_names[0]}
        k = int(rng.integers(2, len(node_names) + 1))
        cuts = sorted(rng.choice(np.arange(1, len(node_names)), size=k - 1, replace=False))
        groups = np.split(np.array(node_names, dtype=object), cuts)
        return {
            "children": [build(list(g)) for g in groups],
            "prior": tr.SplitPriorSpec(kind="dirichlet", concentration=1.0),
        }

    return tr.tree_from_nested(build(names))


class TestLogJacobian:
    def test_single_dual_split(self):
        t = tr.tree_from_nested(
            {"children": [{"leaf": "a"}, {"leaf": "b"}], "base": [0, 1], "prior": pc()}
        )
        w = tr.WeightAssignment(t=2.0, omega=((0.3, 0.7),))
        assert tr.log_jacobian(t, w) == pytest.approx(math.log(2.0), abs=1e-12)

    def test_nested_three_leaf(self):
        t = nested_tree()
        w = tr.WeightAssignment(t=1.0, omega=((0.5, 0.5), (0.4, 0.6)))
        assert tr.log_jacobian(t, w) == pytest.approx(math.log(0.5), abs=1e-12)

    def test_triple_split_is_t_squared(self):
        t = flat_tree()
        w = tr.WeightAssignment(t=1.0, omega=((0.2, 0.3, 0.5),))
        assert tr.log_jacobian(t, w) == pytest.approx(0.0, abs=1e-12)

    def test_zero_internal_mass(self):
        t = nested_tree()
        w = tr.WeightAssignment(t=1.0, omega=((0.0, 1.0), (0.4, 0.6)))
        with pytest.raises(ValidationError, match="zero mass"):
            tr.log_jacobian(t, w)

    def test_against_numeric_determinant(self):
        """Finite-difference Jacobian of the full map vs the product formula
        on random trees (the formula is not stated anywhere authoritative,
        so this oracle stays in the suite)."""
        rng = np.random.default_rng(17)
        for trial in range(25):
            t = _random_tree(rng)
            n = len(t.effects)
            v = rng.uniform(0.2, 2.0, size=n)
            w = tr.variances_to_weights(t, v)

            def pack(w_):
                free = [w_.t]
                for s, om in zip(t.splits, w_.omega):
                    free.extend(om[:-1])
                return np.array(free)

            def unpack(vec):
                total = vec[0]
                omega = []
                k = 1
                for s in t.splits:
                    kk = len(s.children)
                    head = vec[k:k + kk - 1]
                    omega.append(tuple(head) + (1.0 - head.sum(),))
                    k += kk - 1
                return tr.WeightAssignment(t=total, omega=tuple(omega))

            x0 = pack(w)
            jac = np.zeros((n, n))
            h = 1e-7
            for j in range(n):
                hi = x0.copy()
                lo = x0.copy()
                hi[j] += h
                lo[j] -= h
                f_hi = tr.weights_to_variances(t, unpack(hi))
                f_lo = tr.weights_to_variances(t, unpack(lo))
                jac[:, j] = (f_hi - f_lo) / (2 * h)
            sign, logdet = np.linalg.slogdet(jac)
            assert tr.log_jacobian(t, w) == pytest.approx(logdet, abs=1e-5)


class TestEffectiveCovariance:
    def covs(self):
        rng = np.random.default_rng(2)
        out = {}
        for name in ("a", "b", "c"):
            g = rng.standard_normal((4, 4))
            out[name] = g @ g.T
        return out

    def test_singleton_passthrough(self):
        t = nested_tree()
        covs = self.covs()
        assert np.array_equal(tr.effective_covariance(t, ("b",), covs), covs["b"])

    def test_base_zero_one_selects_preferred(self):
        # node {a, b} whose internal split prefers b: only b's covariance remains
        t = nested_tree()
        covs = self.covs()
        out = tr.effective_covariance(t, ("a", "b"), covs)
        assert np.abs(out - covs["b"]).max() < 1e-12

    def test_weighted_sum_oracle(self):
        # triple base (1/3 each) with a pc sub-split preferring the second child
        t = tr.tree_from_nested(
            {
                "children": [
                    {
                        "children": [{"leaf": "a"}, {"leaf": "b"}],
                        "base": [0, 1],
                        "prior": pc(),
                    },
                    {"leaf": "c"},
                    {"leaf": "d"},
                ],
                "base": [1 / 3, 1 / 3, 1 / 3],
                "prior": tr.SplitPriorSpec(kind="dirichlet", concentration=1.0),
            }
        )
        rng = np.random.default_rng(4)
        covs = {}
        for name in ("a", "b", "c", "d"):
            g = rng.standard_normal((3, 3))
            covs[name] = g @ g.T
        out = tr.effective_covariance(t, ("a", "b", "c", "d"), covs)
        expected = (covs["b"] + covs["c"] + covs["d"]) / 3.0
        assert np.abs(out - expected).max() < 1e-12

    def test_missing_covariance(self):
        t = nested_tree()
        with pytest.raises(ValidationError, match="no covariance"):
            tr.effective_covariance(t, ("a", "b"), {"a": np.eye(2)})
