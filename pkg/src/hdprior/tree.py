"""Variance-decomposition trees.

A tree recursively partitions the set of random effects down to singleton
leaves.  It defines the reparametrization between the per-effect variances
and (total, per-split simplex weights), the Jacobian of that map, and the
effective covariance of any node when its internal splits sit at their base
models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError

__all__ = [
    "DecompositionTree",
    "Split",
    "SplitPriorSpec",
    "WeightAssignment",
    "effective_covariance",
    "leaf_paths",
    "log_jacobian",
    "tree_from_nested",
    "validate",
    "variances_to_weights",
    "weights_to_variances",
]

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class SplitPriorSpec:
    """Prior requested for one split, before calibration."""

    kind: str  # "pc" or "dirichlet"
    median: float | None = None  # pc with an endpoint base; None -> default 0.25
    concentration: float | None = None  # dirichlet; None -> calibrated default

    def __post_init__(self) -> None:
        if self.kind not in ("pc", "dirichlet"):
            raise ValidationError(f"unknown split prior kind {self.kind!r}")
        if self.median is not None and not 0.0 < self.median < 1.0:
            raise ValidationError(f"pc median must be in (0, 1), got {self.median}")
        if self.concentration is not None and self.concentration <= 0.0:
            raise ValidationError("dirichlet concentration must be positive")


@dataclass(frozen=True)
class Split:
    """One split: an ordered partition of its parent node."""

    index: int  # 1-based, preorder
    parent: tuple[str, ...]
    children: tuple[tuple[str, ...], ...]
    base: tuple[float, ...]
    prior: SplitPriorSpec


@dataclass(frozen=True)
class DecompositionTree:
    """Ordered leaf names plus the splits that partition them."""

    effects: tuple[str, ...]
    splits: tuple[Split, ...]

    @property
    def n_effects(self) -> int:
        return len(self.effects)

    def split_over(self, node: tuple[str, ...]) -> Split | None:
        want = frozenset(node)
        for s in self.splits:
            if frozenset(s.parent) == want:
                return s
        return None


@dataclass(frozen=True)
class WeightAssignment:
    """A point in the (total, weights) coordinate system."""

    t: float
    omega: tuple[tuple[float, ...], ...]

    def validated(self, tree: DecompositionTree) -> "WeightAssignment":
        if len(self.omega) != len(tree.splits):
            raise ValidationError(
                f"assignment has {len(self.omega)} weight vectors, tree has {len(tree.splits)} splits"
            )
        for s, w in zip(tree.splits, self.omega):
            if len(w) != len(s.children):
                raise ValidationError(
                    f"split {s.index}: weight vector has {len(w)} entries, expected {len(s.children)}"
                )
            if any(x < -1e-12 or x > 1.0 + 1e-12 for x in w):
                raise ValidationError(f"split {s.index}: weights must lie in [0, 1]")
            if abs(sum(w) - 1.0) > 1e-12 * max(1.0, len(w)):
                raise ValidationError(f"split {s.index}: weights must sum to 1")
        return self


def _check_simplex(values: Sequence[float], where: str) -> tuple[float, ...]:
    vals = tuple(float(v) for v in values)
    if any(v < -SIMPLEX_TOL or v > 1.0 + SIMPLEX_TOL for v in vals):
        raise ValidationError(f"{where}: base-model entries must lie in [0, 1]")
    if abs(sum(vals) - 1.0) > SIMPLEX_TOL:
        raise ValidationError(f"{where}: base model must sum to 1, got {sum(vals)}")
    return vals


def tree_from_nested(root: dict, where: str = "tree") -> DecompositionTree:
    """Build a tree from the nested node form used by the model file.

    A node is either {"leaf": name} or
    {"children": [node, ...], "base": [...], "prior": SplitPriorSpec}.
    Splits are indexed in preorder (parent before descendants, children in
    file order).
    """
    splits: list[Split] = []

    def walk(node: dict, path: str) -> tuple[str, ...]:
        if "leaf" in node:
            return (str(node["leaf"]),)
        children = node.get("children")
        if not isinstance(children, list) or len(children) < 2:
            raise ValidationError(f"{path}: a split needs at least two children")
        slot = len(splits)
        splits.append(None)  # type: ignore[arg-type]  # reserve preorder slot
        child_sets = []
        seen: set[str] = set()
        for i, ch in enumerate(children):
            cs = walk(ch, f"{path}.children[{i}]")
            overlap = seen & set(cs)
            if overlap:
                raise ValidationError(
                    f"{path}: children overlap on effects {sorted(overlap)}"
                )
            seen |= set(cs)
            child_sets.append(cs)
        k = len(child_sets)
        base = node.get("base")
        if base is None:
            base = [1.0 / k] * k
        if len(base) != k:
            raise ValidationError(f"{path}: base has {len(base)} entries for {k} children")
        base = _check_simplex(base, path)
        prior = node.get("prior")
        if prior is None:
            prior = SplitPriorSpec(kind="dirichlet")
        elif isinstance(prior, dict):
            prior = SplitPriorSpec(**prior)
        parent = tuple(name for cs in child_sets for name in cs)
        splits[slot] = Split(
            index=slot + 1,
            parent=parent,
            children=tuple(child_sets),
            base=base,
            prior=prior,
        )
        return parent

    effects = walk(root, where)
    tree = DecompositionTree(effects=effects, splits=tuple(splits))
    validate(tree)
    return tree


def validate(tree: DecompositionTree) -> dict:
    """Check the partition property and return diagnostics.

    Diagnostics include the descendant-split map D(s) and per-split child
    counts.  Raises ValidationError for overlapping children, unreachable
    effects, empty children, or bad base models.
    """
    names = tree.effects
    if len(set(names)) != len(names):
        raise ValidationError("effect names must be unique")
    universe = frozenset(names)

    nodes: dict[frozenset, Split] = {}
    for s in tree.splits:
        key = frozenset(s.parent)
        if key in nodes:
            raise ValidationError(f"node {sorted(key)} is split twice")
        nodes[key] = s

    descendants: dict[int, list[int]] = {s.index: [] for s in tree.splits}
    reached: set[str] = set()

    def walk(node: frozenset) -> list[int]:
        if len(node) == 1:
            (name,) = node
            if name in reached:
                raise ValidationError(f"effect {name!r} reachable more than once")
            reached.add(name)
            return []
        split = nodes.get(node)
        if split is None:
            raise ValidationError(
                f"non-singleton node {sorted(node)} has no split (leaves must be singletons)"
            )
        seen: set[str] = set()
        total = 0
        for child in split.children:
            if len(child) == 0:
                raise ValidationError(f"split {split.index}: empty child")
            cset = set(child)
            if len(cset) != len(child):
                raise ValidationError(f"split {split.index}: duplicate effect inside a child")
            if cset & seen:
                raise ValidationError(
                    f"split {split.index}: children overlap on {sorted(cset & seen)}"
                )
            seen |= cset
            total += len(child)
        if seen != set(split.parent) or total != len(split.parent):
            raise ValidationError(
                f"split {split.index}: children do not partition the parent node"
            )
        _check_simplex(split.base, f"split {split.index}")
        below: list[int] = []
        for child in split.children:
            below.extend(walk(frozenset(child)))
        descendants[split.index] = sorted(below)
        return below + [split.index]

    walk(universe)
    if reached != set(names):
        raise ValidationError(f"effects never reached: {sorted(set(names) - reached)}")
    if len(tree.splits) > max(len(names) - 1, 0):
        raise ValidationError("more splits than a tree over these effects allows")

    return {
        "n_effects": len(names),
        "n_splits": len(tree.splits),
        "descendants": descendants,
        "child_counts": {s.index: len(s.children) for s in tree.splits},
    }


def leaf_paths(tree: DecompositionTree) -> dict[str, list[tuple[int, int]]]:
    """Root-to-leaf paths: effect name -> [(split position, child position)].

    Positions are 0-based offsets into tree.splits and split.children.
    """
    paths: dict[str, list[tuple[int, int]]] = {name: [] for name in tree.effects}
    for pos, split in enumerate(tree.splits):
        for c, child in enumerate(split.children):
            for name in child:
                paths[name].append((pos, c))
    # splits are in preorder, so appending in split order yields the
    # root-to-leaf order already
    return paths


def weights_to_variances(tree: DecompositionTree, w: WeightAssignment) -> np.ndarray:
    """Per-effect variances: t times the product of weights along each path."""
    w.validated(tree)
    paths = leaf_paths(tree)
    out = np.empty(len(tree.effects))
    for i, name in enumerate(tree.effects):
        prod = 1.0
        for pos, c in paths[name]:
            prod *= w.omega[pos][c]
        out[i] = w.t * prod
    return out


def variances_to_weights(tree: DecompositionTree, variances) -> WeightAssignment:
    """Exact inverse of weights_to_variances; errors on zero parent mass."""
    v = np.asarray(variances, dtype=float)
    if v.shape != (len(tree.effects),):
        raise ValidationError(
            f"expected {len(tree.effects)} variances, got shape {v.shape}"
        )
    if (v < 0).any():
        raise ValidationError("variances must be nonnegative")
    byname = dict(zip(tree.effects, v))
    omega = []
    for split in tree.splits:
        child_sums = [sum(byname[n] for n in child) for child in split.children]
        total = sum(child_sums)
        if total <= 0.0:
            raise ValidationError(
                f"split {split.index}: parent node {sorted(split.parent)} has zero total "
                "variance; the weight vector is undefined"
            )
        omega.append(tuple(cs / total for cs in child_sums))
    return WeightAssignment(t=float(v.sum()), omega=tuple(omega))


def log_jacobian(tree: DecompositionTree, w: WeightAssignment) -> float:
    """log |det d(variances)/d(t, free weights)|.

    Equals (N-1) log t plus, for every split, (K_s - 1) times the log of the
    fraction of t reaching the split's parent.  Free weights drop each
    split's last coordinate.
    """
    w.validated(tree)
    if w.t <= 0.0:
        raise ValidationError("total variance must be positive")
    n = len(tree.effects)
    out = (n - 1) * math.log(w.t)
    # fraction of t reaching each node
    frac: dict[frozenset, float] = {frozenset(tree.effects): 1.0}
    for pos, split in enumerate(tree.splits):
        m_s = frac[frozenset(split.parent)]
        if m_s <= 0.0:
            raise ValidationError(
                f"split {split.index}: zero mass reaches its parent; Jacobian undefined"
            )
        out += (len(split.children) - 1) * math.log(m_s)
        for c, child in enumerate(split.children):
            frac[frozenset(child)] = m_s * w.omega[pos][c]
    return out


def base_leaf_weights(tree: DecompositionTree, node: tuple[str, ...]) -> dict[str, float]:
    """Weight of each leaf under ``node`` when every split strictly inside
    the node sits at its base model (the node's own parent split excluded)."""
    inside = frozenset(node)
    weights = {name: 1.0 for name in node}
    for split in tree.splits:
        if not frozenset(split.parent) <= inside:
            continue
        for c, child in enumerate(split.children):
            for name in child:
                weights[name] *= split.base[c]
    return weights


def effective_covariance(
    tree: DecompositionTree,
    node: tuple[str, ...],
    covariances: Mapping[str, np.ndarray],
) -> np.ndarray:
    """Covariance of a node conditioned on base models below it:
    the base-weighted sum of its leaves' scaled covariances."""
    missing = [n for n in node if n not in covariances]
    if missing:
        raise ValidationError(f"no covariance for effects {missing}")
    weights = base_leaf_weights(tree, node)
    first = covariances[node[0]]
    out = np.zeros_like(first)
    for name in node:
        cov = covariances[name]
        if cov.shape != first.shape:
            raise ValidationError("effect covariances disagree on observation count")
        out += weights[name] * cov
    return out
