"""Random-effect covariance construction.

Each supported effect kind is turned into an observation-level scaled
covariance: the effect-level covariance (inverting intrinsic structure
matrices under their constraints where needed) is normalized so the
geometric mean of its marginal variances is one, then mapped to the
observation level through the effect's index map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .errors import ValidationError

__all__ = [
    "CovarianceModel",
    "EffectSpec",
    "besag_structure",
    "build_effect",
    "graph_components",
    "parse_graph",
    "read_graph",
    "rw1_structure",
    "rw2_structure",
    "scale_to_unit_geometric_mean",
]

EFFECT_KINDS = ("iid", "rw1", "rw2", "besag", "fixed_cov")


@dataclass
class EffectSpec:
    """Declaration of one random effect.

    ``index_map`` is 1-based and maps each observation to an effect element;
    when omitted it defaults to the identity (requires size == n).
    ``adjacency`` holds 0-based neighbor lists for besag effects; ``graph``
    optionally records the file the adjacency came from.
    """

    name: str
    kind: str
    size: int = 0
    index_map: np.ndarray | None = None
    constraints: np.ndarray | None = None
    adjacency: list[list[int]] | None = None
    graph: str | None = None
    matrix: np.ndarray | None = None
    prescaled: bool = False

    def __post_init__(self) -> None:
        if self.kind not in EFFECT_KINDS:
            raise ValidationError(
                f"effect {self.name!r}: unknown kind {self.kind!r}; "
                f"expected one of {EFFECT_KINDS}"
            )
        if self.kind == "besag":
            if self.adjacency is None:
                raise ValidationError(f"effect {self.name!r}: besag requires an adjacency graph")
            self.size = len(self.adjacency)
        if self.kind == "fixed_cov":
            if self.matrix is None:
                raise ValidationError(f"effect {self.name!r}: fixed_cov requires a matrix payload")
            self.matrix = np.asarray(self.matrix, dtype=float)
            self.size = self.matrix.shape[0]
        if self.size < 1:
            raise ValidationError(f"effect {self.name!r}: size must be >= 1")
        if self.index_map is not None:
            self.index_map = np.asarray(self.index_map, dtype=int)


@dataclass(frozen=True)
class CovarianceModel:
    """Observation-level scaled covariance of one effect.

    ``sigma_tilde`` is n x n; ``effect_cov`` is the scaled effect-level
    covariance it was assembled from; ``scale_factor`` is the geometric-mean
    variance that was divided out (1.0 when no scaling was needed).
    """

    sigma_tilde: np.ndarray
    rank: int
    scale_factor: float
    effect_cov: np.ndarray = field(repr=False)


# ---------------------------------------------------------------------------
# structure matrices
# ---------------------------------------------------------------------------


def rw1_structure(m: int) -> np.ndarray:
    """First-order random-walk penalty D1' D1 (first forward differences)."""
    if m < 2:
        raise ValidationError("rw1 needs size >= 2")
    d = np.zeros((m - 1, m))
    idx = np.arange(m - 1)
    d[idx, idx] = -1.0
    d[idx, idx + 1] = 1.0
    return d.T @ d


def rw2_structure(m: int) -> np.ndarray:
    """Second-order random-walk penalty D2' D2 (second forward differences)."""
    if m < 3:
        raise ValidationError("rw2 needs size >= 3")
    d = np.zeros((m - 2, m))
    idx = np.arange(m - 2)
    d[idx, idx] = 1.0
    d[idx, idx + 1] = -2.0
    d[idx, idx + 2] = 1.0
    return d.T @ d


def besag_structure(adjacency: list[list[int]]) -> np.ndarray:
    """Besag structure matrix Q = D - A from 0-based neighbor lists."""
    m = len(adjacency)
    q = np.zeros((m, m))
    for i, neigh in enumerate(adjacency):
        for j in neigh:
            if j == i:
                raise ValidationError(f"besag graph has a self-loop at node {i + 1}")
            if not 0 <= j < m:
                raise ValidationError(f"besag graph neighbor {j + 1} out of range at node {i + 1}")
            q[i, j] -= 1.0
        q[i, i] = len(neigh)
    if np.abs(q - q.T).max() > 0:
        raise ValidationError("besag adjacency is not symmetric")
    return q


def graph_components(adjacency: list[list[int]]) -> list[list[int]]:
    """Connected components (sorted node lists) of an undirected graph."""
    m = len(adjacency)
    seen = [False] * m
    comps = []
    for start in range(m):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        comp = []
        while stack:
            i = stack.pop()
            comp.append(i)
            for j in adjacency[i]:
                if not seen[j]:
                    seen[j] = True
                    stack.append(j)
        comps.append(sorted(comp))
    return comps


# ---------------------------------------------------------------------------
# graph file format: line 1 is the node count, then "i d j1 ... jd" (1-based)
# ---------------------------------------------------------------------------


def parse_graph(text: str) -> list[list[int]]:
    tokens_by_line = [
        (lineno, line.split())
        for lineno, line in enumerate(text.splitlines(), start=1)
        if line.strip()
    ]
    if not tokens_by_line:
        raise ValidationError("graph file is empty")
    head_line, head = tokens_by_line[0]
    if len(head) != 1:
        raise ValidationError(f"graph line {head_line}: expected a single node count")
    try:
        m = int(head[0])
    except ValueError as exc:
        raise ValidationError(f"graph line {head_line}: node count is not an integer") from exc
    if m < 1:
        raise ValidationError("graph node count must be >= 1")
    adjacency: list[list[int] | None] = [None] * m
    for lineno, tok in tokens_by_line[1:]:
        try:
            values = [int(t) for t in tok]
        except ValueError as exc:
            raise ValidationError(f"graph line {lineno}: non-integer token") from exc
        if len(values) < 2:
            raise ValidationError(f"graph line {lineno}: expected 'i d j1 ... jd'")
        i, deg, *neigh = values
        if not 1 <= i <= m:
            raise ValidationError(f"graph line {lineno}: node id {i} out of range 1..{m}")
        if deg != len(neigh):
            raise ValidationError(
                f"graph line {lineno}: declared degree {deg} but listed {len(neigh)} neighbors"
            )
        if adjacency[i - 1] is not None:
            raise ValidationError(f"graph line {lineno}: node {i} listed twice")
        for j in neigh:
            if not 1 <= j <= m:
                raise ValidationError(f"graph line {lineno}: neighbor {j} out of range 1..{m}")
            if j == i:
                raise ValidationError(f"graph line {lineno}: self-loop at node {i}")
        adjacency[i - 1] = sorted(j - 1 for j in neigh)
    missing = [i + 1 for i, a in enumerate(adjacency) if a is None]
    if missing:
        raise ValidationError(f"graph file is missing nodes {missing[:5]}")
    out = [list(a) for a in adjacency]  # type: ignore[union-attr]
    for i, neigh in enumerate(out):
        for j in neigh:
            if i not in out[j]:
                raise ValidationError(
                    f"graph is not symmetric: node {i + 1} lists {j + 1} but not vice versa"
                )
    return out


def read_graph(path) -> list[list[int]]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_graph(fh.read())


# ---------------------------------------------------------------------------
# covariance assembly
# ---------------------------------------------------------------------------


def scale_to_unit_geometric_mean(cov: np.ndarray) -> tuple[np.ndarray, float]:
    """Divide a PSD covariance by the geometric mean of its diagonal."""
    diag = np.diag(cov)
    if (diag <= 0).any():
        raise ValidationError(
            "cannot scale a covariance with zero marginal variances "
            "(degenerate component, e.g. an isolated besag node)"
        )
    factor = float(np.exp(np.mean(np.log(diag))))
    return cov / factor, factor


def _effect_level_covariance(spec: EffectSpec) -> tuple[np.ndarray, float]:
    """Scaled effect-level covariance and the scale factor that was applied."""
    m = spec.size
    extra = (
        np.atleast_2d(np.asarray(spec.constraints, dtype=float))
        if spec.constraints is not None and np.size(spec.constraints)
        else np.zeros((0, m))
    )
    if extra.size and extra.shape[1] != m:
        raise ValidationError(
            f"effect {spec.name!r}: constraint rows have length {extra.shape[1]}, expected {m}"
        )

    if spec.kind == "iid":
        return np.eye(m), 1.0

    if spec.kind == "fixed_cov":
        cov = numerics.symmetrize(spec.matrix)
        eig = numerics.eigen_sym(cov)
        if eig.values.min() < -1e-10 * max(eig.values.max(), 1.0):
            raise ValidationError(f"effect {spec.name!r}: fixed_cov matrix is not PSD")
        if spec.prescaled:
            return cov, 1.0
        return scale_to_unit_geometric_mean(cov)

    if spec.kind == "rw1":
        q = rw1_structure(m)
        cons = np.vstack([np.ones((1, m)), extra])
    elif spec.kind == "rw2":
        q = rw2_structure(m)
        cons = np.vstack([np.ones((1, m)), np.arange(1, m + 1, dtype=float)[None, :], extra])
    else:  # besag
        q = besag_structure(spec.adjacency)
        comps = graph_components(spec.adjacency)
        for comp in comps:
            if len(comp) == 1:
                raise ValidationError(
                    f"effect {spec.name!r}: besag component of size 1 (node {comp[0] + 1}) "
                    "has no variance under its sum-to-zero constraint"
                )
        rows = np.zeros((len(comps), m))
        for r, comp in enumerate(comps):
            rows[r, comp] = 1.0
        cons = np.vstack([rows, extra])

    cov = numerics.constrained_geninv(q, cons)
    return scale_to_unit_geometric_mean(cov)


def build_effect(spec: EffectSpec, n: int) -> CovarianceModel:
    """Observation-level scaled covariance for one effect.

    The index map selects effect elements per observation; the resulting
    sigma_tilde equals A Sigma A' for the 0/1 selection matrix A.
    """
    if n < 1:
        raise ValidationError("observation count must be >= 1")
    if spec.index_map is None:
        if spec.size != n:
            raise ValidationError(
                f"effect {spec.name!r}: no index map and size {spec.size} != n {n}"
            )
        kmap = np.arange(n)
    else:
        kmap = spec.index_map
        if kmap.shape != (n,):
            raise ValidationError(
                f"effect {spec.name!r}: index map has length {kmap.shape}, expected {n}"
            )
        if kmap.min() < 1 or kmap.max() > spec.size:
            raise ValidationError(
                f"effect {spec.name!r}: index map entries must lie in 1..{spec.size}"
            )
        kmap = kmap - 1

    effect_cov, factor = _effect_level_covariance(spec)
    sigma_tilde = effect_cov[np.ix_(kmap, kmap)]

    used = np.unique(kmap)
    sub = effect_cov[np.ix_(used, used)]
    rank = numerics.rank_from_eigenvalues(numerics.eigen_sym(sub).values)
    return CovarianceModel(
        sigma_tilde=sigma_tilde,
        rank=rank,
        scale_factor=factor,
        effect_cov=effect_cov,
    )
