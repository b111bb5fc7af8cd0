"""Assembled joint priors.

assemble() turns a validated model file into an immutable HDPriorModel:
effects are built and scaled, multi-way PC splits are expanded into dual
splits, Gaussian models get the residual augmentation, every split prior is
calibrated against the effective covariances implied by the base models
below it, PC splits are tabulated, and the total-variance prior is
calibrated.  The model then evaluates its joint log density in both
coordinate systems, draws joint samples, and summarizes prior marginals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import split_priors as sp
from . import total_priors as tp
from . import tree as tr
from .effects import CovarianceModel, EffectSpec, build_effect
from .errors import HDPriorError, ValidationError
from .model_file import ModelFile
from .numerics import RandomSource
from .tree import DecompositionTree, Split, WeightAssignment

__all__ = [
    "CalibratedSplit",
    "HDPriorModel",
    "SampleSet",
    "assemble",
    "log_density_variances",
    "log_density_weights",
    "marginal_report",
    "sample",
]

DEFAULT_MEDIAN = 0.25
TABLE_POINTS = 1025
REPORT_QUANTILES = (0.025, 0.25, 0.5, 0.75, 0.975)


@dataclass(frozen=True)
class CalibratedSplit:
    """One assembled split with its calibrated prior.

    ``origin`` ties the split back to the model file: ("tree", k) for the
    k-th file split, ("expanded", k, i) for the i-th dual split of an
    expanded multi-way file split, or ("residual",) for the augmented top
    split of a Gaussian model.
    """

    split: Split
    kind: str
    origin: tuple
    pc: sp.PCSplitPrior | None = None
    table: sp.DensityTable | None = None
    dirichlet: sp.DirichletSplitPrior | None = None
    median: float | None = None


@dataclass(frozen=True)
class HDPriorModel:
    """Immutable snapshot of an assembled joint prior."""

    name: str
    n: int
    likelihood: str
    effects: tuple[EffectSpec, ...]
    covariances: dict[str, CovarianceModel] = field(repr=False)
    tree: DecompositionTree
    splits: tuple[CalibratedSplit, ...]
    total: tp.TotalVariancePrior
    total_label: str  # "V" under the residual augmentation, else "t"
    report: dict = field(repr=False)

    @property
    def improper(self) -> bool:
        return self.total.improper

    def split_count(self) -> int:
        return len(self.splits)


def _expand_with_origins(tree: DecompositionTree) -> tuple[DecompositionTree, list[tuple]]:
    """Expand multi-way PC splits, recording each output split's origin."""
    new_splits: list[Split] = []
    origins: list[tuple] = []
    for file_pos, s in enumerate(tree.splits, start=1):
        if s.prior.kind == "pc" and len(s.children) > 2:
            for i, piece in enumerate(sp.expand_multisplit(s), start=1):
                new_splits.append(piece)
                origins.append(("expanded", file_pos, i))
        else:
            new_splits.append(s)
            origins.append(("tree", file_pos))
    reindexed = [
        tr.Split(index=i + 1, parent=s.parent, children=s.children, base=s.base, prior=s.prior)
        for i, s in enumerate(new_splits)
    ]
    out = DecompositionTree(effects=tree.effects, splits=tuple(reindexed))
    tr.validate(out)
    return out, origins


def _calibrate_split(
    split: Split,
    origin: tuple,
    tree: DecompositionTree,
    covs: dict[str, np.ndarray],
) -> CalibratedSplit:
    if split.prior.kind == "dirichlet":
        k = len(split.children)
        a = split.prior.concentration
        if a is None:
            a = sp.dirichlet_calibrate(k)
        prior = sp.DirichletSplitPrior(order=k, concentration=a)
        table = sp.tabulate_dirichlet_marginal(prior, TABLE_POINTS)
        return CalibratedSplit(
            split=split, kind="dirichlet", origin=origin, dirichlet=prior, table=table
        )

    if len(split.children) != 2:
        raise ValidationError(
            f"split {split.index}: PC priors apply to dual splits "
            "(multi-way PC splits are expanded during assembly)"
        )
    side1 = tr.effective_covariance(tree, split.children[0], covs)
    side2 = tr.effective_covariance(tree, split.children[1], covs)
    try:
        skeleton = sp.build_pc_split(side1, side2, split.base[0])
        if skeleton.case == 3:
            prior = sp.calibrate_interval(skeleton)
        else:
            prior = sp.calibrate_median(skeleton, split.prior.median or DEFAULT_MEDIAN)
        table = sp.tabulate(prior, TABLE_POINTS)
    except HDPriorError as exc:
        raise type(exc)(
            f"split {split.index} over {list(split.parent)}: {exc}"
        ) from exc
    return CalibratedSplit(
        split=split, kind="pc", origin=origin, pc=prior, table=table, median=prior.median()
    )


def _total_prior(mf: ModelFile) -> tp.TotalVariancePrior:
    spec = mf.total
    if spec.kind == "jeffreys":
        return tp.TotalVariancePrior(kind="jeffreys_gaussian")
    if spec.rate is not None:
        return tp.TotalVariancePrior(kind="pc_total", rate=spec.rate,
                                     upper=(math.log(spec.alpha) / -spec.rate) ** 2,
                                     alpha=spec.alpha)
    if spec.tail_upper is not None:
        rate = tp.calibrate_total_from_tail(spec.tail_upper, spec.tail_alpha)
        return tp.TotalVariancePrior(kind="pc_total", rate=rate,
                                     upper=spec.tail_upper, alpha=spec.tail_alpha)
    cal = tp.OddsCalibration(lower=spec.odds_lower, upper=spec.odds_upper, prob=spec.odds_prob)
    rate, upper = tp.calibrate_total_from_odds(cal, spec.alpha)
    return tp.TotalVariancePrior(kind="pc_total", rate=rate, upper=upper, alpha=spec.alpha)


def assemble(mf: ModelFile) -> HDPriorModel:
    """Build, calibrate and tabulate the joint prior a model file describes."""
    covariances = {e.name: build_effect(e, mf.n) for e in mf.effects}

    work_tree, origins = _expand_with_origins(mf.tree)
    if mf.residual is not None:
        work_tree = tp.jeffreys_augment(work_tree, mf.residual, mf.residual_prior)
        origins = [("residual",)] + origins
        ident = covariances[mf.residual]
        if ident.sigma_tilde.shape != (mf.n, mf.n) or not np.allclose(
            ident.sigma_tilde, np.eye(mf.n), atol=1e-12
        ):
            raise ValidationError(
                f"residual effect {mf.residual!r} must be an iid effect with one "
                "element per observation"
            )
    tr.validate(work_tree)

    sigma = {name: cov.sigma_tilde for name, cov in covariances.items()}
    splits = tuple(
        _calibrate_split(s, origin, work_tree, sigma)
        for s, origin in zip(work_tree.splits, origins)
    )
    total = _total_prior(mf)
    total_label = "V" if total.improper else "t"

    report = {
        "name": mf.name,
        "n": mf.n,
        "likelihood": mf.likelihood,
        "total_label": total_label,
        "effects": [
            {
                "name": e.name,
                "kind": e.kind,
                "size": int(e.size),
                "rank": covariances[e.name].rank,
                "scale_factor": covariances[e.name].scale_factor,
            }
            for e in mf.effects
        ],
        "splits": [
            {
                "index": cs.split.index,
                "parent": list(cs.split.parent),
                "children": [list(c) for c in cs.split.children],
                "base": list(cs.split.base),
                "prior": cs.kind,
                "origin": list(cs.origin),
                **(
                    {
                        "case": cs.pc.case,
                        "rate": cs.pc.rate,
                        "median": cs.median,
                        "median_deviation": cs.pc.deviation_median(),
                        "rank_deficiency": cs.pc.rank_deficiency,
                        "observations_used": int(cs.pc.subset.size),
                    }
                    if cs.kind == "pc"
                    else {"concentration": cs.dirichlet.concentration}
                ),
            }
            for cs in splits
        ],
        "total": {
            "kind": total.kind,
            "rate": total.rate,
            "upper": total.upper,
            "alpha": total.alpha,
        },
    }

    return HDPriorModel(
        name=mf.name,
        n=mf.n,
        likelihood=mf.likelihood,
        effects=mf.effects,
        covariances=covariances,
        tree=work_tree,
        splits=splits,
        total=total,
        total_label=total_label,
        report=report,
    )


# ---------------------------------------------------------------------------
# density evaluation
# ---------------------------------------------------------------------------


def _split_log_density(cs: CalibratedSplit, w: tuple[float, ...]) -> float:
    if cs.kind == "dirichlet":
        return sp.dirichlet_log_density(np.asarray(w), cs.dirichlet)
    x = float(w[0])
    table = cs.table
    if x <= table.omega[0] or x >= table.omega[-1]:
        return float(cs.pc.log_density(x))
    return float(table.log_density_at(x))


def log_density_weights(model: HDPriorModel, total: float, omega) -> float:
    """Joint log density in the (total, split weights) coordinates.

    The result is unnormalized (up to the missing 1/V constant) when the
    total prior is the improper Jeffreys one; model.improper flags this.
    """
    assignment = WeightAssignment(t=float(total), omega=tuple(tuple(map(float, w)) for w in omega))
    assignment.validated(model.tree)
    if assignment.t <= 0.0 or not math.isfinite(assignment.t):
        raise ValidationError("the total variance must be positive and finite")
    acc = tp.log_density_total(model.total, assignment.t)
    for cs, w in zip(model.splits, assignment.omega):
        acc += _split_log_density(cs, w)
    return acc


def log_density_variances(model: HDPriorModel, variances) -> float:
    """Joint log density of the per-effect variances (tree leaf order),
    transported from the weight coordinates through the tree Jacobian."""
    w = tr.variances_to_weights(model.tree, variances)
    return log_density_weights(model, w.t, w.omega) - tr.log_jacobian(model.tree, w)


# ---------------------------------------------------------------------------
# sampling and marginal summaries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampleSet:
    """Joint draws; ``totals`` and ``variances`` are None in weights-only
    (Jeffreys) mode.  ``weights[s]`` has one column per child of split s."""

    weights: tuple[np.ndarray, ...]
    totals: np.ndarray | None
    variances: np.ndarray | None  # columns follow tree.effects


def sample(model: HDPriorModel, rng: RandomSource, n: int, weights_only: bool = False) -> SampleSet:
    """Independent joint draws by per-split inverse-CDF sampling.

    Under the improper Jeffreys total prior only weights_only mode is
    available; asking for totals there raises ImproperPriorError.
    """
    if n < 1:
        raise ValidationError("sample size must be >= 1")
    draws: list[np.ndarray] = []
    for cs in model.splits:
        if cs.kind == "dirichlet":
            draws.append(sp.dirichlet_sample(cs.dirichlet, rng, n))
        else:
            w1 = cs.pc.sample(rng, n)
            draws.append(np.column_stack([w1, 1.0 - w1]))
    if weights_only:
        return SampleSet(weights=tuple(draws), totals=None, variances=None)
    totals = tp.sample_total(model.total, rng, n)  # raises under Jeffreys
    shares = _leaf_shares(model.tree, draws)
    variances = shares * totals[:, None]
    return SampleSet(weights=tuple(draws), totals=totals, variances=variances)


SAMPLE_CHUNK = 65536


def sample_chunked(
    model: HDPriorModel, n: int, seed: int, threads: int = 1
) -> SampleSet:
    """Draws in fixed 65536-row chunks, each from its own derived stream.

    The chunk layout depends only on (n, seed), so the output is byte-stable
    for any thread count; threads only parallelize the chunk work.  Improper
    (Jeffreys) models yield weights-only draws.
    """
    if n < 1:
        raise ValidationError("sample size must be >= 1")
    base = RandomSource(seed)
    sizes = [min(SAMPLE_CHUNK, n - i * SAMPLE_CHUNK) for i in range((n + SAMPLE_CHUNK - 1) // SAMPLE_CHUNK)]

    def run(idx_size):
        idx, size = idx_size
        return sample(model, base.substream(idx), size, weights_only=model.improper)

    jobs = list(enumerate(sizes))
    if threads <= 1 or len(jobs) == 1:
        parts = [run(j) for j in jobs]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, jobs))
    weights = tuple(
        np.concatenate([p.weights[s] for p in parts], axis=0)
        for s in range(len(model.splits))
    )
    totals = None if parts[0].totals is None else np.concatenate([p.totals for p in parts])
    variances = (
        None
        if parts[0].variances is None
        else np.concatenate([p.variances for p in parts], axis=0)
    )
    return SampleSet(weights=weights, totals=totals, variances=variances)


def _leaf_shares(tree: DecompositionTree, weights: list[np.ndarray]) -> np.ndarray:
    """(n, N) per-draw share of the total reaching each leaf."""
    n = weights[0].shape[0] if weights else 1
    paths = tr.leaf_paths(tree)
    out = np.ones((n, len(tree.effects)))
    for j, name in enumerate(tree.effects):
        for pos, c in paths[name]:
            out[:, j] *= weights[pos][:, c]
    return out


def _quantile_row(x: np.ndarray) -> dict:
    qs = np.quantile(x, REPORT_QUANTILES)
    return {
        **{f"q{q:g}": float(v) for q, v in zip(REPORT_QUANTILES, qs)},
        "mean": float(x.mean()),
    }


def marginal_report(model: HDPriorModel, rng: RandomSource, n: int) -> dict:
    """Monte Carlo quantiles of every leaf's share of the total variance and
    of every split's child weights, plus the shares implied by the base
    models alone."""
    draws = sample(model, rng, n, weights_only=True)
    shares = _leaf_shares(model.tree, list(draws.weights))
    at_base = tr.base_leaf_weights(model.tree, model.tree.effects)
    leaf_shares = {}
    for j, name in enumerate(model.tree.effects):
        row = _quantile_row(shares[:, j])
        row["share_at_base"] = float(at_base[name])
        leaf_shares[name] = row
    split_weights = {}
    for cs, w in zip(model.splits, draws.weights):
        split_weights[str(cs.split.index)] = [
            {"child": list(child), **_quantile_row(w[:, c])}
            for c, child in enumerate(cs.split.children)
        ]
    return {
        "n_draws": n,
        "total_label": model.total_label,
        "leaf_shares": leaf_shares,
        "split_weights": split_weights,
    }
