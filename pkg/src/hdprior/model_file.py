"""The JSON model-file format (schema "hdprior/1").

A model file declares the observation count, the likelihood flag, the random
effects, the decomposition tree with per-split prior blocks, the total-
variance prior, and (for Gaussian likelihoods) the residual effect used by
the Jeffreys augmentation.  Parsing fills documented defaults: a missing
split prior means an ignorance (Dirichlet) prior, a PC split with an
endpoint base defaults to median 0.25, and a missing Dirichlet concentration
is calibrated from the split's order.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .effects import EFFECT_KINDS, EffectSpec, read_graph
from .errors import ValidationError
from .split_priors import dirichlet_calibrate
from .tree import DecompositionTree, SplitPriorSpec, tree_from_nested

__all__ = ["ModelFile", "TotalSpec", "parse_model", "parse_model_dict", "serialize"]

SCHEMA = "hdprior/1"
LIKELIHOODS = ("gaussian", "binomial", "poisson", "nongaussian")


@dataclass(frozen=True)
class TotalSpec:
    """Normalized total-variance prior request."""

    kind: str  # "jeffreys" or "pc"
    rate: float | None = None
    tail_upper: float | None = None
    tail_alpha: float | None = None
    odds_lower: float | None = None
    odds_upper: float | None = None
    odds_prob: float | None = None
    alpha: float = 0.05  # tail level used to report an upper bound


@dataclass(frozen=True)
class ModelFile:
    """Validated, default-filled model description."""

    schema: str
    name: str
    n: int
    likelihood: str
    effects: tuple[EffectSpec, ...]
    tree: DecompositionTree  # the latent tree for gaussian models
    tree_node: dict = field(repr=False)  # normalized nested form
    residual: str | None = None
    residual_prior: SplitPriorSpec | None = None
    total: TotalSpec = TotalSpec(kind="pc", rate=1.0)

    @property
    def gaussian(self) -> bool:
        return self.likelihood == "gaussian"


def _need(data: dict, key: str, where: str):
    if key not in data:
        raise ValidationError(f"{where}: missing required field {key!r}")
    return data[key]


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{where}: expected an integer, got {value!r}")
    return value


def _as_positive_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where}: expected a number, got {value!r}")
    v = float(value)
    if not math.isfinite(v) or v <= 0.0:
        raise ValidationError(f"{where}: expected a positive finite number, got {value!r}")
    return v


def _parse_effect(data: dict, where: str, base_dir: str | None) -> EffectSpec:
    if not isinstance(data, dict):
        raise ValidationError(f"{where}: an effect must be an object")
    name = _need(data, "name", where)
    kind = _need(data, "kind", where)
    if kind not in EFFECT_KINDS:
        raise ValidationError(f"{where}.kind: unknown effect kind {kind!r}")
    allowed = {"name", "kind", "size", "index_map", "graph", "adjacency",
               "matrix", "prescaled", "constraints"}
    unknown = set(data) - allowed
    if unknown:
        raise ValidationError(f"{where}: unknown fields {sorted(unknown)}")

    adjacency = None
    graph = None
    if kind == "besag":
        if "adjacency" in data:
            raw = data["adjacency"]
            if not isinstance(raw, list):
                raise ValidationError(f"{where}.adjacency: expected a list of neighbor lists")
            adjacency = []
            for i, neigh in enumerate(raw):
                if not isinstance(neigh, list):
                    raise ValidationError(f"{where}.adjacency[{i}]: expected a list")
                adjacency.append([_as_int(j, f"{where}.adjacency[{i}]") - 1 for j in neigh])
            graph = data.get("graph")
        elif "graph" in data:
            graph = data["graph"]
            if base_dir is None and not os.path.isabs(graph):
                raise ValidationError(
                    f"{where}.graph: relative graph paths need a model-file "
                    "location; inline the 'adjacency' instead"
                )
            path = graph if os.path.isabs(graph) else os.path.join(base_dir, graph)
            try:
                adjacency = read_graph(path)
            except OSError as exc:
                raise ValidationError(f"{where}.graph: cannot read {path!r}: {exc}") from exc
        else:
            raise ValidationError(f"{where}: besag needs 'graph' or inline 'adjacency'")

    index_map = None
    if "index_map" in data:
        raw = data["index_map"]
        if not isinstance(raw, list) or not raw:
            raise ValidationError(f"{where}.index_map: expected a nonempty list")
        index_map = np.array([_as_int(v, f"{where}.index_map") for v in raw], dtype=int)

    constraints = None
    if "constraints" in data:
        constraints = np.asarray(data["constraints"], dtype=float)

    matrix = np.asarray(data["matrix"], dtype=float) if "matrix" in data else None

    try:
        return EffectSpec(
            name=str(name),
            kind=str(kind),
            size=int(data.get("size", 0)),
            index_map=index_map,
            constraints=constraints,
            adjacency=adjacency,
            graph=graph,
            matrix=matrix,
            prescaled=bool(data.get("prescaled", False)),
        )
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def _parse_prior_block(data, where: str) -> SplitPriorSpec:
    if not isinstance(data, dict):
        raise ValidationError(f"{where}: a prior block must be an object")
    kind = data.get("type")
    if kind not in ("pc", "dirichlet"):
        raise ValidationError(f"{where}.type: expected 'pc' or 'dirichlet', got {kind!r}")
    unknown = set(data) - {"type", "median", "concentration"}
    if unknown:
        raise ValidationError(f"{where}: unknown fields {sorted(unknown)}")
    median = data.get("median")
    conc = data.get("concentration")
    if median is not None:
        median = _as_positive_number(median, f"{where}.median")
        if median >= 1.0:
            raise ValidationError(f"{where}.median: must be in (0, 1)")
    if conc is not None:
        conc = _as_positive_number(conc, f"{where}.concentration")
    if kind == "pc" and conc is not None:
        raise ValidationError(f"{where}: 'concentration' belongs to dirichlet priors")
    if kind == "dirichlet" and median is not None:
        raise ValidationError(f"{where}: 'median' belongs to pc priors")
    return SplitPriorSpec(kind=kind, median=median, concentration=conc)


def _normalize_node(node, where: str) -> dict:
    """Validate one nested tree node and fill prior defaults."""
    if not isinstance(node, dict):
        raise ValidationError(f"{where}: a tree node must be an object")
    if "leaf" in node:
        if set(node) != {"leaf"}:
            raise ValidationError(f"{where}: a leaf node has only the 'leaf' field")
        if not isinstance(node["leaf"], str) or not node["leaf"]:
            raise ValidationError(f"{where}.leaf: expected an effect name")
        return {"leaf": node["leaf"]}
    unknown = set(node) - {"children", "base", "prior"}
    if unknown:
        raise ValidationError(f"{where}: unknown fields {sorted(unknown)}")
    children = node.get("children")
    if not isinstance(children, list) or len(children) < 2:
        raise ValidationError(f"{where}: a split needs a list of at least two children")
    k = len(children)
    out: dict = {
        "children": [
            _normalize_node(ch, f"{where}.children[{i}]") for i, ch in enumerate(children)
        ]
    }
    base = node.get("base")
    if base is not None:
        if not isinstance(base, list) or len(base) != k:
            raise ValidationError(f"{where}.base: expected {k} weights")
        base = [float(b) for b in base]
        if any(b < 0.0 or b > 1.0 for b in base) or abs(sum(base) - 1.0) > 1e-9:
            raise ValidationError(f"{where}.base: must be a point in the closed simplex")
    else:
        base = [1.0 / k] * k
    out["base"] = base

    prior = node.get("prior")
    spec = _parse_prior_block(prior, f"{where}.prior") if prior is not None else SplitPriorSpec(kind="dirichlet")
    if spec.kind == "pc":
        if k == 2 and spec.median is None and base[0] in (0.0, 1.0):
            spec = SplitPriorSpec(kind="pc", median=0.25)
        if k == 2 and spec.median is not None and base[0] not in (0.0, 1.0):
            raise ValidationError(
                f"{where}.prior: an interior-base pc split is calibrated by the "
                "interval rule; remove 'median'"
            )
        if k > 2:
            if spec.median is not None:
                raise ValidationError(
                    f"{where}.prior: a multi-way pc split is expanded into dual "
                    "splits with interval calibration; remove 'median'"
                )
            if any(abs(b - 1.0 / k) > 1e-9 for b in base):
                raise ValidationError(
                    f"{where}: a multi-way pc split needs an equal-attribution base"
                )
    else:
        if spec.concentration is None:
            spec = SplitPriorSpec(kind="dirichlet", concentration=dirichlet_calibrate(k))
    out["prior"] = {"type": spec.kind}
    if spec.median is not None:
        out["prior"]["median"] = spec.median
    if spec.concentration is not None:
        out["prior"]["concentration"] = spec.concentration
    return out


def _node_to_tree_input(node: dict) -> dict:
    if "leaf" in node:
        return {"leaf": node["leaf"]}
    return {
        "children": [_node_to_tree_input(ch) for ch in node["children"]],
        "base": node["base"],
        "prior": SplitPriorSpec(
            kind=node["prior"]["type"],
            median=node["prior"].get("median"),
            concentration=node["prior"].get("concentration"),
        ),
    }


def _parse_total(data, where: str, gaussian: bool) -> TotalSpec:
    if not isinstance(data, dict):
        raise ValidationError(f"{where}: expected an object")
    kind = data.get("type")
    if kind == "jeffreys":
        if not gaussian:
            raise ValidationError(
                f"{where}: the Jeffreys total prior needs a gaussian likelihood"
            )
        if set(data) != {"type"}:
            raise ValidationError(f"{where}: jeffreys takes no further fields")
        return TotalSpec(kind="jeffreys")
    if kind != "pc":
        raise ValidationError(f"{where}.type: expected 'jeffreys' or 'pc', got {kind!r}")
    unknown = set(data) - {"type", "rate", "tail", "odds", "alpha"}
    if unknown:
        raise ValidationError(f"{where}: unknown fields {sorted(unknown)}")
    alpha = float(data.get("alpha", 0.05))
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"{where}.alpha: must be in (0, 1)")
    given = [k for k in ("rate", "tail", "odds") if k in data]
    if len(given) != 1:
        raise ValidationError(f"{where}: give exactly one of 'rate', 'tail', 'odds'")
    if "rate" in data:
        return TotalSpec(kind="pc", rate=_as_positive_number(data["rate"], f"{where}.rate"),
                         alpha=alpha)
    if "tail" in data:
        tail = data["tail"]
        if not isinstance(tail, dict) or set(tail) != {"upper", "alpha"}:
            raise ValidationError(f"{where}.tail: expected {{'upper', 'alpha'}}")
        up = _as_positive_number(tail["upper"], f"{where}.tail.upper")
        al = _as_positive_number(tail["alpha"], f"{where}.tail.alpha")
        if al >= 1.0:
            raise ValidationError(f"{where}.tail.alpha: must be in (0, 1)")
        return TotalSpec(kind="pc", tail_upper=up, tail_alpha=al, alpha=al)
    odds = data["odds"]
    if not isinstance(odds, dict) or not {"lower", "upper", "prob"} <= set(odds):
        raise ValidationError(f"{where}.odds: expected {{'lower', 'upper', 'prob'}}")
    return TotalSpec(
        kind="pc",
        odds_lower=_as_positive_number(odds["lower"], f"{where}.odds.lower"),
        odds_upper=_as_positive_number(odds["upper"], f"{where}.odds.upper"),
        odds_prob=_as_positive_number(odds["prob"], f"{where}.odds.prob"),
        alpha=alpha,
    )


def parse_model_dict(data: dict, base_dir: str | None = None) -> ModelFile:
    """Validate a decoded model-file object and fill defaults."""
    if not isinstance(data, dict):
        raise ValidationError("model file must be a JSON object")
    schema = data.get("schema")
    if schema != SCHEMA:
        raise ValidationError(f"schema: expected {SCHEMA!r}, got {schema!r}")
    allowed = {"schema", "name", "n", "likelihood", "effects", "tree", "residual", "total"}
    unknown = set(data) - allowed
    if unknown:
        raise ValidationError(f"model file has unknown fields {sorted(unknown)}")

    n = _as_int(_need(data, "n", "model"), "n")
    if n < 1:
        raise ValidationError("n: must be >= 1")
    likelihood = _need(data, "likelihood", "model")
    if likelihood not in LIKELIHOODS:
        raise ValidationError(f"likelihood: expected one of {LIKELIHOODS}, got {likelihood!r}")

    raw_effects = _need(data, "effects", "model")
    if not isinstance(raw_effects, list) or not raw_effects:
        raise ValidationError("effects: expected a nonempty list")
    effects = tuple(
        _parse_effect(e, f"effects[{i}]", base_dir) for i, e in enumerate(raw_effects)
    )
    names = [e.name for e in effects]
    if len(set(names)) != len(names):
        raise ValidationError("effects: names must be unique")

    gaussian = likelihood == "gaussian"
    residual = None
    residual_prior = None
    if "residual" in data:
        if not gaussian:
            raise ValidationError("residual: only gaussian models have a residual block")
        rblock = data["residual"]
        if not isinstance(rblock, dict) or "effect" not in rblock:
            raise ValidationError("residual: expected {'effect': name, 'median'?: m}")
        unknown = set(rblock) - {"effect", "median"}
        if unknown:
            raise ValidationError(f"residual: unknown fields {sorted(unknown)}")
        residual = rblock["effect"]
        if residual not in names:
            raise ValidationError(f"residual.effect: {residual!r} is not a declared effect")
        med = rblock.get("median", 0.25)
        med = _as_positive_number(med, "residual.median")
        if med >= 1.0:
            raise ValidationError("residual.median: must be in (0, 1)")
        residual_prior = SplitPriorSpec(kind="pc", median=med)

    total = _parse_total(_need(data, "total", "model"), "total", gaussian)
    if total.kind == "jeffreys" and residual is None:
        raise ValidationError("total: the Jeffreys prior needs a 'residual' block")
    if total.kind == "pc" and residual is not None:
        raise ValidationError(
            "total: a proper pc total prior and a residual augmentation cannot be combined"
        )

    node = _normalize_node(_need(data, "tree", "model"), "tree")
    tree = tree_from_nested(_node_to_tree_input(node))

    tree_names = set(tree.effects)
    expected = set(names) - ({residual} if residual else set())
    if tree_names != expected:
        missing = sorted(expected - tree_names)
        extra = sorted(tree_names - expected)
        parts = []
        if missing:
            parts.append(f"effects missing from the tree: {missing}")
        if extra:
            parts.append(f"tree leaves that are not declared effects: {extra}")
        raise ValidationError("tree: " + "; ".join(parts))

    return ModelFile(
        schema=SCHEMA,
        name=str(data.get("name", "")),
        n=n,
        likelihood=likelihood,
        effects=effects,
        tree=tree,
        tree_node=node,
        residual=residual,
        residual_prior=residual_prior,
        total=total,
    )


def parse_model(path) -> ModelFile:
    """Read, decode and validate a model file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read model file {path!r}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"model file {path!r} is not valid JSON: line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return parse_model_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))


def serialize(mf: ModelFile) -> dict:
    """Serializable dict form; besag adjacency is inlined so the result is
    self-contained (round-trips through parse_model_dict without file access)."""
    effects = []
    for e in mf.effects:
        out: dict = {"name": e.name, "kind": e.kind, "size": int(e.size)}
        if e.index_map is not None:
            out["index_map"] = [int(v) for v in e.index_map]
        if e.kind == "besag":
            out["adjacency"] = [[int(j) + 1 for j in neigh] for neigh in e.adjacency]
            out.pop("size")
            if e.graph:
                out["graph"] = e.graph
        if e.kind == "fixed_cov":
            out["matrix"] = [[float(v) for v in row] for row in e.matrix]
            out.pop("size")
            if e.prescaled:
                out["prescaled"] = True
        if e.constraints is not None and np.size(e.constraints):
            out["constraints"] = [[float(v) for v in row] for row in np.atleast_2d(e.constraints)]
        effects.append(out)

    data: dict = {
        "schema": mf.schema,
        "name": mf.name,
        "n": mf.n,
        "likelihood": mf.likelihood,
        "effects": effects,
        "tree": mf.tree_node,
    }
    if mf.residual is not None:
        data["residual"] = {"effect": mf.residual, "median": mf.residual_prior.median}
    if mf.total.kind == "jeffreys":
        data["total"] = {"type": "jeffreys"}
    elif mf.total.rate is not None:
        data["total"] = {"type": "pc", "rate": mf.total.rate, "alpha": mf.total.alpha}
    elif mf.total.tail_upper is not None:
        data["total"] = {
            "type": "pc",
            "tail": {"upper": mf.total.tail_upper, "alpha": mf.total.tail_alpha},
        }
    else:
        data["total"] = {
            "type": "pc",
            "odds": {
                "lower": mf.total.odds_lower,
                "upper": mf.total.odds_upper,
                "prob": mf.total.odds_prob,
            },
            "alpha": mf.total.alpha,
        }
    return data
