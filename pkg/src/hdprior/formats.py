"""Text export formats shared by the CLI and the HTTP server.

All floating-point output uses 17 significant digits so exports round-trip
float64 exactly; lines end with LF.
"""

from __future__ import annotations

import json

import numpy as np

from .hd_model import HDPriorModel, SampleSet

__all__ = ["fmt", "marginals_csv", "report_json", "samples_csv"]


def fmt(x: float) -> str:
    return f"{x:.17g}"


def samples_csv(model: HDPriorModel, draws: SampleSet) -> str:
    """One row per draw: the total, per-effect variances, then per-split
    child weights.  Weights-only draws (Jeffreys mode) carry only the
    weight columns."""
    cols: list[tuple[str, np.ndarray]] = []
    if draws.totals is not None:
        cols.append((model.total_label.lower(), draws.totals))
        for j, name in enumerate(model.tree.effects):
            cols.append((f"sigma2_{name}", draws.variances[:, j]))
    for cs, w in zip(model.splits, draws.weights):
        for c in range(w.shape[1]):
            cols.append((f"w_{cs.split.index}_{c + 1}", w[:, c]))
    header = ",".join(name for name, _ in cols)
    n = cols[0][1].shape[0]
    lines = [header]
    for i in range(n):
        lines.append(",".join(fmt(float(col[i])) for _, col in cols))
    return "\n".join(lines) + "\n"


def marginals_csv(report: dict) -> str:
    """Flat CSV of the marginal summaries: one row per leaf share and per
    split-child weight."""
    qcols = [k for k in next(iter(report["leaf_shares"].values())) if k.startswith("q")]
    header = ["quantity", "name"] + qcols + ["mean", "share_at_base"]
    lines = [",".join(header)]
    for name, row in report["leaf_shares"].items():
        vals = [fmt(row[q]) for q in qcols] + [fmt(row["mean"]), fmt(row["share_at_base"])]
        lines.append(",".join(["leaf_share", name] + vals))
    for split_id, children in report["split_weights"].items():
        for c, row in enumerate(children, start=1):
            vals = [fmt(row[q]) for q in qcols] + [fmt(row["mean"]), ""]
            lines.append(",".join(["split_weight", f"{split_id}:{c}"] + vals))
    return "\n".join(lines) + "\n"


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=False) + "\n"
