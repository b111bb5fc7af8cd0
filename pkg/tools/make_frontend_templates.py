"""Regenerate frontend/src/templates/*.json from the shipped model files.

Serialization inlines besag adjacency so the templates are self-contained
for HTTP posting.  Run from the repository root after changing models/.
"""

from __future__ import annotations

import json
import os
import sys

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..")
sys.path.insert(0, os.path.join(ROOT, "src"))

from hdprior.model_file import parse_model, serialize  # noqa: E402

TEMPLATES = {
    "three_effects_flat": "Three effects, one ignorance split",
    "three_effects_nested": "Three effects, nested shrinkage",
    "random_intercept": "Random intercept (group vs residual)",
    "latin_square": "Latin square (Dirichlet triple split)",
    "latin_square_dual": "Latin square (expanded dual splits)",
    "kenya_sim": "Spatial binomial (tail-calibrated total)",
    "kenya": "Spatial binomial, household level (odds-calibrated total)",
}


def main() -> None:
    out_dir = os.path.join(ROOT, "frontend", "src", "templates")
    os.makedirs(out_dir, exist_ok=True)
    index = []
    for name, label in TEMPLATES.items():
        data = serialize(parse_model(os.path.join(ROOT, "models", f"{name}.json")))
        with open(os.path.join(out_dir, f"{name}.json"), "w", encoding="utf-8",
                  newline="\n") as fh:
            json.dump(data, fh, indent=2)
            fh.write("\n")
        index.append({"name": name, "label": label})
    with open(os.path.join(out_dir, "index.json"), "w", encoding="utf-8",
              newline="\n") as fh:
        json.dump(index, fh, indent=2)
        fh.write("\n")
    print(f"wrote {len(index)} templates to {os.path.normpath(out_dir)}")


if __name__ == "__main__":
    main()
