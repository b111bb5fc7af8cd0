"""Generate the shipped graph files and golden model files under models/.

Run from the repository root:  python tools/make_model_data.py
"""

from __future__ import annotations

import json
import os

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..")
MODELS = os.path.join(ROOT, "models")


def grid_graph(rows: int, cols: int, drop: int = 0) -> list[list[int]]:
    """4-neighbor grid graph with the last `drop` cells removed (stays
    connected); 0-based adjacency lists."""
    n = rows * cols - drop
    adj: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        r, c = divmod(i, cols)
        for dr, dc in ((0, 1), (1, 0)):
            rr, cc = r + dr, c + dc
            j = rr * cols + cc
            if rr < rows and cc < cols and j < n:
                adj[i].append(j)
                adj[j].append(i)
    return [sorted(v) for v in adj]


def write_graph(path: str, adj: list[list[int]]) -> None:
    lines = [str(len(adj))]
    for i, neigh in enumerate(adj):
        lines.append(" ".join([str(i + 1), str(len(neigh))] + [str(j + 1) for j in neigh]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_model(name: str, data: dict) -> None:
    with open(os.path.join(MODELS, name), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")


def random_intercept(n_groups: int = 10, group_size: int = 10) -> dict:
    n = n_groups * group_size
    return {
        "schema": "hdprior/1",
        "name": "random_intercept",
        "n": n,
        "likelihood": "gaussian",
        "effects": [
            {
                "name": "group",
                "kind": "iid",
                "size": n_groups,
                "index_map": [g + 1 for g in range(n_groups) for _ in range(group_size)],
            },
            {"name": "residual", "kind": "iid", "size": n},
        ],
        "tree": {"leaf": "group"},
        "residual": {"effect": "residual", "median": 0.25},
        "total": {"type": "jeffreys"},
    }


def latin_square(levels: int = 9, expanded: bool = False) -> dict:
    n = levels * levels
    rows, cols, treat = [], [], []
    for i in range(levels):
        for j in range(levels):
            rows.append(i + 1)
            cols.append(j + 1)
            treat.append((i + j) % levels + 1)
    latent = {
        "children": [
            {
                "children": [{"leaf": "treat_smooth"}, {"leaf": "treat_noise"}],
                "base": [0, 1],
                "prior": {"type": "pc", "median": 0.25},
            },
            {"leaf": "row"},
            {"leaf": "col"},
        ],
        "base": [1 / 3, 1 / 3, 1 / 3],
        "prior": {"type": "pc"} if expanded else {"type": "dirichlet"},
    }
    return {
        "schema": "hdprior/1",
        "name": "latin_square_dual" if expanded else "latin_square",
        "n": n,
        "likelihood": "gaussian",
        "effects": [
            {"name": "row", "kind": "iid", "size": levels, "index_map": rows},
            {"name": "col", "kind": "iid", "size": levels, "index_map": cols},
            {"name": "treat_smooth", "kind": "rw2", "size": levels, "index_map": treat},
            {"name": "treat_noise", "kind": "iid", "size": levels, "index_map": treat},
            {"name": "residual", "kind": "iid", "size": n},
        ],
        "tree": latent,
        "residual": {"effect": "residual", "median": 0.25},
        "total": {"type": "jeffreys"},
    }


def kenya(counties: int = 47, clusters_per: int = 2, households_per: int = 2) -> dict:
    n_clusters = counties * clusters_per
    n = n_clusters * households_per
    county_map = [c // (clusters_per * households_per) + 1 for c in range(n)]
    cluster_map = [c // households_per + 1 for c in range(n)]
    return {
        "schema": "hdprior/1",
        "name": "kenya",
        "n": n,
        "likelihood": "binomial",
        "effects": [
            {"name": "spatial", "kind": "besag", "graph": "kenya47.graph",
             "index_map": county_map},
            {"name": "county", "kind": "iid", "size": counties, "index_map": county_map},
            {"name": "cluster", "kind": "iid", "size": n_clusters, "index_map": cluster_map},
            {"name": "household", "kind": "iid", "size": n},
        ],
        "tree": {
            "children": [
                {
                    "children": [
                        {
                            "children": [{"leaf": "spatial"}, {"leaf": "county"}],
                            "base": [0, 1],
                            "prior": {"type": "pc", "median": 0.25},
                        },
                        {"leaf": "cluster"},
                    ],
                    "base": [1, 0],
                    "prior": {"type": "pc", "median": 0.25},
                },
                {"leaf": "household"},
            ],
            "base": [1, 0],
            "prior": {"type": "pc", "median": 0.25},
        },
        "total": {"type": "pc", "odds": {"lower": 0.1, "upper": 10.0, "prob": 0.9},
                  "alpha": 0.05},
    }


def kenya_sim(counties: int = 47, clusters_per: int = 2) -> dict:
    n = counties * clusters_per
    county_map = [c // clusters_per + 1 for c in range(n)]
    return {
        "schema": "hdprior/1",
        "name": "kenya_sim",
        "n": n,
        "likelihood": "binomial",
        "effects": [
            {"name": "spatial", "kind": "besag", "graph": "kenya47.graph",
             "index_map": county_map},
            {"name": "county", "kind": "iid", "size": counties, "index_map": county_map},
            {"name": "cluster", "kind": "iid", "size": n},
        ],
        "tree": {
            "children": [
                {
                    "children": [{"leaf": "spatial"}, {"leaf": "county"}],
                    "base": [0, 1],
                    "prior": {"type": "pc", "median": 0.25},
                },
                {"leaf": "cluster"},
            ],
            "base": [1, 0],
            "prior": {"type": "pc", "median": 0.25},
        },
        "total": {"type": "pc", "tail": {"upper": 3.0, "alpha": 0.05}},
    }


def three_effects(nested: bool) -> dict:
    """Abstract A/B/C tree, flat (ignorance) or nested (shrinkage).

    The three effects carry different structures (grouped iid, smooth walk,
    observation-level iid) so every dual split compares genuinely different
    covariances; identical sides admit no PC prior.
    """
    n = 30
    gmap = [g + 1 for g in range(10) for _ in range(3)]
    if nested:
        tree = {
            "children": [
                {
                    "children": [{"leaf": "a"}, {"leaf": "b"}],
                    "base": [0, 1],
                    "prior": {"type": "pc", "median": 0.25},
                },
                {"leaf": "c"},
            ],
            "base": [0, 1],
            "prior": {"type": "pc", "median": 0.25},
        }
    else:
        tree = {
            "children": [{"leaf": "a"}, {"leaf": "b"}, {"leaf": "c"}],
            "prior": {"type": "dirichlet"},
        }
    return {
        "schema": "hdprior/1",
        "name": "three_effects_nested" if nested else "three_effects_flat",
        "n": n,
        "likelihood": "nongaussian",
        "effects": [
            {"name": "a", "kind": "iid", "size": 10, "index_map": gmap},
            {"name": "b", "kind": "rw1", "size": n},
            {"name": "c", "kind": "iid", "size": n},
        ],
        "tree": tree,
        "total": {"type": "pc", "tail": {"upper": 3.0, "alpha": 0.05}},
    }


def main() -> None:
    os.makedirs(MODELS, exist_ok=True)
    write_graph(os.path.join(MODELS, "kenya47.graph"), grid_graph(7, 7, drop=2))
    write_graph(os.path.join(MODELS, "constituencies290.graph"), grid_graph(29, 10))
    write_model("random_intercept.json", random_intercept())
    write_model("latin_square.json", latin_square(expanded=False))
    write_model("latin_square_dual.json", latin_square(expanded=True))
    write_model("kenya.json", kenya())
    write_model("kenya_sim.json", kenya_sim())
    write_model("three_effects_flat.json", three_effects(nested=False))
    write_model("three_effects_nested.json", three_effects(nested=True))
    print(f"wrote graphs and models under {os.path.normpath(MODELS)}")


if __name__ == "__main__":
    main()
