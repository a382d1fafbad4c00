"""DOT path diagrams of the covariate -> component -> outcome structure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import FactorModel


@dataclass(frozen=True)
class PathDiagram:
    """Nodes and weighted edges of the nonzero-loading structure.

    Only nodes incident to at least one surviving edge appear; in
    particular components with neither in- nor out-edges are omitted.
    """

    covariate_nodes: tuple[str, ...]
    component_nodes: tuple[str, ...]
    outcome_nodes: tuple[str, ...]
    loading_edges: tuple[tuple[str, str, float], ...]
    coefficient_edges: tuple[tuple[str, str, float], ...]

    @property
    def edge_count(self) -> int:
        return len(self.loading_edges) + len(self.coefficient_edges)


def _default_names(model: FactorModel, covariate_names, outcome_names, kind: str):
    q = model.A.shape[0]
    if covariate_names is None:
        covariate_names = tuple(f"x{i + 1}" for i in range(q))
    else:
        covariate_names = tuple(covariate_names)
        if len(covariate_names) != q:
            raise ValueError(f"need {q} covariate names, got {len(covariate_names)}")
    if outcome_names is None:
        marker = "Y†" if kind == "continuous" else "Y"
        outcome_names = tuple(f"{marker}{l + 1}" for l in range(model.p))
    else:
        outcome_names = tuple(outcome_names)
        if len(outcome_names) != model.p:
            raise ValueError(f"need {model.p} outcome names, got {len(outcome_names)}")
    return covariate_names, outcome_names


def build_path_diagram(
    model: FactorModel,
    covariate_names=None,
    outcome_names=None,
    threshold: float = 0.0,
    kind: str = "continuous",
) -> PathDiagram:
    """Collect the edges with |coefficient| > threshold, in fixed order:
    loadings by (covariate, component), coefficients by (component, outcome)."""
    covariate_names, outcome_names = _default_names(
        model, covariate_names, outcome_names, kind
    )
    comp_names = tuple(f"PC{k + 1}" for k in range(model.d))

    loading_edges = []
    for i in range(model.A.shape[0]):
        for k in range(model.d):
            v = model.A[i, k]
            if abs(v) > threshold:
                loading_edges.append((covariate_names[i], comp_names[k], float(v)))
    coef_edges = []
    for k in range(model.d):
        for l in range(model.p):
            v = model.Gamma[k, l]
            if abs(v) > threshold:
                coef_edges.append((comp_names[k], outcome_names[l], float(v)))

    used_cov = {src for src, _, _ in loading_edges}
    used_comp = {dst for _, dst, _ in loading_edges} | {src for src, _, _ in coef_edges}
    used_out = {dst for _, dst, _ in coef_edges}
    return PathDiagram(
        covariate_nodes=tuple(n for n in covariate_names if n in used_cov),
        component_nodes=tuple(n for n in comp_names if n in used_comp),
        outcome_nodes=tuple(n for n in outcome_names if n in used_out),
        loading_edges=tuple(loading_edges),
        coefficient_edges=tuple(coef_edges),
    )


def _quote(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_path_diagram(
    model: FactorModel,
    covariate_names=None,
    outcome_names=None,
    threshold: float = 0.0,
    kind: str = "continuous",
    edge_labels: bool = True,
) -> str:
    """Deterministic DOT text: covariates on the left rank, components in
    the middle, outcomes on the right; edge labels are coefficients rounded
    to three decimals (optional)."""
    diagram = build_path_diagram(model, covariate_names, outcome_names, threshold, kind)
    lines = ["digraph treatment_effect_paths {", "  rankdir=LR;", "  node [shape=box];"]
    for rank, nodes in (
        ("min", diagram.covariate_nodes),
        ("same", diagram.component_nodes),
        ("max", diagram.outcome_nodes),
    ):
        if nodes:
            inner = " ".join(f"{_quote(n)};" for n in nodes)
            lines.append(f"  {{ rank={rank}; {inner} }}")
    for src, dst, weight in diagram.loading_edges + diagram.coefficient_edges:
        if edge_labels:
            lines.append(f"  {_quote(src)} -> {_quote(dst)} [label={weight:.3f}];")
        else:
            lines.append(f"  {_quote(src)} -> {_quote(dst)};")
    lines.append("}")
    return "\n".join(lines) + "\n"
