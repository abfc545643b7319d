"""Semi-Markov workflow simulator for benchmark data.

A :class:`WorkflowGraph` is a directed graph over named phases with
row-stochastic transition probabilities and a per-phase duration model
(uniform integer range or geometric). Trajectories start at the designated
start phase, dwell for a sampled duration, hop along an outgoing edge, and
stop after the first terminal phase completes.

Per-second features are an orthogonal prototype per phase (standard basis
vectors) plus isotropic Gaussian noise, optionally routed through a
row-stochastic confusion matrix that corrupts the emitting phase.

Graph files are YAML with an explicit ``schema_version``; unknown keys are
rejected rather than ignored.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
import yaml

from .datasets import PhaseSequence

__all__ = [
    "GraphError",
    "Duration",
    "WorkflowGraph",
    "sample_trajectory",
    "emit_features",
    "prototype_matrix",
    "seven_phase_graph",
    "twelve_phase_graph",
    "builtin_graph",
    "BUILTIN_GRAPHS",
    "save_graph",
    "load_graph",
]

GRAPH_SCHEMA_VERSION = 1
_PROB_TOL = 1e-9


class GraphError(ValueError):
    """A workflow graph or graph file is structurally invalid."""


@dataclass(frozen=True)
class Duration:
    """Dwell-time model for one phase: uniform over [lo, hi] or geometric."""

    kind: str
    lo: int = 0
    hi: int = 0
    mean: float = 0.0

    def __post_init__(self):
        if self.kind == "uniform":
            if not (1 <= self.lo <= self.hi):
                raise GraphError(
                    f"uniform duration needs 1 <= min <= max, got [{self.lo}, {self.hi}]"
                )
        elif self.kind == "geometric":
            if not self.mean >= 1.0:
                raise GraphError(f"geometric duration needs mean >= 1, got {self.mean}")
        else:
            raise GraphError(f"unknown duration kind {self.kind!r}")

    def draw(self, rng: np.random.Generator) -> int:
        if self.kind == "uniform":
            return int(rng.integers(self.lo, self.hi + 1))
        return int(rng.geometric(1.0 / self.mean))

    def to_dict(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform", "min": self.lo, "max": self.hi}
        return {"kind": "geometric", "mean": self.mean}


@dataclass(frozen=True)
class WorkflowGraph:
    """Phase vocabulary, start/terminal marking, edges and dwell models."""

    phases: tuple[str, ...]
    start: int
    terminal: frozenset[int]
    edges: Mapping[int, tuple[tuple[int, float], ...]]
    durations: Mapping[int, Duration]

    @property
    def n_phases(self) -> int:
        return len(self.phases)

    def __post_init__(self):
        n = len(self.phases)
        if n < 2:
            raise GraphError("a graph needs at least two phases")
        if len(set(self.phases)) != n or any(not p for p in self.phases):
            raise GraphError("phase names must be unique and non-empty")
        if not 0 <= self.start < n:
            raise GraphError(f"start phase {self.start} out of range")
        if not self.terminal:
            raise GraphError("at least one terminal phase is required")
        if not all(0 <= t < n for t in self.terminal):
            raise GraphError("terminal phase id out of range")
        if set(self.durations) != set(range(n)):
            raise GraphError("every phase needs exactly one duration model")
        for src in range(n):
            out = self.edges.get(src, ())
            if src in self.terminal:
                if out:
                    raise GraphError(f"terminal phase {self.phases[src]!r} has outgoing edges")
                continue
            if not out:
                raise GraphError(f"non-terminal phase {self.phases[src]!r} has no outgoing edges")
            total = 0.0
            for dst, p in out:
                if not 0 <= dst < n:
                    raise GraphError(f"edge from {self.phases[src]!r} targets unknown phase {dst}")
                if dst == src:
                    raise GraphError(f"self-edge on phase {self.phases[src]!r}")
                if p < 0:
                    raise GraphError(f"negative probability on edge {src}->{dst}")
                total += p
            if abs(total - 1.0) > _PROB_TOL:
                raise GraphError(
                    f"outgoing probabilities of {self.phases[src]!r} sum to {total!r}, not 1"
                )
        # every phase must be able to finish
        reaches = set(self.terminal)
        changed = True
        while changed:
            changed = False
            for src in range(n):
                if src in reaches:
                    continue
                if any(dst in reaches for dst, _ in self.edges.get(src, ())):
                    reaches.add(src)
                    changed = True
        missing = sorted(set(range(n)) - reaches)
        if missing:
            names = [self.phases[i] for i in missing]
            raise GraphError(f"phases {names} cannot reach a terminal phase")

    def successors(self, phase: int) -> tuple[tuple[int, float], ...]:
        return self.edges.get(phase, ())


def sample_trajectory(graph: WorkflowGraph, rng: np.random.Generator,
                      video_id: str) -> PhaseSequence:
    """Sample one label sequence: start phase, dwell, hop, stop after a
    terminal phase's dwell completes."""
    labels: list[int] = []
    phase = graph.start
    while True:
        labels.extend([phase] * graph.durations[phase].draw(rng))
        if phase in graph.terminal:
            break
        succ = graph.successors(phase)
        targets = np.array([dst for dst, _ in succ])
        probs = np.array([p for _, p in succ], dtype=np.float64)
        phase = int(targets[rng.choice(len(targets), p=probs / probs.sum())])
    return PhaseSequence(video_id, np.asarray(labels, dtype=np.int64))


def prototype_matrix(n_phases: int, feature_dim: int) -> np.ndarray:
    """Fixed orthogonal unit prototypes (standard basis rows)."""
    if feature_dim < n_phases:
        raise ValueError(
            f"feature_dim must be >= n_phases to fit orthogonal prototypes, "
            f"got {feature_dim} < {n_phases}"
        )
    return np.eye(n_phases, feature_dim, dtype=np.float64)


def emit_features(seq: PhaseSequence, n_phases: int, feature_dim: int,
                  noise_sigma: float, rng: np.random.Generator,
                  confusion: np.ndarray | None = None) -> np.ndarray:
    """Per-second features: phase prototype + N(0, sigma^2 I) noise.

    With a confusion matrix, each second first draws a corrupted phase from
    the true phase's row, then emits that phase's prototype.
    """
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
    if seq.labels.max() >= n_phases:
        raise ValueError(
            f"{seq.video_id}: label {int(seq.labels.max())} outside [0, {n_phases})"
        )
    protos = prototype_matrix(n_phases, feature_dim)
    labels = seq.labels
    if confusion is not None:
        confusion = np.asarray(confusion, dtype=np.float64)
        if confusion.shape != (n_phases, n_phases):
            raise ValueError(
                f"confusion matrix shape {confusion.shape} != {(n_phases, n_phases)}"
            )
        if np.any(confusion < 0) or not np.allclose(confusion.sum(axis=1), 1.0, atol=_PROB_TOL):
            raise ValueError("confusion matrix rows must be stochastic")
        cdf = np.cumsum(confusion, axis=1)
        u = rng.random(len(seq))
        labels = np.array([int(np.searchsorted(cdf[l], x)) for l, x in zip(labels, u)])
        labels = np.minimum(labels, n_phases - 1)
    feats = protos[labels]
    if noise_sigma > 0:
        feats = feats + rng.normal(0.0, noise_sigma, size=(len(seq), feature_dim))
    return feats


# ---------------------------------------------------------------------------
# built-in graphs


def seven_phase_graph() -> WorkflowGraph:
    """Seven-phase cholecystectomy-style workflow, mostly linear with one
    backtrack and a packaging/cleaning order swap."""
    phases = (
        "Preparation",
        "Calot Triangle Dissection",
        "Clipping and Cutting",
        "Gallbladder Dissection",
        "Gallbladder Packaging",
        "Cleaning and Coagulation",
        "Gallbladder Retraction",
    )
    edges = {
        0: ((1, 1.0),),
        1: ((2, 1.0),),
        2: ((3, 0.8), (1, 0.2)),
        3: ((4, 0.65), (5, 0.35)),
        4: ((5, 0.6), (6, 0.4)),
        5: ((6, 0.7), (4, 0.3)),
    }
    durations = {
        0: Duration("uniform", 5, 12),
        1: Duration("uniform", 12, 25),
        2: Duration("uniform", 8, 16),
        3: Duration("uniform", 12, 25),
        4: Duration("uniform", 6, 12),
        5: Duration("uniform", 8, 16),
        6: Duration("uniform", 5, 10),
    }
    return WorkflowGraph(phases, start=0, terminal=frozenset({6}), edges=edges,
                         durations=durations)


def twelve_phase_graph() -> WorkflowGraph:
    """Twelve-phase fine-grained cholecystectomy workflow in three blocks
    (exposure, clip/divide with permutable order and backtracks, removal)."""
    phases = (
        "Port Placement",
        "Fundus Retraction",
        "Release Gallbladder Peritoneum",
        "Dissection of Calot's Triangle",
        "Checkpoint 1",
        "Clip Cystic Artery",
        "Clip Cystic Duct",
        "Divide Cystic Artery",
        "Divide Cystic Duct",
        "Checkpoint 2",
        "Remove Gallbladder from Liver Bed",
        "Bagging",
    )
    edges = {
        0: ((1, 1.0),),
        1: ((2, 1.0),),
        2: ((3, 0.85), (1, 0.15)),
        3: ((4, 0.7), (2, 0.3)),
        4: ((5, 0.45), (6, 0.45), (3, 0.1)),
        5: ((7, 0.5), (6, 0.4), (3, 0.1)),
        6: ((8, 0.5), (5, 0.4), (3, 0.1)),
        7: ((6, 0.45), (8, 0.2), (9, 0.35)),
        8: ((5, 0.3), (7, 0.25), (9, 0.45)),
        9: ((10, 0.9), (5, 0.05), (6, 0.05)),
        10: ((11, 0.95), (9, 0.05)),
    }
    durations = {
        0: Duration("uniform", 5, 10),
        1: Duration("uniform", 6, 12),
        2: Duration("uniform", 10, 20),
        3: Duration("uniform", 12, 25),
        4: Duration("uniform", 4, 8),
        5: Duration("uniform", 6, 12),
        6: Duration("uniform", 6, 12),
        7: Duration("uniform", 5, 10),
        8: Duration("uniform", 5, 10),
        9: Duration("uniform", 4, 8),
        10: Duration("uniform", 12, 25),
        11: Duration("uniform", 8, 15),
    }
    return WorkflowGraph(phases, start=0, terminal=frozenset({11}), edges=edges,
                         durations=durations)


BUILTIN_GRAPHS = {
    "seven_phase": seven_phase_graph,
    "twelve_phase": twelve_phase_graph,
}


def builtin_graph(name: str) -> WorkflowGraph:
    try:
        return BUILTIN_GRAPHS[name]()
    except KeyError:
        raise GraphError(
            f"unknown builtin graph {name!r}; available: {sorted(BUILTIN_GRAPHS)}"
        ) from None


# ---------------------------------------------------------------------------
# graph files


def save_graph(path, graph: WorkflowGraph) -> None:
    doc = {
        "schema_version": GRAPH_SCHEMA_VERSION,
        "phases": list(graph.phases),
        "start": graph.phases[graph.start],
        "terminal": [graph.phases[t] for t in sorted(graph.terminal)],
        "edges": [
            {"from": graph.phases[src], "to": graph.phases[dst], "p": float(p)}
            for src in range(graph.n_phases)
            for dst, p in graph.successors(src)
        ],
        "durations": {graph.phases[i]: d.to_dict() for i, d in sorted(graph.durations.items())},
    }
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def _duration_from_dict(d, context: str) -> Duration:
    if not isinstance(d, dict) or "kind" not in d:
        raise GraphError(f"{context}: duration must be a mapping with a 'kind'")
    kind = d["kind"]
    if kind == "uniform":
        extra = set(d) - {"kind", "min", "max"}
        if extra or "min" not in d or "max" not in d:
            raise GraphError(f"{context}: uniform duration needs exactly min/max")
        return Duration("uniform", lo=int(d["min"]), hi=int(d["max"]))
    if kind == "geometric":
        extra = set(d) - {"kind", "mean"}
        if extra or "mean" not in d:
            raise GraphError(f"{context}: geometric duration needs exactly mean")
        return Duration("geometric", mean=float(d["mean"]))
    raise GraphError(f"{context}: unknown duration kind {kind!r}")


def load_graph(path) -> WorkflowGraph:
    """Parse and validate a YAML graph definition (names resolved to ids)."""
    with open(path) as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise GraphError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise GraphError(f"{path}: graph file must be a mapping")
    allowed = {"schema_version", "phases", "start", "terminal", "edges", "durations"}
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise GraphError(f"{path}: unknown keys {unknown}")
    missing = sorted(allowed - set(doc))
    if missing:
        raise GraphError(f"{path}: missing keys {missing}")
    if doc["schema_version"] != GRAPH_SCHEMA_VERSION:
        raise GraphError(
            f"{path}: schema_version {doc['schema_version']!r} unsupported "
            f"(expected {GRAPH_SCHEMA_VERSION})"
        )
    phases = doc["phases"]
    if not isinstance(phases, list) or not all(isinstance(p, str) for p in phases):
        raise GraphError(f"{path}: phases must be a list of names")
    index = {name: i for i, name in enumerate(phases)}

    def resolve(name, context):
        if name not in index:
            raise GraphError(f"{path}: {context} references unknown phase {name!r}")
        return index[name]

    edges: dict[int, list[tuple[int, float]]] = {}
    if not isinstance(doc["edges"], list):
        raise GraphError(f"{path}: edges must be a list")
    for i, edge in enumerate(doc["edges"]):
        if not isinstance(edge, dict) or set(edge) != {"from", "to", "p"}:
            raise GraphError(f"{path}: edge #{i} must have exactly from/to/p")
        src = resolve(edge["from"], f"edge #{i}")
        dst = resolve(edge["to"], f"edge #{i}")
        edges.setdefault(src, []).append((dst, float(edge["p"])))

    if not isinstance(doc["durations"], dict):
        raise GraphError(f"{path}: durations must be a mapping")
    durations = {}
    for name, d in doc["durations"].items():
        durations[resolve(name, "durations")] = _duration_from_dict(d, f"{path}: duration of {name!r}")

    terminal = doc["terminal"]
    if not isinstance(terminal, list):
        raise GraphError(f"{path}: terminal must be a list of phase names")
    try:
        return WorkflowGraph(
            phases=tuple(phases),
            start=resolve(doc["start"], "start"),
            terminal=frozenset(resolve(t, "terminal") for t in terminal),
            edges={src: tuple(dsts) for src, dsts in edges.items()},
            durations=durations,
        )
    except GraphError as exc:
        raise GraphError(f"{path}: {exc}") from None
