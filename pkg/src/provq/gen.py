"""Deterministic synthetic workload generators.

Two generators cover the two operator families: one grows a single project
history as a provenance DAG (agents with skewed work rates, activities with
Poisson-sized input/output sets, recency-skewed input selection), the other
emits batches of conceptually similar segments whose activity types follow a
Markov chain drawn from a Dirichlet prior.

Randomness comes from counter-based Philox streams, one per draw site, so
adding a draw site never perturbs the values another site sees. The same
config and seed therefore reproduce byte-identical output documents.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass

import numpy as np

from .graph import Edge, EdgeType, ProvGraph, Vertex, VertexType, build

_COMMANDS = ("train", "clean", "plot", "merge", "eval", "commit")


class _Streams:
    """Named, independent Philox generators under one master seed."""

    _NAMES = (
        "bootstrap_agent",
        "agent_pick",
        "n_inputs",
        "n_outputs",
        "input_rank",
        "version_flag",
        "version_pick",
        "command",
        "transition",
        "initial_state",
    )

    def __init__(self, seed: int):
        self._gens = {
            name: np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), idx]))
            for idx, name in enumerate(self._NAMES)
        }

    def __getitem__(self, name: str) -> np.random.Generator:
        return self._gens[name]


class _ZipfSampler:
    """Truncated Zipf over ranks 1..n with n growing over time.

    Rank weights depend only on the rank, so one growing prefix-sum array
    serves every support size; each draw re-normalizes by truncation, i.e. it
    inverts the cdf at the current support length.
    """

    def __init__(self, skew: float):
        self.skew = skew
        self._cum: list[float] = [0.0]

    def _extend(self, n: int) -> None:
        while len(self._cum) <= n:
            r = len(self._cum)
            self._cum.append(self._cum[-1] + r ** -self.skew)

    def pmf(self, rank: int, n: int) -> float:
        self._extend(n)
        return (rank**-self.skew) / self._cum[n]

    def draw(self, rng: np.random.Generator, n: int) -> int:
        """A rank in 1..n, newest-favoring for skew > 1."""
        self._extend(n)
        u = rng.random() * self._cum[n]
        lo = bisect_left(self._cum, u, 1, n)
        return lo


def _zipf_pick(rng: np.random.Generator, weights: list[float]) -> int:
    total = sum(weights)
    u = rng.random() * total
    acc = 0.0
    for idx, w in enumerate(weights):
        acc += w
        if u <= acc:
            return idx
    return len(weights) - 1


@dataclass(frozen=True)
class SynPGConfig:
    n: int = 1000
    s_w: float = 1.2
    lambda_i: float = 2.0
    lambda_o: float = 2.0
    s_e: float = 1.5
    p_ver: float = 0.5
    seed: int = 0
    log_base: float = math.e  # agent count is floor(log_base(n))

    def __post_init__(self) -> None:
        if self.n < 10:
            raise ValueError("n must be at least 10")
        if self.s_w <= 1 or self.s_e <= 1:
            raise ValueError("zipf skews must exceed 1")
        if self.lambda_i < 0 or self.lambda_o < 0:
            raise ValueError("poisson means must be non-negative")
        if not (0 <= self.p_ver <= 1):
            raise ValueError("p_ver must lie in [0, 1]")


@dataclass(frozen=True)
class SynSGConfig:
    alpha: float = 0.1
    k: int = 5
    n: int = 20
    num_segments: int = 10
    lambda_i: float = 2.0
    lambda_o: float = 2.0
    s_e: float = 1.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.k < 1 or self.n < 1 or self.num_segments < 1:
            raise ValueError("k, n and the segment count must be at least 1")
        if self.lambda_i < 0 or self.lambda_o < 0:
            raise ValueError("poisson means must be non-negative")


class _GraphBuilder:
    """Accumulates vertices/edges with automatic ids and seq numbering."""

    def __init__(self) -> None:
        self.vertices: list[Vertex] = []
        self.edges: list[Edge] = []

    def add_vertex(self, vtype: VertexType, props: dict) -> int:
        vid = len(self.vertices)
        self.vertices.append(Vertex(id=vid, vtype=vtype, seq=vid, props=props))
        return vid

    def add_edge(self, etype: EdgeType, src: int, dst: int) -> int:
        eid = len(self.edges)
        self.edges.append(Edge(id=eid, etype=etype, src=src, dst=dst))
        return eid

    def build(self, property_types: set[str]) -> ProvGraph:
        return build(self.vertices, self.edges, property_types=property_types)


def _pick_inputs(
    rng: np.random.Generator, zipf: _ZipfSampler, entities: list[int], count: int
) -> list[int]:
    """Distinct existing entities, recency-ranked (rank 1 = newest). Draws
    rejected on collision; after a bounded number of retries the next unused
    rank outward is taken so the procedure stays total and deterministic."""
    n = len(entities)
    count = min(count, n)
    chosen: set[int] = set()
    out: list[int] = []
    for _ in range(count):
        rank = zipf.draw(rng, n)
        tries = 0
        while rank in chosen and tries < 16:
            rank = zipf.draw(rng, n)
            tries += 1
        while rank in chosen:
            rank = rank % n + 1
        chosen.add(rank)
        out.append(entities[n - rank])
    return out


def synpg(cfg: SynPGConfig) -> ProvGraph:
    """One project history: a few bootstrap entities, then activities that
    use recent entities and generate fresh ones, optionally as new versions
    of existing artifacts (adding a derivation edge to the previous latest)."""
    streams = _Streams(cfg.seed)
    b = _GraphBuilder()
    zipf_recency = _ZipfSampler(cfg.s_e)

    # Guard against float dust just under an integer (e.g. log10(1000)).
    n_agents = max(1, int(math.log(cfg.n) / math.log(cfg.log_base) + 1e-9))
    n_activities = int(cfg.n // (2 + cfg.lambda_o))
    agent_weights = [(rank + 1) ** -cfg.s_w for rank in range(n_agents)]

    agents = [b.add_vertex(VertexType.AGENT, {"name": f"agent{i}"}) for i in range(n_agents)]

    entities: list[int] = []  # in order of being
    artifacts: list[tuple[int, int]] = []  # (artifact id, latest version vertex)

    def new_entity(artifact: int, version: int) -> int:
        vid = b.add_vertex(
            VertexType.ENTITY, {"name": f"artifact{artifact}-v{version}", "artifact": artifact}
        )
        entities.append(vid)
        return vid

    n_bootstrap = math.ceil(cfg.lambda_i) + 1
    for i in range(n_bootstrap):
        vid = new_entity(artifact=i, version=1)
        owner = _zipf_pick(streams["bootstrap_agent"], agent_weights)
        b.add_edge(EdgeType.WAS_ATTRIBUTED_TO, vid, agents[owner])
        artifacts.append((i, vid))

    versions: dict[int, int] = {i: 1 for i in range(n_bootstrap)}

    for _ in range(n_activities):
        agent = _zipf_pick(streams["agent_pick"], agent_weights)
        n_in = 1 + int(streams["n_inputs"].poisson(cfg.lambda_i))
        n_out = 1 + int(streams["n_outputs"].poisson(cfg.lambda_o))
        inputs = _pick_inputs(streams["input_rank"], zipf_recency, entities, n_in)
        command = _COMMANDS[int(streams["command"].integers(len(_COMMANDS)))]
        act = b.add_vertex(VertexType.ACTIVITY, {"command": command})
        b.add_edge(EdgeType.WAS_ASSOCIATED_WITH, act, agents[agent])
        for e in inputs:
            b.add_edge(EdgeType.USED, act, e)
        for _ in range(n_out):
            if artifacts and streams["version_flag"].random() < cfg.p_ver:
                slot = int(streams["version_pick"].integers(len(artifacts)))
                artifact, prev = artifacts[slot]
                versions[artifact] += 1
                vid = new_entity(artifact, versions[artifact])
                b.add_edge(EdgeType.WAS_DERIVED_FROM, vid, prev)
                artifacts[slot] = (artifact, vid)
            else:
                artifact = len(versions)
                versions[artifact] = 1
                vid = new_entity(artifact, 1)
                artifacts.append((artifact, vid))
            b.add_edge(EdgeType.WAS_GENERATED_BY, vid, act)
    return b.build({"name", "command", "artifact"})


def draw_transition_matrix(cfg: SynSGConfig, streams: _Streams) -> np.ndarray:
    """Row-stochastic k-by-k matrix, rows drawn from Dirichlet(alpha * 1)."""
    return streams["transition"].dirichlet([cfg.alpha] * cfg.k, size=cfg.k)


def synsg(cfg: SynSGConfig) -> list[ProvGraph]:
    """Conceptually similar segments: one transition matrix per call, each
    segment a chain-driven sequence of typed activities with inputs and
    outputs wired like the project generator. Activity class labels carry the
    chain state; all entities share one class label."""
    streams = _Streams(cfg.seed)
    matrix = draw_transition_matrix(cfg, streams)
    zipf_recency = _ZipfSampler(cfg.s_e)
    segments = []
    for _ in range(cfg.num_segments):
        b = _GraphBuilder()
        entities: list[int] = []
        n_bootstrap = math.ceil(cfg.lambda_i) + 1
        for _ in range(n_bootstrap):
            entities.append(b.add_vertex(VertexType.ENTITY, {"label": "artifact"}))
        state = int(streams["initial_state"].integers(cfg.k))
        for _ in range(cfg.n):
            n_in = 1 + int(streams["n_inputs"].poisson(cfg.lambda_i))
            n_out = 1 + int(streams["n_outputs"].poisson(cfg.lambda_o))
            act = b.add_vertex(VertexType.ACTIVITY, {"label": f"t{state}"})
            for e in _pick_inputs(streams["input_rank"], zipf_recency, entities, n_in):
                b.add_edge(EdgeType.USED, act, e)
            for _ in range(n_out):
                vid = b.add_vertex(VertexType.ENTITY, {"label": "artifact"})
                b.add_edge(EdgeType.WAS_GENERATED_BY, vid, act)
                entities.append(vid)
            state = int(streams["transition"].choice(cfg.k, p=matrix[state]))
        segments.append(b.build({"label"}))
    return segments
