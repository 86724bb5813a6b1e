"""Partially-Observable Graph Search environment.

The agent walks a procedurally generated connected graph and must reach a
target node, seeing only the adjacency of nodes within a hop radius of its
position. Exploration inefficiency is measured by the backtrack count: the
number of steps that return to the node occupied two steps earlier.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .errors import GenerationError, UsageError


@dataclass
class PogsConfig:
    num_nodes: int = 30
    k_nearest: int = 2
    min_start_target_distance: int = 12
    extra_edge_fraction: float = 0.0
    max_steps: Optional[int] = None  # defaults to 3 * num_nodes
    # Spine-and-ribs topology: a long main corridor provides the start/target
    # distance, short side branches provide off-route frontiers. Retargeting
    # toward a rib reverses direction, so replanning churn is visible, while
    # committed detours stay short.
    spine_fraction: float = 0.6
    rib_len_min: int = 3
    rib_len_max: int = 5

    def horizon(self) -> int:
        return self.max_steps if self.max_steps is not None else 3 * self.num_nodes

    def validate(self) -> None:
        if self.num_nodes < 2:
            raise ValueError("num_nodes must be >= 2")
        if self.k_nearest < 1:
            raise ValueError("k_nearest must be >= 1")
        if self.min_start_target_distance < 1:
            raise ValueError("min_start_target_distance must be >= 1")
        if not 0.0 <= self.extra_edge_fraction <= 1.0:
            raise ValueError("extra_edge_fraction must lie in [0, 1]")
        if self.horizon() < 1:
            raise ValueError("max_steps must be >= 1")
        if not 0.0 < self.spine_fraction <= 1.0:
            raise ValueError("spine_fraction must lie in (0, 1]")
        if not 1 <= self.rib_len_min <= self.rib_len_max:
            raise ValueError("rib lengths must satisfy 1 <= min <= max")


@dataclass
class PogsInstance:
    config: PogsConfig
    adjacency: dict[int, set[int]]
    start_node: int
    target_node: int
    current_node: int
    visit_sequence: list[int] = field(default_factory=list)
    step_count: int = 0
    done: bool = False
    status: str = "running"  # running | success | timeout

    def neighbors(self, node: int) -> set[int]:
        return self.adjacency[node]

    def edge_set(self) -> set[tuple[int, int]]:
        return {(a, b) for a, nbrs in self.adjacency.items() for b in nbrs if a < b}


@dataclass
class PogsObservation:
    visible_adjacency: dict[int, list[int]]
    current_node: int
    target_node: int
    text_render: str


def _spine_ribs_tree(config: PogsConfig,
                     rng: random.Random) -> list[tuple[int, int]]:
    """Random labeled spanning tree shaped as a spine with short ribs."""
    n = config.num_nodes
    labels = list(range(n))
    rng.shuffle(labels)
    spine_n = max(2, min(n, round(n * config.spine_fraction)))
    spine = labels[:spine_n]
    edges = [(min(a, b), max(a, b)) for a, b in zip(spine, spine[1:])]
    rest = labels[spine_n:]
    while rest:
        length = min(rng.randint(config.rib_len_min, config.rib_len_max),
                     len(rest))
        prev = rng.choice(spine[1:-1]) if len(spine) > 2 else spine[0]
        for _ in range(length):
            v = rest.pop()
            edges.append((min(prev, v), max(prev, v)))
            prev = v
    return edges


def hop_distances(adjacency: dict[int, set[int]], source: int) -> dict[int, int]:
    """BFS hop distance from `source` to every reachable node."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        node = queue.popleft()
        for nbr in adjacency[node]:
            if nbr not in dist:
                dist[nbr] = dist[node] + 1
                queue.append(nbr)
    return dist


def generate_graph(config: PogsConfig, seed: int,
                   max_regenerations: int = 200) -> PogsInstance:
    """Build a connected instance satisfying the start/target distance bound.

    A random spine-and-ribs spanning tree guarantees connectivity; a
    configurable fraction of extra non-tree edges controls density.
    Start/target pairs are resampled up to 100 times per graph before the
    graph itself is regenerated.
    """
    config.validate()
    rng = random.Random(f"pogs:{seed}")
    n = config.num_nodes
    for _ in range(max_regenerations):
        edges = set(_spine_ribs_tree(config, rng))
        n_extra = int(config.extra_edge_fraction * n)
        non_tree = [(a, b) for a in range(n) for b in range(a + 1, n)
                    if (a, b) not in edges]
        if n_extra > 0 and non_tree:
            extra = rng.sample(non_tree, min(n_extra, len(non_tree)))
            edges.update(extra)
        adjacency: dict[int, set[int]] = {i: set() for i in range(n)}
        for a, b in edges:
            adjacency[a].add(b)
            adjacency[b].add(a)

        for _ in range(100):
            start = rng.randrange(n)
            target = rng.randrange(n)
            if start == target:
                continue
            if hop_distances(adjacency, start).get(target, 0) \
                    >= config.min_start_target_distance:
                return PogsInstance(
                    config=config,
                    adjacency=adjacency,
                    start_node=start,
                    target_node=target,
                    current_node=start,
                    visit_sequence=[start],
                )
    raise GenerationError(
        f"could not satisfy min_start_target_distance="
        f"{config.min_start_target_distance} with num_nodes={n}")


def observe(instance: PogsInstance) -> PogsObservation:
    """Adjacency of every node within the visibility hop radius.

    Fringe nodes (one hop past the radius) appear only inside neighbor
    lists, never as keys.
    """
    k = instance.config.k_nearest
    dist = {instance.current_node: 0}
    queue = deque([instance.current_node])
    while queue:
        node = queue.popleft()
        if dist[node] == k:
            continue
        for nbr in instance.adjacency[node]:
            if nbr not in dist:
                dist[nbr] = dist[node] + 1
                queue.append(nbr)
    visible = {node: sorted(instance.adjacency[node]) for node in sorted(dist)}
    lines = [f"Current node: {instance.current_node}",
             f"Target node: {instance.target_node}",
             "Visible adjacency:"]
    for node in sorted(visible):
        lines.append(f"node {node}: neighbors " + ", ".join(map(str, visible[node])))
    return PogsObservation(
        visible_adjacency=visible,
        current_node=instance.current_node,
        target_node=instance.target_node,
        text_render="\n".join(lines),
    )


def step(instance: PogsInstance, action_text: str):
    """Move along an edge named by an integer action.

    Invalid actions (non-integers, non-neighbors) consume the step and leave
    the position unchanged. Reaching the target yields reward 1.0.
    """
    if instance.done:
        raise UsageError("episode already finished")
    info: dict = {"invalid": False}
    try:
        dest = int(action_text.strip())
    except (ValueError, AttributeError):
        dest = None
    if dest is not None and dest in instance.adjacency[instance.current_node]:
        instance.current_node = dest
        instance.visit_sequence.append(dest)
    else:
        info["invalid"] = True

    instance.step_count += 1
    reward = 0.0
    if instance.current_node == instance.target_node:
        reward = 1.0
        instance.done = True
        instance.status = "success"
    elif instance.step_count >= instance.config.horizon():
        instance.done = True
        instance.status = "timeout"
    info["node"] = instance.current_node
    return observe(instance), reward, instance.done, info


def backtrack_count(visit_sequence: list[int]) -> int:
    """Number of indices t >= 2 with node_t == node_{t-2}."""
    return sum(1 for t in range(2, len(visit_sequence))
               if visit_sequence[t] == visit_sequence[t - 2])


def shortest_path_oracle(adjacency: dict[int, set[int]], source: int,
                         goal: int) -> list[int]:
    """Shortest path by BFS over the full graph, ties broken by smallest label."""
    if source not in adjacency or goal not in adjacency:
        raise UsageError("both endpoints must exist in the graph")
    if source == goal:
        return [source]
    parent: dict[int, int] = {source: source}
    queue = deque([source])
    while queue:
        node = queue.popleft()
        for nbr in sorted(adjacency[node]):
            if nbr not in parent:
                parent[nbr] = node
                if nbr == goal:
                    path = [goal]
                    while path[-1] != source:
                        path.append(parent[path[-1]])
                    return path[::-1]
                queue.append(nbr)
    raise UsageError(f"no path from {source} to {goal}")


POGS_SYSTEM_PROMPT_ID = "pogs_system"


def system_prompt(config: PogsConfig) -> str:
    from .llm import load_prompt_body
    body = load_prompt_body(POGS_SYSTEM_PROMPT_ID)
    return body.format(num_nodes=config.num_nodes, k_nearest=config.k_nearest)
