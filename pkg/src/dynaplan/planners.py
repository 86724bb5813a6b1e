"""Scripted planning and acting: frontier search for POGS, a goal-stack
errand planner for CraftLite, plan following, and reactive fallbacks.

Plans serialize to readable text ("reach node 7 via: 3, 5, 7") so that token
accounting and the output grammar are exercised identically for scripted and
model-backed policies. Planning events may retarget to a random frontier with
probability epsilon; committed execution between planning events is what a
higher planning interval buys.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from . import craftlite as cl
from .craftlite import CraftObservation, DIRECTIONS, GRASS
from .errors import PlanningError
from .pogs import PogsObservation
from .protocol import (PLAN_STEPS_SEP, PlanState, parse_plan_steps,
                       render_plan_text)

DEFAULT_EPSILON = 0.3


@dataclass
class NoiseParams:
    """Probability that a planning event retargets to a random frontier."""

    retarget_prob: float = DEFAULT_EPSILON
    tie_break_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.retarget_prob <= 1.0:
            raise ValueError("retarget_prob must lie in [0, 1]")


@dataclass
class Plan:
    steps: list[str]
    goal_tag: str
    created_at: int = 0

    @property
    def text(self) -> str:
        return render_plan_text(self.goal_tag, self.steps)

    @classmethod
    def from_text(cls, text: str, created_at: int = 0) -> "Plan":
        goal_tag = text.split(PLAN_STEPS_SEP)[0]
        return cls(steps=parse_plan_steps(text), goal_tag=goal_tag,
                   created_at=created_at)


# ---------------------------------------------------------------------------
# Memory maps: the union of everything observed so far in an episode.
# ---------------------------------------------------------------------------

@dataclass
class PogsMemory:
    adjacency: dict[int, set[int]] = field(default_factory=dict)
    fringe: set[int] = field(default_factory=set)
    current: int = 0
    visited: set[int] = field(default_factory=set)
    novelty: bool = False

    def known_count(self) -> int:
        return len(set(self.adjacency) | self.fringe)

    def update(self, obs: PogsObservation) -> None:
        before = self.known_count()
        for node, nbrs in obs.visible_adjacency.items():
            self.adjacency[node] = set(nbrs)
        seen = set(self.adjacency)
        neighbor_labels = {n for nbrs in self.adjacency.values() for n in nbrs}
        self.fringe = neighbor_labels - seen
        self.current = obs.current_node
        self.visited.add(obs.current_node)
        self.novelty = self.known_count() > before

    def frontier_nodes(self) -> list[int]:
        """Observed labels whose own adjacency is still unknown."""
        return sorted(self.fringe)

    def known(self, node: int) -> bool:
        return node in self.adjacency or node in self.fringe

    def observed_graph(self) -> dict[int, set[int]]:
        graph: dict[int, set[int]] = {}
        for node, nbrs in self.adjacency.items():
            graph.setdefault(node, set()).update(nbrs)
            for n in nbrs:
                graph.setdefault(n, set()).add(node)
        return graph


@dataclass
class CraftMemory:
    tiles: dict[tuple[int, int], str] = field(default_factory=dict)
    width: int = 0
    height: int = 0
    novelty: bool = False

    def update(self, obs: CraftObservation) -> None:
        before = len(self.tiles)
        self.tiles.update(obs.view)
        self.novelty = len(self.tiles) > before

    def known_count(self) -> int:
        return len(self.tiles)

    def frontier_cells(self) -> list[tuple[int, int]]:
        """Known grass cells adjacent to at least one unknown in-bounds cell."""
        out = []
        for (x, y), t in self.tiles.items():
            if t != GRASS:
                continue
            for dx, dy in DIRECTIONS.values():
                nxt = (x + dx, y + dy)
                if 0 <= nxt[0] < self.width and 0 <= nxt[1] < self.height \
                        and nxt not in self.tiles:
                    out.append((x, y))
                    break
        return sorted(out, key=lambda p: (p[1], p[0]))


# ---------------------------------------------------------------------------
# POGS planning
# ---------------------------------------------------------------------------

def _bfs_tree(graph: dict[int, set[int]], source: int):
    """Distances and smallest-label-tie-break parents over a sparse graph."""
    dist = {source: 0}
    parent = {source: source}
    queue = deque([source])
    while queue:
        node = queue.popleft()
        for nbr in sorted(graph.get(node, ())):
            if nbr not in dist:
                dist[nbr] = dist[node] + 1
                parent[nbr] = node
                queue.append(nbr)
    return dist, parent


def _path_from(parent: dict[int, int], source: int, goal: int) -> list[int]:
    path = [goal]
    while path[-1] != source:
        path.append(parent[path[-1]])
    return path[::-1]


def incumbent_goal(plan_text: Optional[str]):
    """Extract the committed goal from a plan's serialized text.

    Returns an int node label ("reach node 7"), an (x, y) cell
    ("explore 7,3"), or None for target pursuit / errand plans.
    """
    if not plan_text:
        return None
    tag = plan_text.split(PLAN_STEPS_SEP)[0] if PLAN_STEPS_SEP in plan_text \
        else plan_text
    if tag.startswith("reach node "):
        try:
            return int(tag.removeprefix("reach node "))
        except ValueError:
            return None
    if tag.startswith("explore ") and "," in tag:
        try:
            x, y = tag.removeprefix("explore ").split(",")
            return (int(x), int(y))
        except ValueError:
            return None
    return None


def pogs_plan_options(memory: PogsMemory, target: int, noise: NoiseParams,
                      prev_goal: Optional[int] = None
                      ) -> list[tuple[float, Plan]]:
    """Distribution over the plans a planning event may produce.

    The planning policy conditions on the previous plan: a committed frontier
    goal is kept until reached or invalidated, and every planning event
    retargets to a uniformly random frontier with probability retarget_prob.
    With no live commitment the best goal is the target when known, else the
    closest frontier. Frequent replanning therefore re-rolls goals often
    (churn), while infrequent replanning commits.
    """
    if not memory.adjacency:
        raise PlanningError("cannot plan from an empty memory")
    graph = memory.observed_graph()
    dist, parent = _bfs_tree(graph, memory.current)

    def plan_to(node: int, tag: str) -> Plan:
        steps = [str(n) for n in _path_from(parent, memory.current, node)[1:]]
        return Plan(steps=steps, goal_tag=tag)

    frontiers = [f for f in memory.frontier_nodes()
                 if f in dist and f != memory.current]
    target_known = memory.known(target) and target in dist \
        and target != memory.current

    if not frontiers:
        if target_known:
            return [(1.0, plan_to(target, "reach target"))]
        raise PlanningError("no frontier node and target unseen")

    if prev_goal is not None and prev_goal in frontiers:
        best = plan_to(prev_goal, f"reach node {prev_goal}")
    elif target_known:
        best = plan_to(target, "reach target")
    else:
        closest = min(frontiers, key=lambda f: (dist[f], f))
        best = plan_to(closest, f"reach node {closest}")

    eps = noise.retarget_prob
    options = {best.goal_tag: [1.0 - eps, best]}
    for f in frontiers:
        plan = plan_to(f, f"reach node {f}")
        entry = options.setdefault(plan.goal_tag, [0.0, plan])
        entry[0] += eps / len(frontiers)
    return [(p, plan) for p, plan in options.values() if p > 0.0]


def _sample_options(options: list[tuple[float, Plan]], rng: random.Random) -> Plan:
    r = rng.random()
    acc = 0.0
    for p, plan in options:
        acc += p
        if r < acc:
            return plan
    return options[-1][1]


def pogs_plan(memory: PogsMemory, target: int, noise: NoiseParams,
              rng: random.Random, prev_goal: Optional[int] = None) -> Plan:
    """Shortest observed path to the target when known (and no commitment is
    live), else to a frontier node; see pogs_plan_options for the mixture."""
    return _sample_options(pogs_plan_options(memory, target, noise, prev_goal),
                           rng)


# ---------------------------------------------------------------------------
# CraftLite planning: a virtual-state errand builder
# ---------------------------------------------------------------------------

class _Builder:
    """Simulates (position, facing, inventory, tiles) while composing steps.

    Move semantics mirror the environment: moving into a walkable tile
    relocates the agent; moving into anything else only turns it.
    """

    def __init__(self, memory: CraftMemory, summary: CraftObservation):
        self.tiles = dict(memory.tiles)
        self.width = memory.width
        self.height = memory.height
        self.pos = summary.position
        self.facing = summary.facing
        self.inv = dict(summary.inventory)
        self.steps: list[str] = []
        self._paths_cache = None  # (pos, dist, parent); dropped on mutation

    def walkable(self, pos) -> bool:
        return self.tiles.get(pos) == GRASS

    def move(self, direction: str) -> None:
        self.steps.append(f"move {direction}")
        self.facing = direction
        dx, dy = DIRECTIONS[direction]
        dest = (self.pos[0] + dx, self.pos[1] + dy)
        if self.walkable(dest):
            self.pos = dest
            self._paths_cache = None

    def faced(self) -> tuple[int, int]:
        dx, dy = DIRECTIONS[self.facing]
        return (self.pos[0] + dx, self.pos[1] + dy)

    def grass_distances(self) -> dict[tuple[int, int], int]:
        return self.grass_paths()[0]

    def grass_paths(self):
        """Single-source BFS: (distances, parents) over known grass."""
        if self._paths_cache is not None and self._paths_cache[0] == self.pos:
            return self._paths_cache[1], self._paths_cache[2]
        dist = {self.pos: 0}
        parent: dict[tuple[int, int], tuple[int, int]] = {}
        queue = deque([self.pos])
        while queue:
            p = queue.popleft()
            for dx, dy in DIRECTIONS.values():
                nxt = (p[0] + dx, p[1] + dy)
                if nxt not in dist and self.walkable(nxt):
                    dist[nxt] = dist[p] + 1
                    parent[nxt] = p
                    queue.append(nxt)
        self._paths_cache = (self.pos, dist, parent)
        return dist, parent

    def walk_via(self, parent: dict, goal: tuple[int, int]) -> None:
        """Append the moves of a precomputed BFS path ending at `goal`."""
        path = [goal]
        while path[-1] != self.pos:
            path.append(parent[path[-1]])
        path.reverse()
        for a, b in zip(path, path[1:]):
            delta = (b[0] - a[0], b[1] - a[1])
            for dname, d in DIRECTIONS.items():
                if d == delta:
                    self.move(dname)
                    break

    def _walk_to(self, goal: tuple[int, int]) -> bool:
        """Append moves along a shortest known-grass path to `goal`."""
        if goal == self.pos:
            return True
        dist = {self.pos: 0}
        parent: dict[tuple[int, int], tuple[int, int]] = {}
        queue = deque([self.pos])
        while queue:
            p = queue.popleft()
            if p == goal:
                break
            for dname, (dx, dy) in DIRECTIONS.items():
                nxt = (p[0] + dx, p[1] + dy)
                if nxt not in dist and self.walkable(nxt):
                    dist[nxt] = dist[p] + 1
                    parent[nxt] = p
                    queue.append(nxt)
        if goal not in dist:
            return False
        path = [goal]
        while path[-1] != self.pos:
            path.append(parent[path[-1]])
        path.reverse()
        for a, b in zip(path, path[1:]):
            delta = (b[0] - a[0], b[1] - a[1])
            for dname, d in DIRECTIONS.items():
                if d == delta:
                    self.move(dname)
                    break
        return True

    def approach(self, goal: tuple[int, int]) -> bool:
        """Walk adjacent to `goal` (a non-walkable tile) and face it."""
        dist = self.grass_distances()
        spots = []
        for dx, dy in DIRECTIONS.values():
            spot = (goal[0] + dx, goal[1] + dy)
            if spot in dist:
                spots.append((dist[spot], spot))
        if not spots:
            return False
        _, spot = min(spots, key=lambda s: (s[0], s[1][1], s[1][0]))
        if not self._walk_to(spot):
            return False
        delta = (goal[0] - self.pos[0], goal[1] - self.pos[1])
        for dname, d in DIRECTIONS.items():
            if d == delta:
                if self.faced() != goal or self.facing != dname:
                    self.move(dname)  # blocked move, acts as a turn
                return True
        return False

    def nearest(self, tile_name: str) -> Optional[tuple[int, int]]:
        dist = self.grass_distances()
        best = None
        for pos in sorted((p for p, t in self.tiles.items() if t == tile_name),
                          key=lambda p: (p[1], p[0])):
            d = min((dist.get((pos[0] + dx, pos[1] + dy)) for dx, dy in
                     DIRECTIONS.values()
                     if dist.get((pos[0] + dx, pos[1] + dy)) is not None),
                    default=None)
            if d is not None and (best is None or d < best[0]):
                best = (d, pos)
        return best[1] if best else None

    def collect(self, tile_pos: tuple[int, int]) -> None:
        rule = cl.RECIPES["collect"][self.tiles[tile_pos]]
        self.steps.append("collect")
        self.inv[rule["yields"]] = self.inv.get(rule["yields"], 0) + 1
        if rule["consumes_tile"]:
            self.tiles[tile_pos] = GRASS
            self._paths_cache = None

    def face_grass(self) -> bool:
        """Arrange to face a grass tile (for placement), preferring no motion."""
        if self.walkable(self.faced()):
            return True
        x, y = self.pos
        for dname, (dx, dy) in DIRECTIONS.items():
            one = (x + dx, y + dy)
            two = (x + 2 * dx, y + 2 * dy)
            if self.walkable(one) and self.walkable(two):
                self.move(dname)
                return True
        return False

    def place(self, product: str) -> None:
        rule = cl.RECIPES["place"][product]
        self.steps.append(f"place {product}")
        for res, n in rule["consumes"].items():
            self.inv[res] = self.inv.get(res, 0) - n
        self.tiles[self.faced()] = product
        self._paths_cache = None

    def craft(self, product: str) -> None:
        rule = cl.RECIPES["craft"][product]
        self.steps.append(f"craft {product}")
        for res, n in rule["consumes"].items():
            self.inv[res] = self.inv.get(res, 0) - n
        self.inv[product] = self.inv.get(product, 0) + 1


_TOOL_CRAFT_ACHIEVEMENT = {
    "wood_pickaxe": "craft_wood_pickaxe",
    "stone_pickaxe": "craft_stone_pickaxe",
    "iron_pickaxe": "craft_iron_pickaxe",
}
_RESOURCE_TILE = {"wood": cl.TREE, "stone": cl.STONE, "iron": cl.IRON}


def _ensure_resource(b: _Builder, resource: str, amount: int) -> Optional[str]:
    """Append collection steps until `resource` reaches `amount` in the
    virtual inventory. Returns None on success, or the blocker:
    "explore" (tile unknown/unreachable) or a tool-craft achievement name."""
    tile = _RESOURCE_TILE[resource]
    rule = cl.RECIPES["collect"][tile]
    tool = rule["requires_tool"]
    if tool is not None and b.inv.get(tool, 0) < 1:
        return _TOOL_CRAFT_ACHIEVEMENT[tool]
    guard = 0
    while b.inv.get(resource, 0) < amount:
        guard += 1
        if guard > 8:
            return "explore"
        pos = b.nearest(tile)
        if pos is None:
            return "explore"
        if not b.approach(pos):
            return "explore"
        while b.inv.get(resource, 0) < amount and not rule["consumes_tile"]:
            b.collect(pos)
        if rule["consumes_tile"] and b.inv.get(resource, 0) < amount:
            b.collect(pos)
    return None


def _ensure_station(b: _Builder, station: str) -> Optional[str]:
    """Finish with the agent adjacent to a `station` tile (table/furnace),
    placing a new one when none is known."""
    pos = b.nearest(station)
    if pos is not None:
        adjacent_now = any(b.tiles.get((b.pos[0] + dx, b.pos[1] + dy)) == station
                           for dx, dy in DIRECTIONS.values())
        if adjacent_now:
            return None
        return None if b.approach(pos) else "explore"
    for res, n in cl.RECIPES["place"][station]["consumes"].items():
        blocker = _ensure_resource(b, res, n)
        if blocker:
            return blocker
    if not b.face_grass():
        return "explore"
    b.place(station)
    return None


def _resolve_achievement(b: _Builder, achievement: str) -> Optional[str]:
    """Compose the errand completing `achievement`; returns a blocker or None."""
    if achievement == "collect_wood":
        return _ensure_resource(b, "wood", b.inv.get("wood", 0) + 1)
    if achievement == "place_table":
        blocker = _ensure_resource(b, "wood", 1)
        if blocker:
            return blocker
        if not b.face_grass():
            return "explore"
        b.place("table")
        return None
    if achievement == "place_furnace":
        blocker = _ensure_resource(b, "stone", 1)
        if blocker:
            return blocker
        if not b.face_grass():
            return "explore"
        b.place("furnace")
        return None
    if achievement in ("craft_wood_pickaxe", "craft_stone_pickaxe",
                       "craft_iron_pickaxe"):
        product = achievement.removeprefix("craft_")
        rule = cl.RECIPES["craft"][product]
        station = rule["requires_adjacent"]
        # Reserve one extra wood/stone when the station must still be placed.
        extra = {} if b.nearest(station) is not None \
            else dict(cl.RECIPES["place"][station]["consumes"])
        for res, n in rule["consumes"].items():
            blocker = _ensure_resource(b, res, n + extra.get(res, 0))
            if blocker:
                return blocker
        blocker = _ensure_station(b, station)
        if blocker:
            return blocker
        b.craft(product)
        return None
    if achievement in ("collect_stone", "collect_iron"):
        resource = achievement.removeprefix("collect_")
        return _ensure_resource(b, resource, b.inv.get(resource, 0) + 1)
    if achievement == "collect_diamond":
        if b.inv.get("iron_pickaxe", 0) < 1:
            return "craft_iron_pickaxe"
        diamonds = sorted((p for p, t in b.tiles.items() if t == cl.DIAMOND),
                          key=lambda p: (p[1], p[0]))
        if not diamonds:
            return "explore"
        for dpos in diamonds:
            if b.approach(dpos):
                b.collect(dpos)
                return None
        # Every diamond is walled off: mine through a reachable stone neighbor.
        dist = b.grass_distances()
        for dpos in diamonds:
            for dx, dy in DIRECTIONS.values():
                spos = (dpos[0] + dx, dpos[1] + dy)
                if b.tiles.get(spos) != cl.STONE:
                    continue
                if not any(dist.get((spos[0] + ddx, spos[1] + ddy)) is not None
                           for ddx, ddy in DIRECTIONS.values()):
                    continue
                if b.inv.get("wood_pickaxe", 0) < 1:
                    return "craft_wood_pickaxe"
                if not b.approach(spos):
                    continue
                b.collect(spos)
                if b.approach(dpos):
                    b.collect(dpos)
                    return None
        return "explore"
    return "explore"


def _exploration_cells(memory: CraftMemory, summary: CraftObservation,
                       noise: NoiseParams, prev_goal=None):
    """Epsilon-mixture over frontier cells, honoring a committed one.
    Returns ([(prob, cell)], parents) or None when nothing is reachable."""
    b = _Builder(memory, summary)
    frontiers = memory.frontier_cells()
    dist, parent = b.grass_paths()
    reachable = [f for f in frontiers if f in dist]
    if not reachable:
        return None
    if isinstance(prev_goal, tuple) and prev_goal in reachable:
        best_cell = prev_goal
    else:
        best_cell = min(reachable, key=lambda f: (dist[f], f[1], f[0]))
    eps = noise.retarget_prob
    mixture: dict[tuple[int, int], float] = {best_cell: 1.0 - eps}
    for f in reachable:
        mixture[f] = mixture.get(f, 0.0) + eps / len(reachable)
    return [(p, cell) for cell, p in mixture.items() if p > 0.0], parent


def _explore_plan(memory: CraftMemory, summary: CraftObservation, parent,
                  cell) -> Plan:
    bb = _Builder(memory, summary)
    bb.walk_via(parent, cell)
    for dname, (dx, dy) in DIRECTIONS.items():
        probe = (cell[0] + dx, cell[1] + dy)
        if probe not in memory.tiles and 0 <= probe[0] < memory.width \
                and 0 <= probe[1] < memory.height:
            bb.move(dname)
            break
    if not bb.steps:
        bb.steps.append("noop")
    return Plan(steps=bb.steps, goal_tag=f"explore {cell[0]},{cell[1]}")


def _exploration_options(memory: CraftMemory, summary: CraftObservation,
                         noise: NoiseParams,
                         prev_goal=None) -> list[tuple[float, Plan]]:
    cells = _exploration_cells(memory, summary, noise, prev_goal)
    if cells is None:
        return [(1.0, Plan(steps=["noop"], goal_tag="explore"))]
    mixture, parent = cells
    return [(p, _explore_plan(memory, summary, parent, cell))
            for p, cell in mixture]


def craft_plan_options(memory: CraftMemory, summary: CraftObservation,
                       noise: Optional[NoiseParams] = None,
                       prev_goal=None,
                       materialize: bool = True) -> list[tuple[float, object]]:
    """Distribution over plans for the current world summary.

    Priority: survival, then hostile engagement, then the next locked chain
    achievement; exploration (the only stochastic branch) covers whatever is
    still undiscovered. With materialize=False, exploration entries come
    back as ("cell", cell, parents) placeholders so a sampler can build just
    the chosen plan.
    """
    noise = noise or NoiseParams()

    def explore_entries(pg) -> list[tuple[float, object]]:
        cells = _exploration_cells(memory, summary, noise, pg)
        if cells is None:
            return [(1.0, Plan(steps=["noop"], goal_tag="explore"))]
        mixture, parent = cells
        return [(p, ("cell", cell, parent)) for p, cell in mixture]

    def finish(options: list[tuple[float, object]]):
        if not materialize:
            return options
        return [(p, _explore_plan(memory, summary, entry[2], entry[1])
                 if isinstance(entry, tuple) else entry)
                for p, entry in options]

    # 1. survival
    if summary.health <= 3 or summary.hunger <= 2:
        b = _Builder(memory, summary)
        water = b.nearest(cl.WATER)
        if water is not None and b.approach(water):
            b.steps.append("eat")
            return [(1.0, Plan(steps=b.steps, goal_tag="restore food"))]
        return finish(explore_entries(prev_goal))

    # 2. hostile engagement
    if summary.zombie is not None and any(
            summary.count(p) > 0 for p in cl.PICKAXES):
        if cl._manhattan(summary.zombie, summary.position) <= 3:
            b = _Builder(memory, summary)
            zx, zy = summary.zombie
            if cl._manhattan(summary.zombie, summary.position) == 1:
                delta = (zx - summary.position[0], zy - summary.position[1])
                for dname, d in DIRECTIONS.items():
                    if d == delta and summary.facing != dname:
                        b.move(dname)
                b.steps.append("attack")
                return [(1.0, Plan(steps=b.steps, goal_tag="defeat zombie"))]
            dist = b.grass_distances()
            spots = [(dist[(zx + dx, zy + dy)], (zx + dx, zy + dy))
                     for dx, dy in DIRECTIONS.values()
                     if (zx + dx, zy + dy) in dist]
            if spots:
                _, spot = min(spots, key=lambda s: (s[0], s[1][1], s[1][0]))
                b._walk_to(spot)
                delta = (zx - b.pos[0], zy - b.pos[1])
                for dname, d in DIRECTIONS.items():
                    if d == delta:
                        b.move(dname)
                        break
                b.steps.append("attack")
                return [(1.0, Plan(steps=b.steps, goal_tag="defeat zombie"))]
            return finish(explore_entries(prev_goal))

    # 3. next locked chain achievement; a planning event may still retarget
    # to a random exploration frontier instead of the best errand, which is
    # what makes excessive replanning churn instead of commit.
    next_ach = next((a for a in cl.ACHIEVEMENT_CHAIN
                     if a not in summary.unlocked), None)
    if next_ach is None:
        return [(1.0, Plan(steps=["noop"], goal_tag="idle"))]
    seen = set()
    target = next_ach
    errand: Optional[Plan] = None
    while target not in seen:
        seen.add(target)
        b = _Builder(memory, summary)
        blocker = _resolve_achievement(b, target)
        if blocker is None and b.steps:
            errand = Plan(steps=b.steps, goal_tag=target)
            break
        if blocker == "explore" or blocker is None:
            return finish(explore_entries(prev_goal))
        target = blocker  # a prerequisite tool must be crafted first
    if errand is None:
        return finish(explore_entries(prev_goal))

    # A committed exploration leg (from an earlier retarget) is honored until
    # its frontier cell is expanded; the errand is "best" otherwise.
    cells = _exploration_cells(memory, summary, NoiseParams(1.0), None)
    best: object = errand
    best_cell = None
    if isinstance(prev_goal, tuple) and cells is not None \
            and any(cell == prev_goal for _, cell in cells[0]):
        best_cell = prev_goal
        best = ("cell", prev_goal, cells[1])
    eps = noise.retarget_prob
    if eps <= 0.0 or cells is None:
        return finish([(1.0, best)])
    options: list[tuple[float, object]] = [(1.0 - eps, best)]
    for p, cell in cells[0]:
        if cell == best_cell:
            options[0] = (options[0][0] + eps * p, best)
        else:
            options.append((eps * p, ("cell", cell, cells[1])))
    return finish(options)


def craft_plan(memory: CraftMemory, summary: CraftObservation,
               noise: Optional[NoiseParams] = None,
               rng: Optional[random.Random] = None,
               prev_goal=None) -> Plan:
    """Priority-rule plan for the current summary; without an rng the most
    probable option is returned deterministically. The exploration cell is
    sampled before its plan is built, so one planning event builds one
    plan."""
    options = craft_plan_options(memory, summary, noise, prev_goal,
                                 materialize=False)
    if rng is None:
        pick = max(options, key=lambda o: o[0])[1]
    else:
        pick = _sample_options(options, rng)
    if isinstance(pick, Plan):
        return pick
    _, cell, parent = pick
    return _explore_plan(memory, summary, parent, cell)


# ---------------------------------------------------------------------------
# Human steering command grammar
# ---------------------------------------------------------------------------

_HUMAN_TILE_NAMES = (cl.TREE, cl.STONE, cl.IRON, cl.DIAMOND, cl.WATER,
                     cl.TABLE, cl.FURNACE)
_COLLECT_TARGETS = {"wood": "collect_wood", "stone": "collect_stone",
                    "iron": "collect_iron", "diamond": "collect_diamond"}


def compile_human_plan(command: str, memory, obs, env_kind: str,
                       target=None) -> Plan:
    """Map a human steering command onto a scripted plan, deterministically.

    Grammar: ``goto <tile|node N|target>``, ``collect <resource>``,
    ``craft <item>``, ``explore``. Raises ValueError when the command cannot
    be compiled against the agent's current memory.
    """
    words = command.strip().lower().split()
    if not words:
        raise ValueError("empty command")
    verb = words[0]
    no_noise = NoiseParams(retarget_prob=0.0)

    if env_kind == "pogs":
        assert isinstance(memory, PogsMemory)
        if verb == "explore":
            plan = _sample_options(
                pogs_plan_options(memory, -1, no_noise), random.Random(0))
            return Plan(plan.steps, goal_tag=command.strip())
        if verb == "goto":
            arg = words[-1]
            if arg == "target":
                node = target
            else:
                try:
                    node = int(arg)
                except ValueError:
                    raise ValueError(f"not a node label: {arg!r}")
            if node is None or not memory.known(node):
                raise ValueError(f"node {node} not yet observed")
            graph = memory.observed_graph()
            dist, parent = _bfs_tree(graph, memory.current)
            if node not in dist or node == memory.current:
                raise ValueError(f"no known path to node {node}")
            steps = [str(n) for n in _path_from(parent, memory.current, node)[1:]]
            return Plan(steps=steps, goal_tag=command.strip())
        raise ValueError(f"unknown command: {command!r}")

    assert isinstance(memory, CraftMemory)
    summary = obs
    if verb == "explore":
        cells = _exploration_cells(memory, summary, no_noise)
        if cells is None:
            raise ValueError("nothing left to explore")
        mixture, parent = cells
        best = max(mixture, key=lambda m: m[0])[1]
        plan = _explore_plan(memory, summary, parent, best)
        return Plan(plan.steps, goal_tag=command.strip())
    if verb == "goto" and len(words) == 2 and words[1] in _HUMAN_TILE_NAMES:
        b = _Builder(memory, summary)
        pos = b.nearest(words[1])
        if pos is None or not b.approach(pos):
            raise ValueError(f"no reachable {words[1]} in memory")
        if not b.steps:
            b.steps.append("noop")
        return Plan(steps=b.steps, goal_tag=command.strip())
    if verb == "collect" and len(words) == 2 and words[1] in _COLLECT_TARGETS:
        b = _Builder(memory, summary)
        blocker = _resolve_achievement(b, _COLLECT_TARGETS[words[1]])
        if blocker is not None or not b.steps:
            raise ValueError(f"cannot compile {command!r}: "
                             f"{blocker or 'nothing to do'}")
        return Plan(steps=b.steps, goal_tag=command.strip())
    if verb == "craft" and len(words) == 2 and words[1] in cl.RECIPES["craft"]:
        b = _Builder(memory, summary)
        blocker = _resolve_achievement(b, f"craft_{words[1]}")
        if blocker is not None or not b.steps:
            raise ValueError(f"cannot compile {command!r}: "
                             f"{blocker or 'nothing to do'}")
        return Plan(steps=b.steps, goal_tag=command.strip())
    raise ValueError(f"unknown command: {command!r}")


# ---------------------------------------------------------------------------
# Plan following and validity
# ---------------------------------------------------------------------------

def _pogs_step_applicable(step_text: str, obs: PogsObservation) -> bool:
    try:
        dest = int(step_text.strip())
    except ValueError:
        return False
    return dest in obs.visible_adjacency.get(obs.current_node, ())


def _craft_step_applicable(step_text: str, obs: CraftObservation) -> bool:
    words = step_text.strip().lower().split()
    if not words:
        return False
    verb, arg = words[0], (words[1] if len(words) > 1 else None)
    if verb == "move":
        return arg in DIRECTIONS
    if verb == "noop":
        return True
    if verb == "collect":
        tile = obs.faced_tile
        rule = cl.RECIPES["collect"].get(tile or "")
        if rule is None:
            return False
        tool = rule["requires_tool"]
        return tool is None or obs.count(tool) >= 1
    if verb == "craft" and arg in cl.RECIPES["craft"]:
        rule = cl.RECIPES["craft"][arg]
        return obs.adjacent_tile(rule["requires_adjacent"]) and \
            all(obs.count(r) >= n for r, n in rule["consumes"].items())
    if verb == "place" and arg in cl.RECIPES["place"]:
        rule = cl.RECIPES["place"][arg]
        return obs.faced_tile == GRASS and \
            all(obs.count(r) >= n for r, n in rule["consumes"].items())
    if verb == "eat":
        return obs.faced_tile == cl.WATER
    if verb == "attack":
        return obs.zombie is not None \
            and cl._manhattan(obs.zombie, obs.position) == 1 \
            and any(obs.count(p) > 0 for p in cl.PICKAXES)
    return False


def step_applicable(step_text: str, obs) -> bool:
    if isinstance(obs, PogsObservation):
        return _pogs_step_applicable(step_text, obs)
    return _craft_step_applicable(step_text, obs)


def follow_plan(plan: PlanState, obs) -> Optional[str]:
    """Next unexecuted plan step as action text, or None when the plan is
    absent, exhausted, or its next step is inapplicable (drift)."""
    if plan is None or plan.is_empty:
        return None
    nxt = plan.next_step()
    if nxt is None:
        return None
    return nxt if step_applicable(nxt, obs) else None


def plan_validity(plan: PlanState, obs, memory=None) -> bool:
    """True iff the plan is non-exhausted and its next step applies now.

    Free-text plans (no structured steps) cannot be checked and count as
    valid while present.
    """
    if plan is None or plan.is_empty:
        return False
    if not plan.plan_steps:
        return True
    return follow_plan(plan, obs) is not None


# ---------------------------------------------------------------------------
# Reactive fallbacks (no memory beyond the current observation)
# ---------------------------------------------------------------------------

def pogs_reactive(obs: PogsObservation, visited: set[int],
                  rng: random.Random) -> str:
    nbrs = sorted(obs.visible_adjacency.get(obs.current_node, ()))
    if not nbrs:
        return "0"
    unvisited = [n for n in nbrs if n not in visited]
    return str(rng.choice(unvisited or nbrs))


def _greedy_step_toward(obs: CraftObservation, goal: tuple[int, int],
                        rng: random.Random) -> str:
    x, y = obs.position
    gx, gy = goal
    prefs = []
    if abs(gx - x) >= abs(gy - y):
        if gx != x:
            prefs.append("east" if gx > x else "west")
        if gy != y:
            prefs.append("south" if gy > y else "north")
    else:
        if gy != y:
            prefs.append("south" if gy > y else "north")
        if gx != x:
            prefs.append("east" if gx > x else "west")
    for d in prefs:
        dx, dy = DIRECTIONS[d]
        if obs.view.get((x + dx, y + dy)) == GRASS:
            return f"move {d}"
    if prefs:
        return f"move {prefs[0]}"  # blocked move still turns toward the goal
    return f"move {rng.choice(sorted(DIRECTIONS))}"


_REACTIVE_INTEREST = {
    "collect_wood": cl.TREE,
    "place_table": cl.TREE,
    "craft_wood_pickaxe": cl.TABLE,
    "collect_stone": cl.STONE,
    "craft_stone_pickaxe": cl.TABLE,
    "collect_iron": cl.IRON,
    "place_furnace": cl.STONE,
    "craft_iron_pickaxe": cl.FURNACE,
    "collect_diamond": cl.DIAMOND,
}


def craft_reactive(obs: CraftObservation, rng: random.Random) -> str:
    """One-step greedy rule over the current view only."""
    if obs.zombie is not None and cl._manhattan(obs.zombie, obs.position) == 1 \
            and any(obs.count(p) > 0 for p in cl.PICKAXES):
        return "attack"
    if obs.health <= 3 or obs.hunger <= 2:
        if obs.faced_tile == cl.WATER:
            return "eat"
        waters = sorted((p for p, t in obs.view.items() if t == cl.WATER),
                        key=lambda p: (p[1], p[0]))
        if waters:
            return _greedy_step_toward(obs, waters[0], rng)

    faced = obs.faced_tile
    rule = cl.RECIPES["collect"].get(faced or "")
    if rule is not None:
        tool = rule["requires_tool"]
        if (tool is None or obs.count(tool) >= 1) \
                and obs.count(rule["yields"]) < 2:
            return "collect"

    next_ach = next((a for a in cl.ACHIEVEMENT_CHAIN
                     if a not in obs.unlocked), None)
    if next_ach is None:
        return "noop"
    if next_ach.startswith("craft_"):
        product = next_ach.removeprefix("craft_")
        if _craft_step_applicable(f"craft {product}", obs):
            return f"craft {product}"
    if next_ach.startswith("place_"):
        product = next_ach.removeprefix("place_")
        if _craft_step_applicable(f"place {product}", obs):
            return f"place {product}"

    interest = _REACTIVE_INTEREST[next_ach]
    spots = sorted((p for p, t in obs.view.items()
                    if t == interest and p != obs.position),
                   key=lambda p: (cl._manhattan(p, obs.position), p[1], p[0]))
    if spots:
        return _greedy_step_toward(obs, spots[0], rng)
    return f"move {rng.choice(sorted(DIRECTIONS))}"
