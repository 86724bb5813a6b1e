"""CraftLite: a compact seeded resource-chain gridworld.

A desk-scale stand-in for Minecraft-like survival benchmarks: the agent
gathers wood, builds crafting stations, upgrades pickaxes along a fixed
achievement chain, and finally mines a diamond hidden behind stone, while a
hunger clock and a single zombie interrupt long-running goals. Mechanics are
deliberately small enough for a scripted oracle to verify.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from .errors import GenerationError, UsageError

GRASS = "grass"
TREE = "tree"
STONE = "stone"
IRON = "iron"
DIAMOND = "diamond"
WATER = "water"
TABLE = "table"
FURNACE = "furnace"

RESOURCE_TILES = (TREE, STONE, IRON, DIAMOND, WATER)
WALKABLE = frozenset({GRASS})

DIRECTIONS = {"north": (0, -1), "south": (0, 1), "east": (1, 0), "west": (-1, 0)}

ACHIEVEMENT_CHAIN = (
    "collect_wood",
    "place_table",
    "craft_wood_pickaxe",
    "collect_stone",
    "craft_stone_pickaxe",
    "collect_iron",
    "place_furnace",
    "craft_iron_pickaxe",
    "collect_diamond",
)
OFF_CHAIN_ACHIEVEMENTS = ("eat_food", "defeat_zombie")
ALL_ACHIEVEMENTS = ACHIEVEMENT_CHAIN + OFF_CHAIN_ACHIEVEMENTS

PICKAXES = ("wood_pickaxe", "stone_pickaxe", "iron_pickaxe")

MAX_HEALTH = 9
MAX_HUNGER = 9


def load_recipes() -> dict:
    """Recipe table shipped as package data; read once at import."""
    with resources.files("dynaplan.data").joinpath("recipes.json").open() as fh:
        return json.load(fh)


RECIPES = load_recipes()


@dataclass
class CraftConfig:
    width: int = 14
    height: int = 14
    max_steps: int = 400
    view_radius: int = 2
    n_trees: int = 5
    n_stones: int = 6
    n_iron: int = 2
    n_water: int = 2
    hunger_interval: int = 25
    regen_interval: int = 10
    zombie_enabled: bool = True
    zombie_spawn_step: int = 80
    zombie_chase_prob: float = 0.7
    zombie_damage_interval: int = 2

    def validate(self) -> None:
        if self.width < 8 or self.height < 8:
            raise ValueError("world must be at least 8x8")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass
class World:
    config: CraftConfig
    tiles: dict[tuple[int, int], str]
    agent_pos: tuple[int, int]
    facing: str = "south"
    inventory: dict[str, int] = field(default_factory=dict)
    health: int = MAX_HEALTH
    hunger: int = MAX_HUNGER
    unlocked: set[str] = field(default_factory=set)
    zombie: Optional[tuple[int, int]] = None
    zombie_defeated: bool = False
    step_count: int = 0
    done: bool = False
    status: str = "running"  # running | success | timeout | death
    rng: random.Random = field(default_factory=random.Random)

    def tile(self, pos: tuple[int, int]) -> Optional[str]:
        return self.tiles.get(pos)

    def in_bounds(self, pos: tuple[int, int]) -> bool:
        return 0 <= pos[0] < self.config.width and 0 <= pos[1] < self.config.height

    def faced_pos(self) -> tuple[int, int]:
        dx, dy = DIRECTIONS[self.facing]
        return (self.agent_pos[0] + dx, self.agent_pos[1] + dy)

    def adjacent_positions(self) -> list[tuple[int, int]]:
        x, y = self.agent_pos
        return [(x + dx, y + dy) for dx, dy in DIRECTIONS.values()]

    def has_adjacent(self, tile_name: str) -> bool:
        return any(self.tiles.get(p) == tile_name for p in self.adjacent_positions())

    def count(self, item: str) -> int:
        return self.inventory.get(item, 0)

    def has_any_pickaxe(self) -> bool:
        return any(self.count(p) > 0 for p in PICKAXES)

    def fingerprint(self) -> str:
        """Canonical serialization used by determinism checks."""
        tiles = sorted((f"{x},{y}", t) for (x, y), t in self.tiles.items()
                       if t != GRASS)
        return json.dumps({
            "tiles": tiles,
            "agent": self.agent_pos,
            "facing": self.facing,
            "inventory": sorted(self.inventory.items()),
            "health": self.health,
            "hunger": self.hunger,
            "unlocked": sorted(self.unlocked),
            "zombie": self.zombie,
            "step": self.step_count,
        }, sort_keys=True)


@dataclass
class CraftObservation:
    view: dict[tuple[int, int], str]
    position: tuple[int, int]
    facing: str
    inventory: dict[str, int]
    health: int
    hunger: int
    unlocked: frozenset[str]
    zombie: Optional[tuple[int, int]]
    text_render: str

    @property
    def faced_pos(self) -> tuple[int, int]:
        dx, dy = DIRECTIONS[self.facing]
        return (self.position[0] + dx, self.position[1] + dy)

    @property
    def faced_tile(self) -> Optional[str]:
        return self.view.get(self.faced_pos)

    def adjacent_tile(self, tile_name: str) -> bool:
        x, y = self.position
        return any(self.view.get((x + dx, y + dy)) == tile_name
                   for dx, dy in DIRECTIONS.values())

    def count(self, item: str) -> int:
        return self.inventory.get(item, 0)


def _offset_phrase(dx: int, dy: int) -> str:
    parts = []
    if dx:
        parts.append(f"{abs(dx)} {'east' if dx > 0 else 'west'}")
    if dy:
        parts.append(f"{abs(dy)} {'south' if dy > 0 else 'north'}")
    return " ".join(parts)


def observe(world: World) -> CraftObservation:
    """Egocentric square view plus status lines, rendered deterministically."""
    r = world.config.view_radius
    ax, ay = world.agent_pos
    view: dict[tuple[int, int], str] = {}
    see_lines = []
    zombie_in_view = None
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            pos = (ax + dx, ay + dy)
            if not world.in_bounds(pos):
                continue
            tile = world.tiles[pos]
            view[pos] = tile
            if (dx, dy) == (0, 0):
                continue
            if tile != GRASS:
                see_lines.append(f"{tile} {_offset_phrase(dx, dy)}")
            if world.zombie == pos:
                zombie_in_view = pos
                see_lines.append(f"zombie {_offset_phrase(dx, dy)}")

    if world.inventory:
        inv = ", ".join(f"{k} {v}" for k, v in sorted(world.inventory.items()) if v > 0)
        inv = inv or "empty"
    else:
        inv = "empty"
    unlocked = ", ".join(a for a in ALL_ACHIEVEMENTS if a in world.unlocked) or "none"
    lines = ["You see:"] + (see_lines or ["nothing notable"])
    lines.append(f"Facing: {world.facing}")
    lines.append(f"Inventory: {inv}")
    lines.append(f"Health: {world.health}, Hunger: {world.hunger}")
    lines.append(f"Unlocked: {unlocked}")
    return CraftObservation(
        view=view,
        position=world.agent_pos,
        facing=world.facing,
        inventory=dict(world.inventory),
        health=world.health,
        hunger=world.hunger,
        unlocked=frozenset(world.unlocked),
        zombie=zombie_in_view,
        text_render="\n".join(lines),
    )


def _reachable_grass(tiles: dict, start: tuple[int, int],
                     width: int, height: int) -> set[tuple[int, int]]:
    from collections import deque
    if tiles.get(start) != GRASS:
        return set()
    seen = {start}
    queue = deque([start])
    while queue:
        x, y = queue.popleft()
        for dx, dy in DIRECTIONS.values():
            nxt = (x + dx, y + dy)
            if nxt not in seen and 0 <= nxt[0] < width and 0 <= nxt[1] < height \
                    and tiles.get(nxt) == GRASS:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def _placement_ok(tiles: dict, agent: tuple[int, int], width: int, height: int) -> bool:
    reach = _reachable_grass(tiles, agent, width, height)
    if not reach:
        return False

    def approachable(pos):
        x, y = pos
        return any((x + dx, y + dy) in reach for dx, dy in DIRECTIONS.values())

    by_type: dict[str, list] = {}
    for pos, tile in tiles.items():
        by_type.setdefault(tile, []).append(pos)
    for needed in (TREE, STONE, IRON, WATER):
        if not any(approachable(p) for p in by_type.get(needed, [])):
            return False
    # The diamond must be minable: one of its stone neighbors approachable.
    for dpos in by_type.get(DIAMOND, []):
        x, y = dpos
        for dx, dy in DIRECTIONS.values():
            npos = (x + dx, y + dy)
            if tiles.get(npos) == STONE and approachable(npos):
                return True
    return False


def generate_world(config: CraftConfig, seed: int, max_attempts: int = 500) -> World:
    """Seeded placement with every resource reachable and the diamond caved.

    The diamond's in-bounds neighbors are filled with stone, so reaching it
    always requires mining at least one stone tile.
    """
    config.validate()
    rng = random.Random(f"craft:{seed}")
    w, h = config.width, config.height
    for _ in range(max_attempts):
        tiles = {(x, y): GRASS for x in range(w) for y in range(h)}
        cells = list(tiles.keys())
        rng.shuffle(cells)
        it = iter(cells)

        def take_free():
            for pos in it:
                if tiles[pos] == GRASS:
                    return pos
            raise GenerationError("world too small for requested resources")

        dx_, dy_ = rng.randrange(1, w - 1), rng.randrange(1, h - 1)
        tiles[(dx_, dy_)] = DIAMOND
        for ddx, ddy in DIRECTIONS.values():
            npos = (dx_ + ddx, dy_ + ddy)
            if 0 <= npos[0] < w and 0 <= npos[1] < h:
                tiles[npos] = STONE

        try:
            for _ in range(config.n_trees):
                tiles[take_free()] = TREE
            for _ in range(config.n_stones):
                tiles[take_free()] = STONE
            for _ in range(config.n_iron):
                tiles[take_free()] = IRON
            for _ in range(config.n_water):
                tiles[take_free()] = WATER
            agent = take_free()
        except GenerationError:
            continue

        if _placement_ok(tiles, agent, w, h):
            world_rng = random.Random(f"craft-dyn:{seed}")
            return World(config=config, tiles=tiles, agent_pos=agent, rng=world_rng)
    raise GenerationError("could not place resources after max_attempts")


def _unlock(world: World, achievement: str) -> float:
    if achievement not in world.unlocked:
        world.unlocked.add(achievement)
        return 1.0
    return 0.0


def _resolve_action(world: World, action_text: str, info: dict) -> float:
    """Apply one parsed action; returns achievement reward."""
    words = action_text.strip().lower().split()
    if not words:
        info["invalid"] = True
        return 0.0
    verb, arg = words[0], (words[1] if len(words) > 1 else None)

    if verb == "noop" and arg is None:
        return 0.0

    if verb == "move" and arg in DIRECTIONS:
        world.facing = arg
        dest = world.faced_pos()
        if world.in_bounds(dest) and world.tiles[dest] in WALKABLE \
                and dest != world.zombie:
            world.agent_pos = dest
        return 0.0

    if verb == "collect" and arg is None:
        pos = world.faced_pos()
        tile = world.tiles.get(pos)
        rule = RECIPES["collect"].get(tile or "")
        if rule is None:
            info["invalid"] = True
            return 0.0
        tool = rule["requires_tool"]
        if tool is not None and world.count(tool) < 1:
            info["invalid"] = True
            return 0.0
        world.inventory[rule["yields"]] = world.count(rule["yields"]) + 1
        if rule["consumes_tile"]:
            world.tiles[pos] = GRASS
        return _unlock(world, rule["achievement"])

    if verb == "craft" and arg in RECIPES["craft"]:
        rule = RECIPES["craft"][arg]
        if not world.has_adjacent(rule["requires_adjacent"]):
            info["invalid"] = True
            return 0.0
        if any(world.count(res) < n for res, n in rule["consumes"].items()):
            info["invalid"] = True
            return 0.0
        for res, n in rule["consumes"].items():
            world.inventory[res] -= n
        world.inventory[arg] = world.count(arg) + 1
        return _unlock(world, rule["achievement"])

    if verb == "place" and arg in RECIPES["place"]:
        rule = RECIPES["place"][arg]
        pos = world.faced_pos()
        if not (world.in_bounds(pos) and world.tiles[pos] == GRASS
                and pos != world.zombie):
            info["invalid"] = True
            return 0.0
        if any(world.count(res) < n for res, n in rule["consumes"].items()):
            info["invalid"] = True
            return 0.0
        for res, n in rule["consumes"].items():
            world.inventory[res] -= n
        world.tiles[pos] = arg
        return _unlock(world, rule["achievement"])

    if verb == "eat" and arg is None:
        if world.tiles.get(world.faced_pos()) == WATER:
            world.hunger = MAX_HUNGER
            return _unlock(world, "eat_food")
        info["invalid"] = True
        return 0.0

    if verb == "attack" and arg is None:
        if world.zombie is not None and world.has_any_pickaxe() \
                and _manhattan(world.zombie, world.agent_pos) == 1:
            world.zombie = None
            world.zombie_defeated = True
            return _unlock(world, "defeat_zombie")
        info["invalid"] = True
        return 0.0

    info["invalid"] = True
    return 0.0


def _manhattan(a: tuple[int, int], b: tuple[int, int]) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def _zombie_turn(world: World) -> None:
    cfg = world.config
    if not cfg.zombie_enabled or world.zombie_defeated:
        return
    if world.zombie is None:
        if world.step_count == cfg.zombie_spawn_step:
            candidates = [p for p, t in sorted(world.tiles.items())
                          if t == GRASS and p != world.agent_pos
                          and _manhattan(p, world.agent_pos) >= 6]
            if candidates:
                world.zombie = world.rng.choice(candidates)
        return

    zx, zy = world.zombie
    ax, ay = world.agent_pos
    if world.rng.random() < cfg.zombie_chase_prob:
        # Step along the axis with the larger gap, falling back to the other.
        options = []
        if abs(ax - zx) >= abs(ay - zy):
            options = [(1 if ax > zx else -1, 0), (0, 1 if ay > zy else -1)]
        else:
            options = [(0, 1 if ay > zy else -1), (1 if ax > zx else -1, 0)]
    else:
        options = [world.rng.choice(list(DIRECTIONS.values()))]
    for dx, dy in options:
        if dx == 0 and dy == 0:
            continue
        dest = (zx + dx, zy + dy)
        if world.in_bounds(dest) and world.tiles[dest] in WALKABLE \
                and dest != world.agent_pos:
            world.zombie = dest
            break

    if world.zombie is not None \
            and _manhattan(world.zombie, world.agent_pos) == 1 \
            and world.step_count % cfg.zombie_damage_interval == 0:
        world.health = max(0, world.health - 1)


def step(world: World, action_text: str):
    """Advance the world one tick: resolve the action, then clocks and zombie."""
    if world.done:
        raise UsageError("episode already finished")
    info: dict = {"invalid": False}
    reward = _resolve_action(world, action_text, info)

    world.step_count += 1
    cfg = world.config
    if world.step_count % cfg.hunger_interval == 0:
        world.hunger = max(0, world.hunger - 1)
    if world.hunger == 0:
        world.health = max(0, world.health - 1)
    elif world.hunger >= 6 and world.health < MAX_HEALTH \
            and world.step_count % cfg.regen_interval == 0:
        world.health += 1
    _zombie_turn(world)

    if "collect_diamond" in world.unlocked:
        world.done = True
        world.status = "success"
    elif world.health <= 0:
        world.done = True
        world.status = "death"
    elif world.step_count >= cfg.max_steps:
        world.done = True
        world.status = "timeout"
    info["position"] = world.agent_pos
    info["score"] = normalized_score(world.unlocked)
    info["achievements"] = sum(1 for a in ACHIEVEMENT_CHAIN if a in world.unlocked)
    return observe(world), reward, world.done, info


def normalized_score(unlocked) -> float:
    """Fraction of the 9-achievement chain unlocked."""
    return sum(1 for a in ACHIEVEMENT_CHAIN if a in unlocked) / len(ACHIEVEMENT_CHAIN)


CRAFT_ACTIONS = [
    "move north", "move south", "move east", "move west", "collect",
    "craft wood_pickaxe", "craft stone_pickaxe", "craft iron_pickaxe",
    "place table", "place furnace", "eat", "attack", "noop",
]


def system_prompt(config: CraftConfig) -> str:
    from .llm import load_prompt_body
    return load_prompt_body("craft_system").format(
        actions=", ".join(CRAFT_ACTIONS))
