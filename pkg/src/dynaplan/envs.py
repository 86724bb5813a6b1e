"""Uniform episode-facing adapters over the two environments."""

from __future__ import annotations

import dataclasses
import random
from typing import Optional

from . import craftlite, pogs
from .craftlite import CraftConfig, CraftObservation
from .planners import CraftMemory, PogsMemory
from .pogs import PogsConfig, PogsObservation


class PogsEnv:
    kind = "pogs"

    def __init__(self, config: PogsConfig, seed: int):
        self.config = config
        self.seed = seed
        self.instance = pogs.generate_graph(config, seed)

    def observe(self) -> PogsObservation:
        return pogs.observe(self.instance)

    def step(self, action_text: str):
        return pogs.step(self.instance, action_text)

    @property
    def done(self) -> bool:
        return self.instance.done

    @property
    def status(self) -> str:
        return self.instance.status

    @property
    def target(self) -> int:
        return self.instance.target_node

    def default_action(self, rng: random.Random) -> str:
        nbrs = sorted(self.instance.adjacency[self.instance.current_node])
        return str(rng.choice(nbrs))

    def fresh_memory(self) -> PogsMemory:
        return PogsMemory()

    def survival_pressure(self, obs) -> bool:
        return False

    def score(self) -> float:
        return 1.0 if self.instance.status == "success" else 0.0

    def config_dict(self) -> dict:
        return dataclasses.asdict(self.config)


class CraftEnv:
    kind = "craftlite"

    def __init__(self, config: CraftConfig, seed: int):
        self.config = config
        self.seed = seed
        self.world = craftlite.generate_world(config, seed)

    def observe(self) -> CraftObservation:
        return craftlite.observe(self.world)

    def step(self, action_text: str):
        return craftlite.step(self.world, action_text)

    @property
    def done(self) -> bool:
        return self.world.done

    @property
    def status(self) -> str:
        return self.world.status

    @property
    def target(self) -> Optional[int]:
        return None

    def default_action(self, rng: random.Random) -> str:
        return "noop"

    def fresh_memory(self) -> CraftMemory:
        return CraftMemory(width=self.config.width, height=self.config.height)

    def survival_pressure(self, obs: CraftObservation) -> bool:
        return obs.health <= 3 or obs.hunger <= 2

    def score(self) -> float:
        return craftlite.normalized_score(self.world.unlocked)

    def config_dict(self) -> dict:
        return dataclasses.asdict(self.config)


def make_env(kind: str, config: dict, seed: int):
    if kind == "pogs":
        return PogsEnv(PogsConfig(**config), seed)
    if kind == "craftlite":
        return CraftEnv(CraftConfig(**config), seed)
    raise ValueError(f"unknown environment kind: {kind}")
