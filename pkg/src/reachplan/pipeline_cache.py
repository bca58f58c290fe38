"""Process-wide caches for robot-derived artifacts.

Reachability volumes and sample databases are functions of the robot alone,
not of any particular scenario, and they dominate setup time when a
benchmark reruns the same robot dozens of times. Both caches key on the
robot description hash so a changed robot file can never serve stale data.
"""

from __future__ import annotations

from .robot import RobotModel, build_roms
from .sampledb import build_all_databases

_ROM_CACHE: dict = {}
_DB_CACHE: dict = {}


def get_roms(robot: RobotModel, n_samples: int = 2000, scale: float = 0.85,
             seed: int = 11) -> dict:
    key = (robot.hash(), n_samples, scale, seed)
    if key not in _ROM_CACHE:
        _ROM_CACHE[key] = build_roms(robot, n_samples=n_samples, scale=scale,
                                     seed=seed)
    return _ROM_CACHE[key]


def get_databases(robot: RobotModel, n: int, cell: float, weights, seed: int) -> dict:
    key = (robot.hash(), n, cell, tuple(weights), seed)
    if key not in _DB_CACHE:
        _DB_CACHE[key] = build_all_databases(robot, n=n, cell_size=cell,
                                             weights=weights, seed=seed)
    return _DB_CACHE[key]


def clear_caches():
    _ROM_CACHE.clear()
    _DB_CACHE.clear()
