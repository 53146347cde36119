"""Simulated reconnaissance agent on an occupancy grid.

The agent executes one command at a time: single-cell moves, a full
area-reconnaissance sweep (serpentine coverage walk with shortest-path
detours), return-to-base, halting, and marking sighted targets. Sensing
reveals the ground truth within a Chebyshev radius; target sightings
additionally require an unobstructed integer line of sight. Everything is
deterministic: same world + command sequence gives the same event stream.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from pathlib import Path

import numpy as np

from .codec import Command, CommandId, FeedbackStatus
from .errors import InvalidArgumentError

DEFAULT_SENSOR_RADIUS = 2
DEFAULT_BATTERY_CAPACITY = 1000.0
MOVE_COST = 1.0
IDLE_COST = 0.2


class Cell(IntEnum):
    FREE = 0
    OBSTACLE = 1
    UNKNOWN = 2


class Heading(str, Enum):
    NORTH = "N"
    EAST = "E"
    SOUTH = "S"
    WEST = "W"


class Mode(str, Enum):
    IDLE = "Idle"
    RECON = "Recon"
    MOVING = "Moving"
    RETURNING = "Returning"
    FAILED = "Failed"


@dataclass
class GridMap:
    width: int
    height: int
    cells: np.ndarray  # (height, width) of Cell values
    cell_size_m: float = 1.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidArgumentError("grid dimensions must be >= 1")
        self.cells = np.asarray(self.cells, dtype=np.uint8)
        if self.cells.shape != (self.height, self.width):
            raise InvalidArgumentError("cells shape must be (height, width)")

    @classmethod
    def unknown(cls, width: int, height: int) -> "GridMap":
        return cls(width, height, np.full((height, width), Cell.UNKNOWN, dtype=np.uint8))

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def at(self, x: int, y: int) -> Cell:
        return Cell(self.cells[y, x])


@dataclass(frozen=True)
class WorldTarget:
    target_id: int
    kind: str  # Infantry | Vehicle
    cell: tuple[int, int]


@dataclass
class World:
    """Ground truth: occupancy, targets, and the agent's base cell."""

    grid: GridMap
    targets: tuple[WorldTarget, ...]
    base: tuple[int, int]

    def __post_init__(self):
        bx, by = self.base
        if not self.grid.in_bounds(bx, by) or self.grid.at(bx, by) != Cell.FREE:
            raise InvalidArgumentError("base must be an in-bounds free cell")
        for t in self.targets:
            x, y = t.cell
            if not self.grid.in_bounds(x, y) or self.grid.at(x, y) != Cell.FREE:
                raise InvalidArgumentError(f"target {t.target_id} not on a free cell")


def parse_world(text: str) -> World:
    """Plain-text grid: '#' obstacle, '.' free, 'S' start, 'T'/'V' targets."""
    rows = [line for line in text.splitlines() if line and not line.startswith("//")]
    if not rows:
        raise InvalidArgumentError("world file is empty")
    width = max(len(r) for r in rows)
    height = len(rows)
    cells = np.full((height, width), Cell.OBSTACLE, dtype=np.uint8)
    base = None
    targets: list[WorldTarget] = []
    for y, row in enumerate(rows):
        for x, ch in enumerate(row):
            if ch == "#":
                cells[y, x] = Cell.OBSTACLE
            elif ch in ".STV":
                cells[y, x] = Cell.FREE
                if ch == "S":
                    if base is not None:
                        raise InvalidArgumentError("world has more than one start cell")
                    base = (x, y)
                elif ch == "T":
                    targets.append(WorldTarget(len(targets), "Infantry", (x, y)))
                elif ch == "V":
                    targets.append(WorldTarget(len(targets), "Vehicle", (x, y)))
            else:
                raise InvalidArgumentError(f"unknown world glyph {ch!r} at ({x},{y})")
    if base is None:
        raise InvalidArgumentError("world has no start cell 'S'")
    return World(GridMap(width, height, cells), tuple(targets), base)


def load_world(path: str | Path) -> World:
    return parse_world(Path(path).read_text())


@dataclass(frozen=True)
class TargetSighting:
    target_id: int
    kind: str
    cell: tuple[int, int]
    tick: int


@dataclass(frozen=True)
class AgentEvent:
    kind: str
    tick: int
    data: dict

    def compact(self) -> str:
        """key=value text, the AgentEvent wire payload."""
        parts = [f"kind={self.kind}", f"tick={self.tick}"]
        parts += [f"{k}={v}" for k, v in sorted(self.data.items())]
        return " ".join(parts)


_STEP = {
    CommandId.MOVE_NORTH: (0, -1, Heading.NORTH),
    CommandId.MOVE_SOUTH: (0, 1, Heading.SOUTH),
    CommandId.MOVE_EAST: (1, 0, Heading.EAST),
    CommandId.MOVE_WEST: (-1, 0, Heading.WEST),
}

_NEIGHBORS = ((0, -1), (1, 0), (0, 1), (-1, 0))  # N, E, S, W


def _bfs_paths(grid: GridMap, start: tuple[int, int]) -> dict[tuple[int, int], tuple[int, int]]:
    """Parent map over the free component of start (deterministic order)."""
    parents = {start: start}
    queue = deque([start])
    while queue:
        x, y = queue.popleft()
        for dx, dy in _NEIGHBORS:
            nx, ny = x + dx, y + dy
            if (nx, ny) in parents:
                continue
            if grid.in_bounds(nx, ny) and grid.at(nx, ny) == Cell.FREE:
                parents[(nx, ny)] = (x, y)
                queue.append((nx, ny))
    return parents


def _shortest_path(
    grid: GridMap, start: tuple[int, int], goal: tuple[int, int]
) -> list[tuple[int, int]] | None:
    """Uniform-cost (BFS) path from start to goal, start excluded."""
    if start == goal:
        return []
    parents = {start: start}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        if cur == goal:
            break
        x, y = cur
        for dx, dy in _NEIGHBORS:
            nxt = (x + dx, y + dy)
            if nxt in parents:
                continue
            if grid.in_bounds(*nxt) and grid.at(*nxt) == Cell.FREE:
                parents[nxt] = cur
                queue.append(nxt)
    if goal not in parents:
        return None
    path = [goal]
    while path[-1] != start:
        path.append(parents[path[-1]])
    path.reverse()
    return path[1:]


def plan_coverage(grid: GridMap, start: tuple[int, int]) -> list[tuple[int, int]]:
    """Serpentine sweep of the free component containing start.

    Consecutive waypoints are adjacent cells; rows blocked mid-sweep are
    reached by shortest-path detours, so cells may repeat. Every reachable
    free cell appears in the walk (it is within sensor radius of itself).
    """
    if not grid.in_bounds(*start) or grid.at(*start) != Cell.FREE:
        raise InvalidArgumentError(f"start {start} is not a free cell")
    component = set(_bfs_paths(grid, start))
    order: list[tuple[int, int]] = []
    for y in range(grid.height):
        xs = [x for x in range(grid.width) if (x, y) in component]
        if (y % 2) == 1:
            xs.reverse()
        order.extend((x, y) for x in xs)

    walk = [start]
    current = start
    for target in order:
        if target == current:
            continue
        dx, dy = target[0] - current[0], target[1] - current[1]
        if abs(dx) + abs(dy) == 1:
            walk.append(target)
        else:
            detour = _shortest_path(grid, current, target)
            if detour is None:  # unreachable cells were excluded already
                continue
            walk.extend(detour)
        current = target
    return walk


def chebyshev(a: tuple[int, int], b: tuple[int, int]) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def line_of_sight(grid: GridMap, a: tuple[int, int], b: tuple[int, int]) -> bool:
    """Bresenham line between cell centers; intermediate obstacles block."""
    x0, y0 = a
    x1, y1 = b
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        if (x, y) != a and (x, y) != b and grid.at(x, y) == Cell.OBSTACLE:
            return False
        if (x, y) == b:
            return True
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


@dataclass
class AgentState:
    position: tuple[int, int]
    heading: Heading
    battery_pct: float
    mode: Mode
    known_map: GridMap
    sightings: list[TargetSighting] = field(default_factory=list)
    marked_targets: set[int] = field(default_factory=set)


class AgentSim:
    """Single-owner deterministic state machine advanced by the session clock."""

    def __init__(
        self,
        world: World,
        sensor_radius: int = DEFAULT_SENSOR_RADIUS,
        battery_capacity: float = DEFAULT_BATTERY_CAPACITY,
    ):
        if sensor_radius < 0:
            raise InvalidArgumentError("sensor_radius must be >= 0")
        if battery_capacity <= 0:
            raise InvalidArgumentError("battery_capacity must be positive")
        self.world = world
        self.sensor_radius = sensor_radius
        self.battery_capacity = battery_capacity
        self._battery = battery_capacity
        self.state = AgentState(
            position=world.base,
            heading=Heading.NORTH,
            battery_pct=100.0,
            mode=Mode.IDLE,
            known_map=GridMap.unknown(world.grid.width, world.grid.height),
        )
        self._plan: deque[tuple[int, int]] = deque()
        self.tick_count = 0
        self._sense(0, [])  # the agent knows its immediate surroundings

    # -- sensing ---------------------------------------------------------

    def _sense(self, tick: int, events: list[AgentEvent]) -> None:
        x0, y0 = self.state.position
        r = self.sensor_radius
        revealed = 0
        for y in range(max(0, y0 - r), min(self.world.grid.height, y0 + r + 1)):
            for x in range(max(0, x0 - r), min(self.world.grid.width, x0 + r + 1)):
                if self.state.known_map.cells[y, x] == Cell.UNKNOWN:
                    self.state.known_map.cells[y, x] = self.world.grid.cells[y, x]
                    revealed += 1
        if revealed:
            events.append(AgentEvent("mapped", tick, {
                "cells": revealed, "x": x0, "y": y0,
            }))
        for s in sense_targets(self.state, self.world, self.sensor_radius, tick):
            self.state.sightings.append(s)
            events.append(AgentEvent("sighted", tick, {
                "target": s.target_id, "kind": s.kind,
                "x": s.cell[0], "y": s.cell[1],
            }))

    # -- stepping --------------------------------------------------------

    def _try_move(self, nxt: tuple[int, int], heading: Heading,
                  tick: int, events: list[AgentEvent]) -> bool:
        x, y = nxt
        self.state.heading = heading
        if not self.world.grid.in_bounds(x, y) or self.world.grid.at(x, y) != Cell.FREE:
            events.append(AgentEvent("blocked", tick, {"x": x, "y": y}))
            return False
        self.state.position = nxt
        self._battery = max(0.0, self._battery - MOVE_COST)
        events.append(AgentEvent("moved", tick, {"x": x, "y": y}))
        return True

    def _heading_towards(self, nxt: tuple[int, int]) -> Heading:
        dx = nxt[0] - self.state.position[0]
        dy = nxt[1] - self.state.position[1]
        for cmd, (sx, sy, h) in _STEP.items():
            if (dx, dy) == (sx, sy):
                return h
        return self.state.heading

    def step(self, command: Command | None, tick: int | None = None) -> list[AgentEvent]:
        """One simulation tick: at most one command consumed, one cell moved."""
        if tick is None:
            tick = self.tick_count
        self.tick_count = tick + 1
        events: list[AgentEvent] = []
        moved = False

        if self._battery <= 0.0 and self.state.mode != Mode.FAILED:
            self.state.mode = Mode.FAILED
            self._plan.clear()
            events.append(AgentEvent("failed", tick, {"reason": "battery"}))

        if command is not None:
            if self.state.mode == Mode.FAILED:
                events.append(AgentEvent("rejected", tick, {
                    "command": command.id.value, "reason": "agent failed",
                }))
            else:
                moved = self._consume(command, tick, events)
        elif self._plan and self.state.mode in (Mode.RECON, Mode.RETURNING):
            nxt = self._plan.popleft()
            moved = self._try_move(nxt, self._heading_towards(nxt), tick, events)
            if not moved:
                # ground truth never changes mid-run; treat as mission failure
                self.state.mode = Mode.FAILED
                events.append(AgentEvent("failed", tick, {"reason": "path blocked"}))
            elif not self._plan:
                if self.state.mode == Mode.RECON:
                    events.append(AgentEvent("mission_complete", tick, {}))
                else:
                    events.append(AgentEvent("returned", tick, {}))
                self.state.mode = Mode.IDLE

        if not moved and self.state.mode != Mode.FAILED:
            self._battery = max(0.0, self._battery - IDLE_COST)
            if self.state.position == self.world.base and self.state.mode == Mode.IDLE:
                if self.battery_capacity - self._battery > MOVE_COST:
                    events.append(AgentEvent("recharged", tick, {}))
                self._battery = self.battery_capacity

        if self._battery <= 0.0 and self.state.mode != Mode.FAILED:
            self.state.mode = Mode.FAILED
            self._plan.clear()
            events.append(AgentEvent("failed", tick, {"reason": "battery"}))

        self._sense(tick, events)
        self.state.battery_pct = 100.0 * self._battery / self.battery_capacity
        return events

    def _consume(self, command: Command, tick: int, events: list[AgentEvent]) -> bool:
        cid = command.id
        if cid == CommandId.HALT:
            self._plan.clear()
            self.state.mode = Mode.IDLE
            events.append(AgentEvent("halted", tick, {}))
            return False
        if cid in _STEP:
            dx, dy, heading = _STEP[cid]
            self._plan.clear()
            self.state.mode = Mode.MOVING
            x, y = self.state.position
            ok = self._try_move((x + dx, y + dy), heading, tick, events)
            self.state.mode = Mode.IDLE
            return ok
        if cid == CommandId.RECON_AREA:
            walk = plan_coverage(self.world.grid, self.state.position)
            self._plan = deque(walk[1:])  # current cell already occupied
            self.state.mode = Mode.RECON
            events.append(AgentEvent("recon_started", tick, {"waypoints": len(walk)}))
            if not self._plan:
                events.append(AgentEvent("mission_complete", tick, {}))
                self.state.mode = Mode.IDLE
            return False
        if cid == CommandId.RETURN_TO_BASE:
            path = _shortest_path(self.world.grid, self.state.position, self.world.base)
            if path is None:
                events.append(AgentEvent("blocked", tick, {"reason": "base unreachable"}))
                return False
            self._plan = deque(path)
            self.state.mode = Mode.RETURNING
            events.append(AgentEvent("return_started", tick, {"steps": len(path)}))
            if not self._plan:
                events.append(AgentEvent("returned", tick, {}))
                self.state.mode = Mode.IDLE
            return False
        if cid == CommandId.MARK_TARGET:
            for s in reversed(self.state.sightings):
                if s.target_id not in self.state.marked_targets:
                    self.state.marked_targets.add(s.target_id)
                    events.append(AgentEvent("marked", tick, {"target": s.target_id}))
                    return False
            events.append(AgentEvent("mark_failed", tick, {"reason": "no unmarked sighting"}))
            return False
        raise InvalidArgumentError(f"unhandled command {cid}")

    @property
    def busy(self) -> bool:
        return bool(self._plan) and self.state.mode in (Mode.RECON, Mode.RETURNING)


def sense_targets(
    state: AgentState, world: World, sensor_radius: int, tick: int
) -> list[TargetSighting]:
    """Unsighted targets within Chebyshev radius and clear line of sight."""
    seen = {s.target_id for s in state.sightings}
    found = []
    for t in world.targets:
        if t.target_id in seen:
            continue
        if chebyshev(state.position, t.cell) > sensor_radius:
            continue
        if not line_of_sight(world.grid, state.position, t.cell):
            continue
        found.append(TargetSighting(t.target_id, t.kind, t.cell, tick))
    return found


_SUCCESS_EVENT = {
    CommandId.HALT: "halted",
    CommandId.MOVE_NORTH: "moved",
    CommandId.MOVE_SOUTH: "moved",
    CommandId.MOVE_EAST: "moved",
    CommandId.MOVE_WEST: "moved",
    CommandId.RECON_AREA: "mission_complete",
    CommandId.RETURN_TO_BASE: "returned",
    CommandId.MARK_TARGET: "marked",
}


def execution_status(command: Command, events: list[AgentEvent]) -> FeedbackStatus:
    """Executed iff the command's success event occurred; never NotRecognized.

    Recognition happened upstream by definition here; failures (blocked,
    rejected, battery, timeout) map to the recognized-but-not-executed branch.
    """
    want = _SUCCESS_EVENT[command.id]
    for ev in events:
        if ev.kind == want:
            return FeedbackStatus.EXECUTED
    return FeedbackStatus.RECOGNIZED_NOT_EXECUTED


def run_command(
    sim: AgentSim, command: Command, max_ticks: int = 5000
) -> tuple[FeedbackStatus, list[AgentEvent], int]:
    """Issue a command and tick the agent until it resolves (or times out)."""
    events = sim.step(command)
    ticks = 1
    terminal = {"moved", "blocked", "rejected", "halted", "marked", "mark_failed",
                "mission_complete", "returned", "failed"}
    def resolved(evs: list[AgentEvent]) -> bool:
        return any(e.kind in terminal for e in evs)

    if command.id in (CommandId.RECON_AREA, CommandId.RETURN_TO_BASE):
        # multi-tick missions: run until completion/failure
        while sim.busy and ticks < max_ticks:
            events.extend(sim.step(None))
            ticks += 1
    elif not resolved(events):
        while ticks < max_ticks and not resolved(events):
            events.extend(sim.step(None))
            ticks += 1
    return execution_status(command, events), events, ticks
