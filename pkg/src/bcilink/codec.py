"""Decision-to-command mapping and the three-color execution feedback.

Feedback blocks flash in a 1-5 Hz band deliberately below the 6 Hz stimulus
floor so a feedback flash cannot evoke a competing response next trial.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import InvalidArgumentError
from .fbcca import Decision

FEEDBACK_BLINK_MIN_HZ = 1.0
FEEDBACK_BLINK_MAX_HZ = 5.0
DEFAULT_FEEDBACK_BLINK_HZ = 2.0
DEFAULT_FEEDBACK_DURATION_S = 1.0


class CommandId(str, Enum):
    RECON_AREA = "ReconArea"
    HALT = "Halt"
    RETURN_TO_BASE = "ReturnToBase"
    MOVE_NORTH = "MoveNorth"
    MOVE_SOUTH = "MoveSouth"
    MOVE_EAST = "MoveEast"
    MOVE_WEST = "MoveWest"
    MARK_TARGET = "MarkTarget"

    def __str__(self) -> str:  # stable ASCII name on the wire
        return self.value


DEFAULT_COMMAND_NAMES = tuple(c.value for c in CommandId)


@dataclass(frozen=True)
class Command:
    id: CommandId
    issued_at: int = 0


@dataclass(frozen=True)
class CommandTable:
    """Bijection from stimulus target index to command id."""

    entries: tuple[CommandId, ...]

    def __post_init__(self):
        entries = tuple(CommandId(e) for e in self.entries)
        object.__setattr__(self, "entries", entries)
        if not entries:
            raise InvalidArgumentError("command table cannot be empty")
        if len(set(entries)) != len(entries):
            raise InvalidArgumentError("command table entries must be distinct")

    @property
    def size(self) -> int:
        return len(self.entries)

    def command_for(self, index: int) -> CommandId:
        return self.entries[index]

    def index_of(self, command_id: CommandId) -> int:
        return self.entries.index(command_id)


def default_command_table(count: int = 8) -> CommandTable:
    if not (1 <= count <= len(DEFAULT_COMMAND_NAMES)):
        raise InvalidArgumentError(
            f"default table supports 1..{len(DEFAULT_COMMAND_NAMES)} targets"
        )
    return CommandTable(tuple(CommandId(n) for n in DEFAULT_COMMAND_NAMES[:count]))


class FeedbackStatus(Enum):
    NOT_RECOGNIZED = "NotRecognized"
    RECOGNIZED_NOT_EXECUTED = "RecognizedNotExecuted"
    EXECUTED = "Executed"


class Color(str, Enum):
    RED = "Red"
    YELLOW = "Yellow"
    GREEN = "Green"

    def __str__(self) -> str:
        return self.value


_STATUS_COLOR = {
    FeedbackStatus.NOT_RECOGNIZED: Color.RED,
    FeedbackStatus.RECOGNIZED_NOT_EXECUTED: Color.YELLOW,
    FeedbackStatus.EXECUTED: Color.GREEN,
}


@dataclass(frozen=True)
class FeedbackFrame:
    color: Color
    blink_hz: float
    duration_s: float


def map_decision(decision: Decision, table: CommandTable, issued_at: int = 0) -> Command | None:
    """Table lookup for recognized decisions; None (no actuation) otherwise."""
    if len(decision.scores) != table.size:
        raise InvalidArgumentError(
            f"decision over {len(decision.scores)} targets vs table of {table.size}"
        )
    if not decision.recognized:
        return None
    return Command(table.command_for(decision.predicted_index), issued_at)


def feedback_color(status: FeedbackStatus) -> Color:
    """NotRecognized -> Red, RecognizedNotExecuted -> Yellow, Executed -> Green."""
    return _STATUS_COLOR[status]


def encode_feedback(
    status: FeedbackStatus,
    blink_hz: float = DEFAULT_FEEDBACK_BLINK_HZ,
    duration_s: float = DEFAULT_FEEDBACK_DURATION_S,
) -> FeedbackFrame:
    """Status as a flashing block; the blink rate must avoid the stimulus band."""
    if not (FEEDBACK_BLINK_MIN_HZ <= blink_hz <= FEEDBACK_BLINK_MAX_HZ):
        raise InvalidArgumentError(
            f"feedback blink {blink_hz} Hz outside "
            f"[{FEEDBACK_BLINK_MIN_HZ}, {FEEDBACK_BLINK_MAX_HZ}] "
            "(would collide with the stimulus band)"
        )
    if duration_s <= 0:
        raise InvalidArgumentError("duration_s must be positive")
    return FeedbackFrame(feedback_color(status), blink_hz, duration_s)
