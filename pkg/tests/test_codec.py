import random

import pytest

from bcilink.codec import (
    Color,
    CommandId,
    CommandTable,
    FeedbackStatus,
    default_command_table,
    encode_feedback,
    feedback_color,
    map_decision,
)
from bcilink.errors import InvalidArgumentError
from bcilink.fbcca import Decision


def decision(predicted=0, n=8, recognized=True, margin=0.2):
    scores = [0.1] * n
    scores[predicted] = 0.1 + margin
    return Decision(predicted, tuple(scores), margin, recognized)


class TestFeedbackColor:
    def test_not_recognized_is_red(self):
        assert feedback_color(FeedbackStatus.NOT_RECOGNIZED) is Color.RED

    def test_recognized_not_executed_is_yellow(self):
        assert feedback_color(FeedbackStatus.RECOGNIZED_NOT_EXECUTED) is Color.YELLOW

    def test_executed_is_green(self):
        assert feedback_color(FeedbackStatus.EXECUTED) is Color.GREEN

    def test_total_bijection(self):
        colors = {feedback_color(s) for s in FeedbackStatus}
        assert colors == {Color.RED, Color.YELLOW, Color.GREEN}


class TestCommandTable:
    def test_default_table(self):
        table = default_command_table(8)
        assert table.size == 8
        assert table.command_for(0) is CommandId.RECON_AREA
        assert table.command_for(7) is CommandId.MARK_TARGET

    def test_duplicate_entries_rejected(self):
        with pytest.raises(InvalidArgumentError):
            CommandTable((CommandId.HALT, CommandId.HALT))

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError):
            CommandTable(("Halt", "LaunchEverything"))

    def test_round_trip_preimage(self):
        table = default_command_table(8)
        for idx in range(8):
            assert table.index_of(table.command_for(idx)) == idx


class TestMapDecision:
    def test_recognized_lookup(self):
        table = default_command_table(8)
        cmd = map_decision(decision(predicted=0), table, issued_at=5)
        assert cmd is not None
        assert cmd.id is CommandId.RECON_AREA
        assert cmd.issued_at == 5

    def test_unrecognized_yields_no_command(self):
        table = default_command_table(8)
        assert map_decision(decision(recognized=False), table) is None

    def test_size_mismatch(self):
        table = default_command_table(4)
        with pytest.raises(InvalidArgumentError):
            map_decision(decision(n=8), table)

    def test_never_actuates_unrecognized_fuzz(self):
        # safety property over randomized decisions
        table = default_command_table(8)
        rng = random.Random(1234)
        for _ in range(2000):
            pred = rng.randrange(8)
            rec = rng.random() < 0.5
            cmd = map_decision(decision(predicted=pred, recognized=rec), table)
            if rec:
                assert cmd is not None and table.index_of(cmd.id) == pred
            else:
                assert cmd is None


class TestEncodeFeedback:
    def test_executed_green_frame(self):
        frame = encode_feedback(FeedbackStatus.EXECUTED, 2.0, 1.0)
        assert frame.color is Color.GREEN
        assert frame.blink_hz == 2.0
        assert frame.duration_s == 1.0

    def test_yellow_frame(self):
        frame = encode_feedback(FeedbackStatus.RECOGNIZED_NOT_EXECUTED, 1.0, 0.5)
        assert frame.color is Color.YELLOW

    def test_stimulus_band_collision_rejected(self):
        # 10 Hz would collide with the 6-15 Hz stimulus band
        with pytest.raises(InvalidArgumentError):
            encode_feedback(FeedbackStatus.NOT_RECOGNIZED, 10.0, 1.0)

    def test_below_band_rejected(self):
        with pytest.raises(InvalidArgumentError):
            encode_feedback(FeedbackStatus.EXECUTED, 0.5, 1.0)

    def test_duration_validated(self):
        with pytest.raises(InvalidArgumentError):
            encode_feedback(FeedbackStatus.EXECUTED, 2.0, 0.0)
