import io
import json
from dataclasses import dataclass

import numpy as np
import pytest

from app.algebra.params import ParamSet
from app.runtime.contract_net import CfpRound, Proposal
from app.runtime.messages import Envelope, Performative, TraceRecorder, _jsonable
from app.runtime.scheduler import DeliveryError, Runtime, StepClock


class Relay:
    """Forwards PING to `target` until the hop budget in the payload runs out."""

    def __init__(self, holon_id: str, target: str, log: list) -> None:
        self.id = holon_id
        self.target = target
        self.log = log

    def handle(self, env: Envelope):
        self.log.append((self.id, env.conversation_id, env.payload["left"]))
        if env.payload["left"] == 0:
            return []
        return [Envelope(self.id, self.target, Performative.ASK, env.conversation_id, "PING", {"left": env.payload["left"] - 1})]

    def on_delivery_error(self, env, error):
        self.log.append((self.id, "lost", env.to))
        return []


def ring(runtime: Runtime, log: list) -> None:
    runtime.register(Relay("a", "b", log))
    runtime.register(Relay("b", "a", log))


def ping(runtime: Runtime, cid: str, left: int) -> None:
    runtime.send(Envelope("PRS", "a", Performative.ASK, cid, "PING", {"left": left}))


# Envelopes --------------------------------


def test_envelope_payload_is_read_only():
    env = Envelope("a", "b", Performative.ASK, "q", "PING", {"left": 1})
    with pytest.raises(TypeError):
        env.payload["left"] = 2


def test_envelope_needs_a_conversation():
    with pytest.raises(ValueError):
        Envelope("a", "b", Performative.ASK, "", "PING")


def test_jsonable_payload_values():
    @dataclass(frozen=True)
    class Pair:
        left: int
        right: str

    assert _jsonable(Performative.CFP) == "CFP"
    assert _jsonable({"b": {2, 1}, "a": (1, None)}) == {"a": [1, None], "b": ["1", "2"]}
    assert _jsonable(np.zeros((3, 2))) == "ndarray[3, 2]"
    assert _jsonable(Pair(1, "x")) == {"left": 1, "right": "x"}
    assert _jsonable(ParamSet.of({"C": 1})) == "{C=1}"


def test_recorder_mirrors_json_lines():
    sink = io.StringIO()
    recorder = TraceRecorder(sink)
    recorder.record(Envelope("a", "b", Performative.CFP, "q", "ADD", {"x": 1}, seq=7))
    line = json.loads(sink.getvalue())
    assert line == {
        "conversation": "q",
        "from": "a",
        "payload": {"x": 1},
        "performative": "CFP",
        "seq": 7,
        "to": "b",
        "verb": "ADD",
    }
    assert recorder.trace("q").count(Performative.CFP) == 1
    assert len(recorder.trace("other")) == 0


def test_step_clock_ticks():
    clock = StepClock(tick=0.5)
    assert [clock(), clock(), clock()] == [0.5, 1.0, 1.5]


# Scheduling --------------------------------


def test_run_until_idle_delivers_everything():
    runtime, log = Runtime(seed=1), []
    ring(runtime, log)
    ping(runtime, "q1", 5)
    ping(runtime, "q2", 3)
    assert runtime.run_until_idle() == 6 + 4
    assert runtime.recorder.trace("q1").count(verb="PING") == 6


def test_same_seed_same_interleaving():
    orders = []
    for _ in range(2):
        runtime, log = Runtime(seed=3), []
        ring(runtime, log)
        for k in range(4):
            ping(runtime, f"q{k}", 4)
        runtime.run_until_idle()
        orders.append(log)
    assert orders[0] == orders[1]


def test_max_steps_stops_early():
    runtime, log = Runtime(seed=0), []
    ring(runtime, log)
    ping(runtime, "q", 10)
    assert runtime.run_until_idle(max_steps=3) == 3
    assert runtime.run_until_idle() == 8


def test_unknown_and_retired_recipients():
    runtime, log = Runtime(), []
    ring(runtime, log)
    with pytest.raises(DeliveryError, match="unknown"):
        ping_to(runtime, "zz")
    runtime.retire("b")
    with pytest.raises(ValueError):
        runtime.register(Relay("b", "a", log))
    ping(runtime, "q", 2)
    runtime.run_until_idle()
    assert ("a", "lost", "b") in log


def ping_to(runtime: Runtime, holon: str) -> None:
    runtime.send(Envelope("PRS", holon, Performative.ASK, "q", "PING", {"left": 0}))


def test_run_until_idle_needs_deterministic_mode():
    with pytest.raises(RuntimeError):
        Runtime(deterministic=False).run_until_idle()


@pytest.mark.asyncio
async def test_concurrent_drain_delivers_everything():
    runtime, log = Runtime(deterministic=False, max_workers=2), []
    ring(runtime, log)
    try:
        ping(runtime, "q1", 5)
        ping(runtime, "q2", 5)
        await runtime.settle()
        assert sorted(entry[2] for entry in log if entry[1] == "q1") == [0, 1, 2, 3, 4, 5]
        assert len(runtime.recorder.trace("q2")) == 6
    finally:
        runtime.shutdown()


# Contract net --------------------------------


def test_round_without_stop_rule_asks_everyone():
    cfp = CfpRound(["10", "2", "3"], eligible=lambda p: p.value > 0.5)
    assert cfp.start() == ["2", "3", "10"]
    cfp.on_propose(Proposal("2", 0.6))
    cfp.on_propose(Proposal("10", 0.9))
    assert not cfp.done
    cfp.on_timeout("3")
    assert cfp.done
    assert cfp.winner().holon == "10"
    assert cfp.results() == [("2", 0.6), ("3", 0.0), ("10", 0.9)]


def test_round_with_stop_rule_asks_one_at_a_time():
    cfp = CfpRound(["1", "2", "3"], eligible=lambda p: True, stop_when=lambda p: p.holds)
    assert cfp.start() == ["1"]
    assert cfp.on_propose(Proposal("1", 0.3)) == ["2"]
    assert cfp.on_propose(Proposal("2", 0.1, holds=True)) == []
    assert cfp.done and cfp.stopped_early
    assert cfp.winner().holon == "2"


def test_winner_ties_go_to_the_lowest_id():
    cfp = CfpRound(["2", "1"], eligible=lambda p: True)
    cfp.start()
    cfp.on_propose(Proposal("2", 0.5))
    cfp.on_propose(Proposal("1", 0.5))
    assert cfp.winner().holon == "1"


def test_stray_proposals_are_ignored():
    cfp = CfpRound(["1"], eligible=lambda p: True)
    cfp.start()
    assert cfp.on_propose(Proposal("9", 1.0)) == []
    assert cfp.winner() is None
