"""
scheduler.py

In-process mailbox runtime.

Features:
- Holon registry, id allocation and per-holon FIFO mailboxes.
- Deterministic mode: one thread, a seeded choice among holons with mail.
- Concurrent mode: asyncio drives one worker per busy holon; handlers run in a
  thread pool so distinct holons execute in parallel while each holon handles
  one envelope at a time.
- CFP timeouts (concurrent mode only) delivered as INFORM "TIMEOUT".

Handlers never block: they receive an envelope and return the envelopes to send.
"""

import asyncio
import itertools
import logging
import random
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Deque, Dict, Iterable, List, Optional, Protocol, Set, Tuple

from app.runtime.messages import Envelope, Performative, TraceRecorder

logger = logging.getLogger(__name__)


class DeliveryError(Exception):
    """Raised when an envelope names a recipient that is not (or no longer) registered."""


class Handler(Protocol):
    id: str

    def handle(self, env: Envelope) -> List[Envelope]: ...

    def on_delivery_error(self, env: Envelope, error: DeliveryError) -> List[Envelope]: ...


class StepClock:
    """Logical clock: every reading advances by a fixed tick."""

    def __init__(self, tick: float = 0.001) -> None:
        self._tick = tick
        self._now = 0.0
        self._lock = threading.Lock()

    def __call__(self) -> float:
        with self._lock:
            self._now += self._tick
            return self._now


class Runtime:
    def __init__(
        self,
        seed: int = 0,
        deterministic: bool = True,
        cfp_timeout: float = 5.0,
        max_workers: int = 4,
        recorder: Optional[TraceRecorder] = None,
    ) -> None:
        self.deterministic = deterministic
        self.cfp_timeout = cfp_timeout
        self.recorder = recorder or TraceRecorder()
        self.clock: Callable[[], float] = StepClock() if deterministic else time.perf_counter

        self._rng = random.Random(seed)
        self._holons: Dict[str, Handler] = {}
        self._retired: Set[str] = set()
        self._mailboxes: Dict[str, Deque[Envelope]] = {}
        self._ids = itertools.count(1)
        self._seq = itertools.count(1)
        self._lock = threading.Lock()

        # deterministic scheduling
        self._ready: List[str] = []
        self._ready_set: Set[str] = set()

        # concurrent scheduling
        self._max_workers = max_workers
        self._executor: Optional[ThreadPoolExecutor] = None
        self._busy: Set[str] = set()
        self._inflight = 0
        self._idle: Optional[asyncio.Event] = None
        self._timers: Dict[Tuple[str, str, str], asyncio.TimerHandle] = {}

    # Registry --------------------------------

    def next_id(self) -> str:
        with self._lock:
            return str(next(self._ids))

    def register(self, holon: Handler) -> None:
        with self._lock:
            if holon.id in self._holons or holon.id in self._retired:
                raise ValueError(f"holon id {holon.id} already used")
            self._holons[holon.id] = holon
            self._mailboxes[holon.id] = deque()
        logger.debug("[RUNTIME] registered %s", holon.id)

    def retire(self, holon_id: str) -> None:
        with self._lock:
            self._holons.pop(holon_id, None)
            self._mailboxes.pop(holon_id, None)
            self._retired.add(holon_id)
        if holon_id in self._ready_set:
            self._ready_set.discard(holon_id)
            self._ready.remove(holon_id)

    def get(self, holon_id: str) -> Handler:
        try:
            return self._holons[holon_id]
        except KeyError as e:
            raise DeliveryError(f"unknown holon {holon_id}") from e

    def holons(self) -> Dict[str, Handler]:
        with self._lock:
            return dict(self._holons)

    # Sending --------------------------------

    def send(self, env: Envelope) -> None:
        """Enqueue `env` for its recipient exactly once and record the hop."""
        mailbox = self._mailboxes.get(env.to)
        if mailbox is None:
            state = "retired" if env.to in self._retired else "unknown"
            raise DeliveryError(f"{state} recipient {env.to} for {env.verb} from {env.sender}")

        env = env.stamped(next(self._seq))
        mailbox.append(env)
        self.recorder.record(env)
        logger.debug("[RUNTIME] %s -> %s %s %s (%s)", env.sender, env.to, env.performative.value, env.verb, env.conversation_id)

        if self.deterministic:
            if env.to not in self._ready_set:
                self._ready_set.add(env.to)
                self._ready.append(env.to)
        else:
            self._inflight += 1
            if env.performative is Performative.CFP:
                self._arm_timeout(env)
            self._kick(env.to)

    def _post(self, sender: Handler, outbound: Iterable[Envelope]) -> None:
        pending = deque(outbound)
        while pending:
            env = pending.popleft()
            try:
                self.send(env)
            except DeliveryError as e:
                logger.error("[RUNTIME] delivery failed: %s", e)
                pending.extend(sender.on_delivery_error(env, e))

    def _dispatch(self, holon: Handler, env: Envelope) -> List[Envelope]:
        return holon.handle(env)

    # Deterministic mode --------------------------------

    def run_until_idle(self, max_steps: Optional[int] = None) -> int:
        """Process mail until every mailbox is empty; returns the number of envelopes handled."""
        if not self.deterministic:
            raise RuntimeError("run_until_idle is only available in deterministic mode")
        steps = 0
        while self._ready:
            if max_steps is not None and steps >= max_steps:
                break
            index = self._rng.randrange(len(self._ready))
            holon_id = self._ready[index]
            mailbox = self._mailboxes[holon_id]
            env = mailbox.popleft()
            if not mailbox:
                self._ready[index] = self._ready[-1]
                self._ready.pop()
                self._ready_set.discard(holon_id)
            holon = self._holons[holon_id]
            self._post(holon, self._dispatch(holon, env))
            steps += 1
        return steps

    # Concurrent mode --------------------------------

    async def drain(self) -> None:
        """Wait until no envelope is queued or being handled and no timer is armed."""
        if self.deterministic:
            self.run_until_idle()
            return
        if self._executor is None:
            self._executor = ThreadPoolExecutor(max_workers=self._max_workers)
        if self._idle is None:
            self._idle = asyncio.Event()
        for holon_id, mailbox in list(self._mailboxes.items()):
            if mailbox:
                self._kick(holon_id)
        if self._inflight == 0 and not self._timers:
            return
        self._idle.clear()
        await self._idle.wait()

    async def settle(self) -> None:
        await self.drain()

    def shutdown(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None
        self.recorder.close()

    def _kick(self, holon_id: str) -> None:
        if holon_id in self._busy:
            return
        try:
            loop = asyncio.get_running_loop()
        except RuntimeError:
            return  # picked up by the next drain()
        self._busy.add(holon_id)
        loop.create_task(self._work(holon_id))

    async def _work(self, holon_id: str) -> None:
        loop = asyncio.get_running_loop()
        try:
            mailbox = self._mailboxes.get(holon_id)
            while mailbox:
                env = mailbox.popleft()
                holon = self._holons[holon_id]
                if env.performative is Performative.PROPOSE:
                    self._disarm_timeout(env.to, env.sender, env.conversation_id)
                try:
                    outbound = await loop.run_in_executor(self._executor, self._dispatch, holon, env)
                except Exception:
                    logger.exception("[RUNTIME] handler of %s crashed on %s", holon_id, env.verb)
                    outbound = []
                self._post(holon, outbound)
                self._inflight -= 1
                self._check_idle()
        finally:
            self._busy.discard(holon_id)

    def _arm_timeout(self, env: Envelope) -> None:
        try:
            loop = asyncio.get_running_loop()
        except RuntimeError:
            return
        key = (env.sender, env.to, env.conversation_id)
        self._timers[key] = loop.call_later(self.cfp_timeout, self._fire_timeout, key)

    def _disarm_timeout(self, asker: str, child: str, conversation_id: str) -> None:
        if self.deterministic:
            return
        timer = self._timers.pop((asker, child, conversation_id), None)
        if timer is not None:
            timer.cancel()
            self._check_idle()

    def _fire_timeout(self, key: Tuple[str, str, str]) -> None:
        asker, child, conversation_id = key
        if self._timers.pop(key, None) is None:
            return
        logger.warning("[RUNTIME] CFP to %s in %s timed out", child, conversation_id)
        try:
            self.send(Envelope(child, asker, Performative.INFORM, conversation_id, "TIMEOUT", {}))
        except DeliveryError as e:
            logger.error("[RUNTIME] timeout notice lost: %s", e)
        self._check_idle()

    def _check_idle(self) -> None:
        if self._idle is not None and self._inflight == 0 and not self._timers:
            self._idle.set()
