"""Two-level priority polling of the pair grid.

One logical reader can hold only one transmit power at a time, so pairs
are interrogated strictly one after another.  The poller keeps two
ordered lists: a high-priority list of pairs that jumped recently and a
normal list for everyone else.  Within a round it walks the priority
list first, breadth-first-expanding across grid neighbors of anything
found jumping (a moving body lights up contiguous cells), then drains
the normal list.  A per-round accessed bit guarantees every pair is
interrogated exactly once per round, which also rules out starvation.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .coupling import P_TX_STEP_DB, ExcitationModel, TwinGeometry, critical_window
from .env import QueryOutcome, TwinsGrid, World


class CalibrationError(ValueError):
    """A deployed pair has no usable critical window."""


@dataclass(frozen=True)
class PollRecord:
    """Audit view of one pair's polling state."""

    twin_id: int
    p_tx_dbm: float
    priority: int   # 1 = on the high-priority list
    accessed: int   # 1 = already interrogated this round


@dataclass
class PollLists:
    """Ordered high-priority / normal partition of all pair ids."""

    high: list[int]
    normal: list[int]


def calibrate_powers(grid: TwinsGrid, geometry: TwinGeometry,
                     excitation: ExcitationModel) -> dict[int, float]:
    """Critical transmit power per pair: its window midpoint on the grid.

    Raises :class:`CalibrationError` naming every pair whose window is
    empty at its reader distance (the deployment is unusable as placed).
    """
    powers = {}
    bad = []
    for tid in grid.twins:
        window = critical_window(geometry, excitation, grid.reader_distance(tid))
        if window is None:
            bad.append(tid)
            continue
        lo, hi = window
        mid = lo + ((hi - lo) / 2.0 // P_TX_STEP_DB) * P_TX_STEP_DB
        powers[tid] = round(mid / P_TX_STEP_DB) * P_TX_STEP_DB
    if bad:
        raise CalibrationError(
            f"no critical window for twins {bad}: check separation and reader distances")
    return powers


class PriorityPoller:
    """Deterministic polling state machine over a calibrated grid."""

    def __init__(self, grid: TwinsGrid, powers: dict[int, float]):
        missing = sorted(set(grid.twins) - set(powers))
        if missing:
            raise CalibrationError(f"missing calibrated powers for twins {missing}")
        self.grid = grid
        self.powers = powers
        # initial order: ascending id, everyone on the normal list
        self.lists = PollLists(high=[], normal=sorted(grid.twins))
        self._high = set()

    def records(self, accessed: set[int] | None = None) -> list[PollRecord]:
        acc = accessed or set()
        return [PollRecord(tid, self.powers[tid],
                           1 if tid in self._high else 0,
                           1 if tid in acc else 0)
                for tid in sorted(self.grid.twins)]

    def _promote(self, tid: int):
        if tid not in self._high:
            self.lists.normal.remove(tid)
            self.lists.high.append(tid)
            self._high.add(tid)

    def _demote(self, tid: int):
        if tid in self._high:
            self.lists.high.remove(tid)
            self.lists.normal.append(tid)
            self._high.discard(tid)

    def poll_round(self, world: World | None = None, query_fn=None, clock_fn=None):
        """One full round: every pair queried exactly once.

        Returns ``(jumping_ids, trace)`` where trace rows are
        ``(t, twin_id, p_tx_dbm, outcome_name)``.  Either a
        :class:`~twinsim.env.World` or a raw ``query_fn(tid, p) ->
        QueryOutcome`` can drive it (the latter for tests).
        """
        if query_fn is None:
            if world is None:
                raise ValueError("need a world or a query_fn")
            query_fn = world.query
        if clock_fn is None:
            counter = iter(range(10 ** 9))
            clock_fn = ((lambda: world.clock) if world is not None
                        else (lambda: float(next(counter))))

        jumping: set[int] = set()
        accessed: set[int] = set()
        trace: list[tuple[float, int, float, str]] = []

        def interrogate(tid: int) -> bool:
            accessed.add(tid)
            t = clock_fn()
            out = query_fn(tid, self.powers[tid])
            trace.append((t, tid, self.powers[tid], out.value))
            return out is QueryOutcome.JUMPING

        def expand(seed: int):
            # Breadth-first over grid neighbors; jumping neighbors are
            # promoted immediately and expanded in turn, quiescent ones
            # keep their list but are marked accessed.
            queue = deque(self.grid.neighbor_twins(seed))
            while queue:
                tid = queue.popleft()
                if tid in accessed:
                    continue
                if interrogate(tid):
                    jumping.add(tid)
                    self._promote(tid)
                    queue.extend(self.grid.neighbor_twins(tid))

        # high-priority pass, with recursive expansion
        while True:
            tid = next((t for t in self.lists.high if t not in accessed), None)
            if tid is None:
                break
            if interrogate(tid):
                jumping.add(tid)
                expand(tid)
            else:
                self._demote(tid)

        # normal pass: jumpers move to the end of the high list
        while True:
            tid = next((t for t in self.lists.normal if t not in accessed), None)
            if tid is None:
                break
            if interrogate(tid):
                jumping.add(tid)
                self._promote(tid)

        assert accessed == set(self.grid.twins), "round must cover every pair"
        return jumping, trace

    def check_partition(self) -> bool:
        combined = sorted(self.lists.high + self.lists.normal)
        return (combined == sorted(self.grid.twins)
                and self._high == set(self.lists.high))


def run_polling(poller: PriorityPoller, world: World, duration: float,
                delta_t: float = 1.0):
    """Per-interval jump-set stream: [(interval index, jumping ids), ...].

    One round per interval; rounds longer than ``delta_t`` spill into the
    following interval and are flagged on the returned records.
    """
    from .env import run_scenario

    log = run_scenario(world, poller, duration, delta_t)
    return [(rec.index, rec.jumping) for rec in log.intervals], log
