"""Runtime for program games: recursive evaluation with depth-indexed shared
randomness, truncation, memoization, and information-flow enforcement.

Conventions pinned here:
  * base calls run at depth 1; every call made by a depth-L body runs at L+1
    (uniform child rule, including truncated calls);
  * a body at depth L may read U_L and U_{L+1} but never L itself;
  * disclosure outputs travel as integer bitmasks (bit p set = "disclose to
    player p"); NoOutput from a truncated child fails every all-ones test;
  * memoization by (program, flag, depth, truncated) is valid for programs
    flagged pure, and results must match literal recursion exactly.
"""

from __future__ import annotations

import sys
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .devices import InformationViolation


class _NoOutput:
    __slots__ = ()

    def __repr__(self):
        return "NoOutput"


NO_OUTPUT = _NoOutput()

_MISSING = object()


class _Truncated(Exception):
    """Internal: a truncated program attempted a child call."""


@dataclass
class TraceStats:
    max_depth: int = 0
    total_calls: int = 0
    terminated: bool = True
    disclosure: np.ndarray | None = None
    actions: tuple[int, ...] | None = None


class DepthExceeded(RuntimeError):
    """Call stack passed the depth cap; carries the partial trace stats."""

    def __init__(self, stats: TraceStats):
        super().__init__(f"depth cap exceeded at depth {stats.max_depth + 1}")
        self.stats = stats


@dataclass(frozen=True, eq=False)
class Program:
    """body(ctx) returns an action index (ctx.output_action true) or a
    disclosure bitmask. pure means deterministic given (c, U_L, U_{L+1},
    output_action), which licenses memoization."""

    name: str
    player: int
    body: Callable
    pure: bool = True

    def __eq__(self, other):
        return isinstance(other, Program) and self.name == other.name

    def __hash__(self):
        return hash(self.name)


class CallContext:
    """What a program body may see: the correlation value, its own type, the
    U-window of its (hidden) depth, child-call handles, and the types its
    evaluation context has legitimately learned."""

    __slots__ = ("_ev", "player", "_depth", "_truncated", "output_action",
                 "known", "own_type", "_uh", "_un")

    def __init__(self, ev: "Evaluation", player: int, depth: int,
                 truncated: bool, output_action: bool):
        self._ev = ev
        self.player = player
        self._depth = depth
        self._truncated = truncated
        self.output_action = output_action
        self.known = 1 << player  # bitmask of players whose types are known
        self.own_type = ev.t[player]
        # the window is materialized eagerly; U values are pure functions of
        # (seed, trial, level), so reading ahead is unobservable
        u = ev._u
        try:
            self._uh = u[depth - 1]
            self._un = u[depth]
        except IndexError:
            self._uh = ev.u(depth)
            self._un = ev.u(depth + 1)

    # -- randomness window ---------------------------------------------------

    @property
    def c(self) -> float:
        return self._ev.c

    @property
    def scratch(self) -> dict:
        """Per-trial cache shared across calls (policy realizations etc.)."""
        return self._ev.scratch

    def u_here(self) -> float:
        return self._uh

    def u_next(self) -> float:
        return self._un

    # -- child calls (the memo fast path is inlined here; keep the three
    # variants in sync with Evaluation.call) ----------------------------------

    def call_disclosure(self, k: int):
        if self._truncated:
            raise _Truncated()
        ev = self._ev
        depth = self._depth + 1
        ev.total_calls += 1
        if depth > ev.depth_cap:
            raise DepthExceeded(ev._partial_stats())
        if depth > ev.max_depth:
            ev.max_depth = depth
        row = None
        if ev.memo_ok[k]:
            try:
                row = ev._memo[depth - 1]
            except IndexError:
                row = ev._extend_memo(depth)
            out = row[4 * k]
        else:
            out = _MISSING
        if out is _MISSING:
            ctx = CallContext(ev, k, depth, False, False)
            try:
                out = ev.programs[k].body(ctx)
            except _Truncated:
                out = NO_OUTPUT
            if row is not None:
                row[4 * k] = out
        if out is not NO_OUTPUT and (out >> self.player) & 1:
            self.known |= 1 << k
        return out

    def call_truncated_disclosure(self, k: int):
        if self._truncated:
            raise _Truncated()
        ev = self._ev
        depth = self._depth + 1
        ev.total_calls += 1
        if depth > ev.depth_cap:
            raise DepthExceeded(ev._partial_stats())
        if depth > ev.max_depth:
            ev.max_depth = depth
        row = None
        if ev.memo_ok[k]:
            try:
                row = ev._memo[depth - 1]
            except IndexError:
                row = ev._extend_memo(depth)
            out = row[4 * k + 1]
        else:
            out = _MISSING
        if out is _MISSING:
            ctx = CallContext(ev, k, depth, True, False)
            try:
                out = ev.programs[k].body(ctx)
            except _Truncated:
                out = NO_OUTPUT
            if row is not None:
                row[4 * k + 1] = out
        if out is not NO_OUTPUT and (out >> self.player) & 1:
            self.known |= 1 << k
        return out

    def call_action(self, k: int):
        if self._truncated:
            raise _Truncated()
        ev = self._ev
        depth = self._depth + 1
        ev.total_calls += 1
        if depth > ev.depth_cap:
            raise DepthExceeded(ev._partial_stats())
        if depth > ev.max_depth:
            ev.max_depth = depth
        row = None
        if ev.memo_ok[k]:
            try:
                row = ev._memo[depth - 1]
            except IndexError:
                row = ev._extend_memo(depth)
            out = row[4 * k + 2]
        else:
            out = _MISSING
        if out is _MISSING:
            ctx = CallContext(ev, k, depth, False, True)
            try:
                out = ev.programs[k].body(ctx)
            except _Truncated:
                out = NO_OUTPUT
            if row is not None:
                row[4 * k + 2] = out
        return out

    # -- information ledger ----------------------------------------------------

    def knows(self, k: int) -> bool:
        return bool((self.known >> k) & 1)

    def type_of(self, k: int) -> int:
        if not (self.known >> k) & 1:
            raise InformationViolation(
                f"program of player {self.player} read player {k}'s undisclosed type"
            )
        return self._ev.t[k]

    def full_profile(self) -> tuple[int, ...]:
        if self.known != self._ev.full_mask:
            raise InformationViolation(
                f"program of player {self.player} read the full type profile "
                "without full disclosure"
            )
        return self._ev.t

    def profile_if_known(self) -> tuple[int, ...] | None:
        return self._ev.t if self.known == self._ev.full_mask else None

    def profile_minus_if_known(self, j: int) -> tuple[int, ...] | None:
        """Types of all players except j, or None if any is undisclosed."""
        need = self._ev.full_mask & ~(1 << j)
        if self.known & need != need:
            return None
        t = self._ev.t
        return tuple(t[p] for p in range(self._ev.n) if p != j)


class Evaluation:
    """One trial's call tree: owns the memo tables, counters, scratch caches
    and the trial's (c, U_1, U_2, ...) window."""

    __slots__ = ("programs", "n", "t", "c", "signal", "trial", "depth_cap",
                 "memoize", "memo_ok", "full_mask", "max_depth", "total_calls",
                 "scratch", "_u", "_memo")

    def __init__(self, programs: Sequence[Program], t: tuple[int, ...], signal,
                 trial: int, depth_cap: int = 10_000, memoize: bool = True):
        self.programs = tuple(programs)
        self.n = len(programs)
        self.t = tuple(int(v) for v in t)
        self.signal = signal
        self.trial = trial
        self.c = signal.draw_c(trial)
        self.depth_cap = depth_cap
        self.memoize = memoize
        self.full_mask = (1 << self.n) - 1
        self.memo_ok = tuple(memoize and p.pure for p in self.programs)
        self.max_depth = 0
        self.total_calls = 0
        self.scratch: dict = {}
        self._u: list[float] = []
        self._memo: list = []  # per depth: list indexed by (k*4 + flag*2 + trunc)

    def _extend_memo(self, depth: int) -> list:
        memo = self._memo
        while len(memo) < depth:
            memo.append([_MISSING] * (4 * self.n))
        return memo[depth - 1]

    def u(self, level: int) -> float:
        try:
            return self._u[level - 1]
        except IndexError:
            u = self._u
            while len(u) < level:
                u.append(self.signal.u_level(self.trial, len(u) + 1))
            return u[level - 1]

    def call(self, k: int, output_action: bool, depth: int, truncated: bool):
        self.total_calls += 1
        if depth > self.depth_cap:
            raise DepthExceeded(self._partial_stats())
        if depth > self.max_depth:
            self.max_depth = depth
        prog = self.programs[k]
        slot = -1
        if self.memoize and prog.pure:
            memo = self._memo
            while len(memo) < depth:
                memo.append([_MISSING] * (4 * self.n))
            slot = 4 * k + 2 * output_action + truncated
            hit = memo[depth - 1][slot]
            if hit is not _MISSING:
                return hit
        ctx = CallContext(self, k, depth, truncated, output_action)
        try:
            out = prog.body(ctx)
        except _Truncated:
            out = NO_OUTPUT
        if slot >= 0:
            self._memo[depth - 1][slot] = out
        return out

    def memo_output(self, k: int, output_action: bool, depth: int,
                    truncated: bool = False):
        """Recorded output of a memoized call, or NoOutput-sentinel-free
        _MISSING when that call never happened (test hook)."""
        if len(self._memo) < depth:
            return _MISSING
        return self._memo[depth - 1][4 * k + 2 * output_action + truncated]

    def _partial_stats(self) -> TraceStats:
        return TraceStats(self.max_depth, self.total_calls, terminated=False)


def truncate(program: Program) -> Program:
    """Wrapper that aborts with NoOutput the moment the body would call
    another program; if no child call occurs the genuine output is returned.

    The engine reaches the same semantics through the truncated-call flag;
    this wrapper exists for driving a program's truncation directly.
    """

    def body(ctx: CallContext):
        inner = CallContext(ctx._ev, ctx.player, ctx._depth, True, ctx.output_action)
        return program.body(inner)  # _Truncated is caught by the engine

    return Program(f"[{program.name}]", program.player, body, program.pure)


def run_base_calls(
    game,
    programs: Sequence[Program],
    t: tuple[int, ...],
    signal,
    trial: int,
    depth_cap: int = 10_000,
    memoize: bool = True,
    return_evaluation: bool = False,
):
    """Base disclosure calls then base action calls, all at depth 1.

    Returns (disclosure matrix, action profile, TraceStats); raises
    DepthExceeded (with partial stats) if the trace passes the cap.
    """
    n = len(programs)
    if game is not None and game.n != n:
        raise ValueError("one program per player required")
    ev = Evaluation(programs, t, signal, trial, depth_cap, memoize)
    disclosure = np.eye(n, dtype=int)
    masks = []
    for i in range(n):
        out = ev.call(i, False, 1, False)
        mask = 0 if out is NO_OUTPUT else int(out)
        masks.append(mask)
        for j in range(n):
            if j != i:
                disclosure[i, j] = (mask >> j) & 1
    actions = []
    for i in range(n):
        out = ev.call(i, True, 1, False)
        if out is NO_OUTPUT or not isinstance(out, (int, np.integer)):
            raise ValueError(f"base action call of {programs[i].name} returned {out!r}")
        actions.append(int(out))
    stats = TraceStats(ev.max_depth, ev.total_calls, True, disclosure, tuple(actions))
    if return_evaluation:
        return disclosure, tuple(actions), stats, ev
    return disclosure, tuple(actions), stats


# --------------------------------------------------------------------------
# deep-recursion plumbing: CPython 3.10 consumes C stack per frame, so deep
# traces run in a worker thread with an enlarged stack.

_BIG_STACK = 512 * 1024 * 1024


def run_with_deep_stack(fn: Callable, depth_cap: int):
    """Run fn() with recursion room for depth_cap levels of program calls."""
    needed = 20_000 + 6 * depth_cap
    if sys.getrecursionlimit() >= needed and depth_cap <= 2_000:
        return fn()
    box: dict = {}

    def runner():
        old_limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(old_limit, needed))
        try:
            box["value"] = fn()
        except BaseException as exc:  # noqa: BLE001 - transported to caller
            box["error"] = exc
        finally:
            sys.setrecursionlimit(old_limit)

    old_size = threading.stack_size(_BIG_STACK)
    try:
        th = threading.Thread(target=runner, name="program-game-eval")
        th.start()
        th.join()
    finally:
        threading.stack_size(old_size)
    if "error" in box:
        raise box["error"]
    return box["value"]
