"""Small-step abstract machine for the core language.

A thread is a CEK-style triple: a control item (an expression to evaluate,
a value being returned, or an in-progress task such as argument binding or
a two-phase memory access), a continuation of frames, and an environment,
plus the ``clstack`` of saved caller environments. Every call to
:meth:`Machine.step` performs exactly one rewrite on one thread.

Frames and tasks are plain tuples tagged by their first element so that a
whole machine state can be keyed structurally for interleaving search.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from . import core_ast as A
from .core_ast import CoreProgram
from .memory import (
    UNIT, DataRace, Memory, MemoryFault, Value, VClosure, VInt, VLoc, VStr,
)

EVAL, VALUE, TASK = 0, 1, 2

_AST_TYPES = frozenset(
    [A.Ident, A.IntLit, A.StrLit, A.Skip, A.Deref, A.BinOp, A.Case, A.FnDef, A.AnonFn, A.Apply,
     A.TailCall, A.Fork, A.EnvAssign, A.MemAssign, A.FieldOffset, A.Allocate, A.Seq, A.Cas,
     A.Append, A.Free]
)


class Env:
    """Immutable name -> Value map; ``bind`` returns an extended copy."""

    __slots__ = ("_d", "_h")

    def __init__(self, d: Optional[dict] = None):
        self._d = d if d is not None else {}
        self._h = None

    def get(self, name: str):
        return self._d.get(name)

    def bind(self, name: str, value: Value) -> Env:
        d = dict(self._d)
        d[name] = value
        return Env(d)

    def items(self):
        return self._d.items()

    def __contains__(self, name: str) -> bool:
        return name in self._d

    def __eq__(self, other) -> bool:
        return isinstance(other, Env) and self._d == other._d

    def __hash__(self) -> int:
        if self._h is None:
            self._h = hash(frozenset(self._d.items()))
        return self._h

    def __repr__(self) -> str:
        return "Env(" + ", ".join(f"{k}={v}" for k, v in sorted(self._d.items())) + ")"


EMPTY_ENV = Env()


@dataclass(frozen=True)
class Closure:
    cid: int
    context: Env
    params: tuple
    body: A.Exp


class MachineError(Exception):
    """Runtime error raised by a step, tagged with thread and source position."""

    def __init__(self, kind: str, message: str, tid: int = 0, pos=None):
        self.kind = kind
        self.message = message
        self.tid = tid
        self.pos = pos
        where = f"{pos[0]}:{pos[1]}" if pos else "?:?"
        super().__init__(f"{kind} in thread {tid} at {where}: {message}")


class StepBudgetExceeded(Exception):
    pass


@dataclass
class Thread:
    tid: int
    mode: int
    control: object
    k: Optional[tuple] = None  # cons list (frame, rest)
    env: Env = EMPTY_ENV
    clstack: Optional[tuple] = None  # cons list (Env, rest)
    depth: int = 0  # length of clstack

    @property
    def terminal(self) -> bool:
        return self.mode == VALUE and self.k is None

    @property
    def result(self) -> Optional[Value]:
        return self.control if self.terminal else None

    def copy(self) -> Thread:
        return Thread(self.tid, self.mode, self.control, self.k, self.env, self.clstack, self.depth)


def _skey(x):
    """Structural key; syntax nodes are identified by object identity."""
    t = type(x)
    if t is tuple:
        return tuple(_skey(y) for y in x)
    if t in _AST_TYPES:
        return ("@", id(x))
    return x


@dataclass
class FinalConfig:
    results: dict  # tid -> Value | str (error text)
    dump: str
    races: list
    steps: int
    error: Optional[MachineError] = None
    crcnt: int = 0
    max_clstack: int = 0

    @property
    def value(self):
        return self.results.get(0)


class Machine:
    def __init__(self, prog: CoreProgram, *, strict_races: bool = False, strict_uninit: bool = False):
        self.memory = Memory(strict_races=strict_races, strict_uninit=strict_uninit)
        self.crcnt = 0
        self.funclosure: dict[str, int] = {}
        self.closures: dict[int, Closure] = {}
        self.next_tid = 1
        self.steps = 0
        self.max_clstack = 0
        self.trace: list[tuple[int, int, str]] = []
        self.record_trace = False
        if prog.body is None:
            self.threads = [Thread(0, VALUE, UNIT)]
        else:
            self.threads = [Thread(0, EVAL, prog.body)]

    # -- copying and keys ----------------------------------------------------

    def copy(self) -> Machine:
        m = Machine.__new__(Machine)
        m.memory = self.memory.copy()
        m.crcnt = self.crcnt
        m.funclosure = dict(self.funclosure)
        m.closures = dict(self.closures)
        m.next_tid = self.next_tid
        m.steps = self.steps
        m.max_clstack = self.max_clstack
        m.trace = list(self.trace)
        m.record_trace = self.record_trace
        m.threads = [t.copy() for t in self.threads]
        return m

    def key(self) -> tuple:
        threads = tuple(
            (t.tid, t.mode, _skey(t.control), _skey(t.k), t.env, t.clstack) for t in self.threads
        )
        closures = tuple(
            (c.cid, c.context, c.params, id(c.body)) for _, c in sorted(self.closures.items())
        )
        return (threads, self.crcnt, tuple(sorted(self.funclosure.items())), closures,
                self.next_tid, self.memory.key())

    # -- scheduling helpers --------------------------------------------------

    def runnable(self) -> list[int]:
        return [i for i, t in enumerate(self.threads) if not t.terminal]

    def thread_index(self, tid: int) -> int:
        for i, t in enumerate(self.threads):
            if t.tid == tid:
                return i
        raise KeyError(tid)

    def all_terminal(self) -> bool:
        return all(t.terminal for t in self.threads)

    def is_local(self, idx: int) -> bool:
        """True when the next step of thread ``idx`` touches no shared state."""
        t = self.threads[idx]
        if t.terminal:
            return False
        if t.mode == EVAL:
            e = t.control
            tp = type(e)
            if tp is A.Ident:
                return e.name in t.env
            return tp not in (A.FnDef, A.AnonFn, A.Fork)
        if t.mode == TASK:
            task = t.control
            if task[0] != "fncalls":
                return False
            _, _, params, values, _, _ = task
            return not (params and not values)
        # delivering a value into a frame
        if t.k is None:
            return True
        frame = t.k[0]
        kind = frame[0]
        if kind in ("deref", "alloc", "prim"):
            if kind == "prim":
                return bool(frame[2])
            return False
        if kind == "memr":
            return False
        return True

    # -- stepping ------------------------------------------------------------

    def step(self, idx: int) -> str:
        t = self.threads[idx]
        if t.terminal:
            raise ValueError(f"thread {t.tid} has terminated")
        try:
            if t.mode == EVAL:
                rule = self._eval(t, t.control)
            elif t.mode == VALUE:
                rule = self._deliver(t, t.control)
            else:
                rule = self._task(t, t.control)
        except MemoryFault as exc:
            raise MachineError(exc.kind, exc.message, t.tid, self._pos(t)) from exc
        self.steps += 1
        if t.depth > self.max_clstack:
            self.max_clstack = t.depth
        if self.record_trace:
            self.trace.append((t.tid, self.steps - 1, rule))
        return rule

    def _pos(self, t: Thread):
        c = t.control
        if type(c) in _AST_TYPES:
            return c.pos
        if t.mode == TASK and isinstance(c, tuple) and type(c[-1]) in _AST_TYPES:
            return c[-1].pos
        if t.k is not None:
            frame = t.k[0]
            node = frame[-1]
            if type(node) in _AST_TYPES:
                return node.pos
        return None

    def _err(self, t: Thread, kind: str, msg: str, node=None):
        pos = node.pos if node is not None else self._pos(t)
        raise MachineError(kind, msg, t.tid, pos)

    @staticmethod
    def _ret(t: Thread, v: Value) -> None:
        t.mode = VALUE
        t.control = v

    @staticmethod
    def _push(t: Thread, frame: tuple, e) -> None:
        t.k = (frame, t.k)
        t.mode = EVAL
        t.control = e

    def _mint(self, t: Thread, params: tuple, body) -> VClosure:
        cid = self.crcnt
        self.crcnt += 1
        self.closures[cid] = Closure(cid, t.env, params, body)
        return VClosure(cid)

    def _eval(self, t: Thread, e) -> str:
        tp = type(e)
        if tp is A.IntLit:
            self._ret(t, VInt(e.value))
            return "int"
        if tp is A.Ident:
            v = t.env.get(e.name)
            if v is not None:
                self._ret(t, v)
                return "lookup-env"
            cid = self.funclosure.get(e.name)
            if cid is None:
                self._err(t, "UnknownName", f"unbound name {e.name}", e)
            self._ret(t, VClosure(cid))
            return "lookup-fun"
        if tp is A.BinOp:
            self._push(t, ("binl", e.op, e.right, e), e.left)
            return "push"
        if tp is A.Deref:
            self._push(t, ("deref", e.order, e), e.exp)
            return "push"
        if tp is A.FieldOffset:
            self._push(t, ("fieldl", e.index, e), e.base)
            return "push"
        if tp is A.Apply:
            return self._apply(t, e, False)
        if tp is A.TailCall:
            return self._apply(t, e.call, True)
        if tp is A.Seq:
            self._push(t, ("seq", e.second, e), e.first)
            return "push"
        if tp is A.Case:
            self._push(t, ("case", e.branches, e), e.scrutinee)
            return "push"
        if tp is A.MemAssign:
            self._push(t, ("meml", e.order, e.value, e), e.target)
            return "push"
        if tp is A.EnvAssign:
            self._push(t, ("envassign", e.name, e), e.exp)
            return "push"
        if tp is A.FnDef:
            v = self._mint(t, e.params, e.body)
            self.funclosure[e.name] = v.cid
            self._ret(t, v)
            return "fn-def"
        if tp is A.AnonFn:
            self._ret(t, self._mint(t, e.params, e.body))
            return "anon-fn"
        if tp is A.Skip:
            self._ret(t, UNIT)
            return "skip"
        if tp is A.StrLit:
            self._ret(t, VStr(e.value))
            return "str"
        if tp is A.Allocate:
            self._push(t, ("alloc", e), e.size)
            return "push"
        if tp is A.Fork:
            child = Thread(self.next_tid, EVAL, e.body, None, t.env, None, 0)
            self.next_tid += 1
            self.threads.append(child)
            self._ret(t, UNIT)
            return "fork"
        if tp is A.Cas:
            self._push(t, ("prim", "cas", (e.expected, e.new), (), e), e.loc)
            return "push"
        if tp is A.Append:
            self._push(t, ("prim", "append", (e.value,), (), e), e.loc)
            return "push"
        if tp is A.Free:
            self._push(t, ("prim", "free", (), (), e), e.loc)
            return "push"
        raise TypeError(f"cannot evaluate {e!r}")

    def _apply(self, t: Thread, e: A.Apply, tail: bool) -> str:
        if e.args:
            self._push(t, ("args", e.fn, e.args[1:], (), tail, e), e.args[0])
        else:
            self._push(t, ("callee", (), tail, e), e.fn)
        return "push"

    def _deliver(self, t: Thread, v: Value) -> str:
        if t.k is None:
            raise ValueError("terminal thread")
        frame, rest = t.k
        kind = frame[0]
        t.k = rest
        if kind == "args":
            _, fn, pending, done, tail, node = frame
            done = done + (v,)
            if pending:
                self._push(t, ("args", fn, pending[1:], done, tail, node), pending[0])
            else:
                self._push(t, ("callee", done, tail, node), fn)
            return "args"
        if kind == "callee":
            _, values, tail, node = frame
            if type(v) is not VClosure:
                self._err(t, "NotAClosure", f"cannot apply {v}", node)
            clo = self.closures[v.cid]
            if tail:
                saved = t.env
            else:
                t.clstack = (t.env, t.clstack)
                t.depth += 1
                saved = None
            t.env = clo.context
            t.mode = TASK
            t.control = ("fncalls", v.cid, clo.params, values, tail, saved)
            return "tailcall-enter" if tail else "call"
        if kind == "return":
            env, t.clstack = t.clstack
            t.depth -= 1
            t.env = env
            return "return"
        if kind == "binl":
            _, op, right, node = frame
            self._push(t, ("binr", op, v, node), right)
            return "bin"
        if kind == "binr":
            _, op, left, node = frame
            self._ret(t, self._arith(t, op, left, v, node))
            return "bin"
        if kind == "seq":
            t.mode = EVAL
            t.control = frame[1]
            return "seq"
        if kind == "case":
            _, branches, node = frame
            if type(v) is not VInt:
                self._err(t, "NonIntArith", f"case scrutinee {v} is not an integer", node)
            if not 0 <= v.n < len(branches):
                self._err(t, "CaseOutOfRange", f"case index {v.n} with {len(branches)} branches", node)
            t.mode = EVAL
            t.control = branches[v.n]
            return "case"
        if kind == "deref":
            _, order, node = frame
            loc = self._loc(t, v, node)
            if order == "na":
                ticket = self.memory.read_na_begin(loc.addr, loc.offset, t.tid)
                t.mode = TASK
                t.control = ("readnac", ticket, node)
                return "read-na"
            self._ret(t, self.memory.read_at(loc.addr, loc.offset, t.tid))
            return "read-at"
        if kind == "meml":
            _, order, value_exp, node = frame
            self._push(t, ("memr", order, self._loc(t, v, node), node), value_exp)
            return "push"
        if kind == "memr":
            _, order, loc, node = frame
            if order == "na":
                ticket = self.memory.write_na_begin(loc.addr, loc.offset, v, t.tid)
                t.mode = TASK
                t.control = ("writenac", ticket, node)
                return "write-na"
            self.memory.write_at(loc.addr, loc.offset, v, t.tid)
            self._ret(t, UNIT)
            return "write-at"
        if kind == "envassign":
            t.env = t.env.bind(frame[1], v)
            self._ret(t, UNIT)
            return "env-assign"
        if kind == "fieldl":
            _, idx, node = frame
            self._push(t, ("fieldr", self._loc(t, v, node), node), idx)
            return "field"
        if kind == "fieldr":
            _, loc, node = frame
            if type(v) is not VInt:
                self._err(t, "NonIntArith", f"field offset {v} is not an integer", node)
            self._ret(t, VLoc(loc.addr, loc.offset + v.n))
            return "field"
        if kind == "alloc":
            node = frame[1]
            if type(v) is not VInt:
                self._err(t, "NonIntArith", f"allocation size {v} is not an integer", node)
            addr = self.memory.allocate_begin(v.n)
            t.mode = TASK
            t.control = ("units", addr, v.n, node)
            return "allocate"
        if kind == "prim":
            _, op, pending, done, node = frame
            done = done + (v,)
            if pending:
                self._push(t, ("prim", op, pending[1:], done, node), pending[0])
                return "push"
            loc = self._loc(t, done[0], node)
            mem = self.memory
            if op == "cas":
                self._ret(t, mem.cas(loc.addr, loc.offset, done[1], done[2], t.tid))
            elif op == "append":
                mem.append(loc.addr, done[1], t.tid)
                self._ret(t, UNIT)
            else:
                if loc.offset != 0:
                    self._err(t, "NotALocation", f"free of interior pointer {loc}", node)
                mem.free(loc.addr, t.tid)
                self._ret(t, UNIT)
            return op
        raise TypeError(f"unknown frame {kind}")

    def _task(self, t: Thread, task: tuple) -> str:
        kind = task[0]
        if kind == "fncalls":
            _, cid, params, values, tail, saved = task
            if params and values:
                t.env = t.env.bind(params[0], values[0])
                t.control = ("fncalls", cid, params[1:], values[1:], tail, saved)
                return "bind-arg"
            if values:
                self._err(t, "TooManyArgs", f"closure cr({cid}) applied to {len(values)} extra argument(s)")
            body = self.closures[cid].body
            if not params:
                if not tail:
                    t.k = (("return", body), t.k)
                t.mode = EVAL
                t.control = body
                return "full-app"
            v = self._mint(t, params, body)
            if tail:
                t.env = saved
            else:
                t.env, t.clstack = t.clstack
                t.depth -= 1
            self._ret(t, v)
            return "partial-app"
        if kind == "readnac":
            self._ret(t, self.memory.read_na_finish(task[1]))
            return "read-na-finish"
        if kind == "writenac":
            self.memory.write_na_finish(task[1])
            self._ret(t, UNIT)
            return "write-na-finish"
        if kind == "units":
            _, addr, remaining, node = task
            if remaining:
                self.memory.create_unit(addr)
                t.control = ("units", addr, remaining - 1, node)
                return "create-unit"
            self._ret(t, self.memory.allocate_finish(addr))
            return "allocate-finish"
        raise TypeError(f"unknown task {kind}")

    def _loc(self, t: Thread, v: Value, node) -> VLoc:
        if type(v) is not VLoc:
            self._err(t, "NotALocation", f"{v} is not a memory location", node)
        return v

    def _arith(self, t: Thread, op: str, a: Value, b: Value, node) -> Value:
        if op == "==":
            return VInt(1 if a == b else 0)
        if type(a) is not VInt or type(b) is not VInt:
            self._err(t, "NonIntArith", f"operands {a} {op} {b} must be integers", node)
        x, y = a.n, b.n
        if op == "+":
            return VInt(x + y)
        if op == "-":
            return VInt(x - y)
        if op == "*":
            return VInt(x * y)
        if op == "mod":
            if y == 0:
                self._err(t, "NonIntArith", "mod by zero", node)
            return VInt(x % abs(y))
        if op == "<":
            return VInt(1 if x < y else 0)
        if op == ">":
            return VInt(1 if x > y else 0)
        raise ValueError(op)

    # -- results -------------------------------------------------------------

    def final(self, error: Optional[MachineError] = None) -> FinalConfig:
        results = {}
        for th in self.threads:
            if th.terminal:
                results[th.tid] = th.control
            elif error is not None and error.tid == th.tid:
                results[th.tid] = f"error[{error.kind}]"
            else:
                results[th.tid] = "stuck"
        return FinalConfig(results, self.memory.dump(), list(self.memory.races), self.steps, error,
                           self.crcnt, self.max_clstack)


def load(prog: CoreProgram, **kw) -> Machine:
    return Machine(prog, **kw)


# --------------------------------------------------------------------------
# Schedulers
# --------------------------------------------------------------------------

Scheduler = Callable[[Machine, list], int]


class RoundRobin:
    """Cycle through runnable threads, one step each."""

    def __init__(self):
        self.last = -1

    def __call__(self, m: Machine, runnable: list) -> int:
        tids = [m.threads[i].tid for i in runnable]
        for i, tid in zip(runnable, tids):
            if tid > self.last:
                self.last = tid
                return i
        self.last = tids[0]
        return runnable[0]


class RandomSched:
    def __init__(self, seed: int = 0):
        self.rng = random.Random(seed)

    def __call__(self, m: Machine, runnable: list) -> int:
        return runnable[self.rng.randrange(len(runnable))]


class FixedTrace:
    """Replay a list of thread ids; falls back to round-robin when exhausted
    or when the listed thread cannot step."""

    def __init__(self, tids: Sequence[int]):
        self.tids = list(tids)
        self.pos = 0
        self.fallback = RoundRobin()

    def __call__(self, m: Machine, runnable: list) -> int:
        if self.pos < len(self.tids):
            want = self.tids[self.pos]
            self.pos += 1
            for i in runnable:
                if m.threads[i].tid == want:
                    self.fallback.last = want
                    return i
        return self.fallback(m, runnable)


DEFAULT_MAX_STEPS = 5_000_000


def run(m: Machine, sched: Optional[Scheduler] = None, *, max_steps: int = DEFAULT_MAX_STEPS,
        raise_errors: bool = True) -> FinalConfig:
    """Step until every thread is terminal.

    Runtime errors propagate when ``raise_errors`` is set; otherwise they end
    the run and are recorded in the returned :class:`FinalConfig`.
    """
    sched = sched or RoundRobin()
    while True:
        runnable = m.runnable()
        if not runnable:
            return m.final()
        if m.steps >= max_steps:
            raise StepBudgetExceeded(f"step budget of {max_steps} exhausted")
        try:
            m.step(sched(m, runnable))
        except MachineError as exc:
            if raise_errors:
                raise
            return m.final(exc)


def run_program(prog: CoreProgram, sched: Optional[Scheduler] = None, **kw) -> FinalConfig:
    max_steps = kw.pop("max_steps", DEFAULT_MAX_STEPS)
    raise_errors = kw.pop("raise_errors", True)
    return run(Machine(prog, **kw), sched, max_steps=max_steps, raise_errors=raise_errors)


__all__ = [
    "Env", "Closure", "Machine", "MachineError", "StepBudgetExceeded", "Thread", "FinalConfig",
    "RoundRobin", "RandomSched", "FixedTrace", "run", "run_program", "load", "DataRace",
]
