"""Exhaustive exploration of thread interleavings.

Depth-first search over scheduling choices with two reductions:

* states are deduplicated by their structural key (race history and the
  step counter are not part of the key);
* a step that touches only its own thread's state commutes with every step
  of every other thread, so such steps are taken eagerly without branching.
  Only shared-state steps (memory accesses, closure minting, forks and
  global function lookups) are scheduling points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .machine import FinalConfig, Machine, MachineError


class BoundExceeded(Exception):
    pass


@dataclass
class SearchResult:
    configs: list[FinalConfig]
    raced: bool
    races: list = field(default_factory=list)
    states: int = 0

    def dumps(self) -> list[str]:
        return [c.dump for c in self.configs]


def _outcome_key(cfg: FinalConfig) -> tuple:
    results = tuple(sorted((tid, str(v)) for tid, v in cfg.results.items()))
    return (results, cfg.dump, cfg.error.kind if cfg.error else "")


def enumerate_interleavings(m: Machine, max_steps: int = 10_000) -> SearchResult:
    seen: set = set()
    outcomes: dict[tuple, FinalConfig] = {}
    races: dict = {}
    stack = [m.copy()]
    states = 0
    while stack:
        cur = stack.pop()
        error = None
        # run local steps to a fixpoint
        while error is None:
            if cur.steps > max_steps:
                raise BoundExceeded(f"a schedule exceeded {max_steps} steps")
            local = next((i for i in cur.runnable() if cur.is_local(i)), None)
            if local is None:
                break
            try:
                cur.step(local)
            except MachineError as exc:
                error = exc
        runnable = cur.runnable() if error is None else []
        for r in cur.memory.races:
            races.setdefault(str(r), r)
        if not runnable:
            cfg = cur.final(error)
            outcomes.setdefault(_outcome_key(cfg), cfg)
            continue
        key = cur.key()
        if key in seen:
            continue
        seen.add(key)
        states += 1
        for idx in reversed(runnable):
            child = cur.copy()
            try:
                child.step(idx)
            except MachineError as exc:
                for r in child.memory.races:
                    races.setdefault(str(r), r)
                cfg = child.final(exc)
                outcomes.setdefault(_outcome_key(cfg), cfg)
                continue
            stack.append(child)
    configs = [outcomes[k] for k in sorted(outcomes)]
    return SearchResult(configs, bool(races), [races[k] for k in sorted(races)], states)
