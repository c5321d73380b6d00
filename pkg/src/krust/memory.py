"""Block memory with reader/writer status accounting.

Every block is addressed by a never-reused integer. Each address has a
status pair ``(R, W)`` counting the non-atomic reads and writes that are
currently in flight. Non-atomic accesses take two steps (begin, finish);
atomic ones take one. A data race is recorded whenever an access starts
while a conflicting non-atomic access on the same block is still in flight.
Race granularity is the whole block because status is keyed by address.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .lexer import escape

# --------------------------------------------------------------------------
# Values
# --------------------------------------------------------------------------


class Value:
    __slots__ = ()


@dataclass(frozen=True)
class VInt(Value):
    n: int

    def __str__(self) -> str:
        return str(self.n)


@dataclass(frozen=True)
class VLoc(Value):
    addr: int
    offset: int = 0

    def __str__(self) -> str:
        return f"location({self.addr},{self.offset})"


@dataclass(frozen=True)
class VClosure(Value):
    cid: int

    def __str__(self) -> str:
        return f"cr({self.cid})"


@dataclass(frozen=True)
class VStr(Value):
    s: str

    def __str__(self) -> str:
        return escape(self.s)


@dataclass(frozen=True)
class VUnit(Value):
    def __str__(self) -> str:
        return "unit"


UNIT = VUnit()
FALSE = VInt(0)
TRUE = VInt(1)


# --------------------------------------------------------------------------
# Errors and race reports
# --------------------------------------------------------------------------


class MemoryFault(Exception):
    kind = "MemoryFault"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class UseAfterFree(MemoryFault):
    kind = "UseAfterFree"


class OutOfBounds(MemoryFault):
    kind = "OutOfBounds"


class UninitializedUnit(MemoryFault):
    kind = "UninitializedUnit"


class DoubleFree(MemoryFault):
    kind = "DoubleFree"


class DataRace(MemoryFault):
    kind = "DataRace"

    def __init__(self, report: RaceReport):
        super().__init__(str(report))
        self.report = report


@dataclass(frozen=True)
class Ticket:
    """Handle for an in-flight non-atomic access."""

    tid: int
    kind: str  # "read" | "write"
    addr: int
    offset: int
    value: Value | None = None


@dataclass(frozen=True)
class RaceReport:
    addr: int
    offset: int | None  # None means the whole block (append/free)
    access: str  # the access that started, e.g. "na-read"
    access_tid: int
    conflicts: tuple[tuple[str, int], ...]  # in-flight (kind, tid) pairs

    def __str__(self) -> str:
        where = f"addr({self.addr})" if self.offset is None else f"location({self.addr},{self.offset})"
        others = ", ".join(f"{k} by thread {t}" for k, t in self.conflicts)
        return f"race on {where}: {self.access} by thread {self.access_tid} overlaps {others}"


# --------------------------------------------------------------------------
# Blocks and memory
# --------------------------------------------------------------------------


@dataclass
class Block:
    baddress: int
    bnum: int
    bstore: dict[int, Value] = field(default_factory=dict)
    written: set[int] = field(default_factory=set)

    def copy(self) -> Block:
        return Block(self.baddress, self.bnum, dict(self.bstore), set(self.written))


class Memory:
    """The memory cell: ``blkNum``, ``memstatus`` and the set of blocks.

    ``strict_races`` turns race reports into :class:`DataRace` exceptions.
    ``strict_uninit`` makes reads of never-written units fail.
    """

    def __init__(self, *, strict_races: bool = False, strict_uninit: bool = False):
        self.blk_num = 0
        self.status: dict[int, list[int]] = {}
        self.blocks: dict[int, Block] = {}
        self.inflight: Counter[Ticket] = Counter()
        self.races: list[RaceReport] = []
        self.strict_races = strict_races
        self.strict_uninit = strict_uninit

    def copy(self) -> Memory:
        m = Memory.__new__(Memory)
        m.blk_num = self.blk_num
        m.status = {a: list(s) for a, s in self.status.items()}
        m.blocks = {a: b.copy() for a, b in self.blocks.items()}
        m.inflight = Counter(self.inflight)
        m.races = list(self.races)
        m.strict_races = self.strict_races
        m.strict_uninit = self.strict_uninit
        return m

    def key(self) -> tuple:
        """Structural identity used to deduplicate explored states."""
        return (
            self.blk_num,
            tuple(sorted((a, tuple(s)) for a, s in self.status.items())),
            tuple(
                (a, b.bnum, tuple(sorted(b.bstore.items())), tuple(sorted(b.written)))
                for a, b in sorted(self.blocks.items())
            ),
            tuple(sorted(self.inflight.items(), key=repr)),
        )

    # -- helpers -------------------------------------------------------------

    def _block(self, addr: int) -> Block:
        block = self.blocks.get(addr)
        if block is None:
            raise UseAfterFree(f"addr({addr}) is not an allocated block")
        return block

    def _check_offset(self, block: Block, offset: int) -> None:
        if not 0 <= offset < block.bnum:
            raise OutOfBounds(f"offset {offset} outside block addr({block.baddress}) of {block.bnum} units")

    def _load(self, block: Block, offset: int) -> Value:
        if offset not in block.bstore:
            raise UninitializedUnit(f"unit {offset} of addr({block.baddress}) does not exist")
        if self.strict_uninit and offset not in block.written:
            raise UninitializedUnit(f"unit {offset} of addr({block.baddress}) was never written")
        return block.bstore[offset]

    def _inflight_on(self, addr: int, kinds: tuple[str, ...]) -> tuple[tuple[str, int], ...]:
        return tuple(
            sorted({("na-" + t.kind, t.tid) for t in self.inflight if t.addr == addr and t.kind in kinds})
        )

    def _race(self, addr: int, offset: int | None, access: str, tid: int, kinds: tuple[str, ...]) -> None:
        conflicts = self._inflight_on(addr, kinds)
        if not conflicts:
            return
        report = RaceReport(addr, offset, access, tid, conflicts)
        self.races.append(report)
        if self.strict_races:
            raise DataRace(report)

    def _dec(self, addr: int, slot: int) -> None:
        st = self.status[addr]
        if st[slot] <= 0:
            raise AssertionError(f"status counter of addr({addr}) would become negative")
        st[slot] -= 1

    # -- allocation ----------------------------------------------------------

    def allocate_begin(self, size: int) -> int:
        """Consume ``blkNum`` as a fresh address; the block is being written."""
        if size < 0:
            raise OutOfBounds(f"cannot allocate a block of {size} units")
        addr = self.blk_num
        self.blk_num += 1
        self.status[addr] = [0, 1]
        self.blocks[addr] = Block(addr, size)
        return addr

    def create_unit(self, addr: int) -> None:
        block = self._block(addr)
        block.bstore[len(block.bstore)] = VInt(0)

    def allocate_finish(self, addr: int) -> VLoc:
        self._dec(addr, 1)
        return VLoc(addr, 0)

    def allocate(self, size: int) -> VLoc:
        addr = self.allocate_begin(size)
        for _ in range(size):
            self.create_unit(addr)
        return self.allocate_finish(addr)

    # -- non-atomic accesses -------------------------------------------------

    def read_na_begin(self, addr: int, offset: int, tid: int = 0) -> Ticket:
        block = self._block(addr)
        self._check_offset(block, offset)
        self._race(addr, offset, "na-read", tid, ("write",))
        self.status[addr][0] += 1
        ticket = Ticket(tid, "read", addr, offset)
        self.inflight[ticket] += 1
        return ticket

    def read_na_finish(self, ticket: Ticket) -> Value:
        block = self._block(ticket.addr)
        value = self._load(block, ticket.offset)
        self._retire(ticket, 0)
        return value

    def write_na_begin(self, addr: int, offset: int, value: Value, tid: int = 0) -> Ticket:
        block = self._block(addr)
        self._check_offset(block, offset)
        self._race(addr, offset, "na-write", tid, ("read", "write"))
        self.status[addr][1] += 1
        ticket = Ticket(tid, "write", addr, offset, value)
        self.inflight[ticket] += 1
        return ticket

    def write_na_finish(self, ticket: Ticket) -> None:
        block = self._block(ticket.addr)
        block.bstore[ticket.offset] = ticket.value
        block.written.add(ticket.offset)
        self._retire(ticket, 1)

    def _retire(self, ticket: Ticket, slot: int) -> None:
        if self.inflight[ticket] <= 0:
            raise AssertionError(f"finish without matching begin: {ticket}")
        self.inflight[ticket] -= 1
        if not self.inflight[ticket]:
            del self.inflight[ticket]
        self._dec(ticket.addr, slot)

    # -- atomic accesses -----------------------------------------------------

    def read_at(self, addr: int, offset: int, tid: int = 0) -> Value:
        block = self._block(addr)
        self._check_offset(block, offset)
        self._race(addr, offset, "at-read", tid, ("write",))
        return self._load(block, offset)

    def write_at(self, addr: int, offset: int, value: Value, tid: int = 0) -> None:
        block = self._block(addr)
        self._check_offset(block, offset)
        self._race(addr, offset, "at-write", tid, ("read", "write"))
        block.bstore[offset] = value
        block.written.add(offset)

    def cas(self, addr: int, offset: int, expected: Value, new: Value, tid: int = 0) -> VInt:
        block = self._block(addr)
        self._check_offset(block, offset)
        self._race(addr, offset, "cas", tid, ("read", "write"))
        if self._load(block, offset) == expected:
            block.bstore[offset] = new
            block.written.add(offset)
            return TRUE
        return FALSE

    def append(self, addr: int, value: Value, tid: int = 0) -> None:
        block = self._block(addr)
        self._race(addr, None, "append", tid, ("read", "write"))
        block.bstore[block.bnum] = value
        block.written.add(block.bnum)
        block.bnum += 1

    def free(self, addr: int, tid: int = 0) -> None:
        if addr not in self.blocks:
            if addr < self.blk_num:
                raise DoubleFree(f"addr({addr}) was already freed")
            raise UseAfterFree(f"addr({addr}) was never allocated")
        self._race(addr, None, "free", tid, ("read", "write"))
        del self.blocks[addr]
        del self.status[addr]

    # -- inspection ----------------------------------------------------------

    def is_quiescent(self) -> bool:
        return all(s == [0, 0] for s in self.status.values()) and not self.inflight

    def dump(self) -> str:
        lines: list[str] = []
        for addr in sorted(self.blocks):
            block = self.blocks[addr]
            lines.append(f"block addr({addr}) bnum {block.bnum}")
            for off in sorted(block.bstore):
                lines.append(f"  {off} |-> {block.bstore[off]}")
        return "\n".join(lines) + "\n" if lines else ""
