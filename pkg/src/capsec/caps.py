"""Capability semantics: tagged bounded pointers and their derivation rules.

Capabilities are uncompressed: every field is stored verbatim.  `top` is an
exclusive upper bound one bit wider than an address, so a capability can
cover the whole address space.  Bounds arithmetic never wraps; comparisons
happen over exact integers, which matches (addr_width+1)-bit hardware.
Integer values live in the cursor (`addr`) of an untagged capability.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntFlag

__all__ = [
    "Perm",
    "PERM_WIDTH",
    "OTYPE_UNSEALED",
    "OTYPE_SENTRY",
    "Capability",
    "null_cap",
    "int_cap",
    "check_access",
    "derive_set_bounds",
    "derive_and_perm",
    "derive_inc_addr",
    "unseal_if_sentry",
    "pack_cap",
    "unpack_cap",
]


class Perm(IntFlag):
    R = 1
    W = 2
    X = 4
    LOAD_CAP = 8
    STORE_CAP = 16
    SEAL_ENTRY = 32


PERM_WIDTH = 6
PERM_MASK = (1 << PERM_WIDTH) - 1

OTYPE_UNSEALED = 0
OTYPE_SENTRY = 1  # sealed entry: usable only as a jump target


@dataclass(frozen=True)
class Capability:
    tag: int = 0
    perms: int = 0
    base: int = 0
    top: int = 0  # exclusive; one bit wider than an address
    addr: int = 0
    otype: int = 0

    @property
    def sealed(self) -> bool:
        return self.otype != OTYPE_UNSEALED

    def covers(self, addr: int, size: int = 1) -> bool:
        return self.base <= addr and addr + size <= self.top


def null_cap() -> Capability:
    return Capability()


def int_cap(value: int, addr_width: int) -> Capability:
    """An integer value carried in an untagged capability register."""
    return Capability(addr=value & ((1 << addr_width) - 1))


def check_access(c: Capability, addr: int, size: int, need: int) -> bool:
    """Memory access legality: valid, unsealed, permitted, and in bounds.

    Total function; bounds are compared without wraparound (the `addr+size`
    sum is exact, as in (addr_width+1)-bit hardware).
    """
    if not c.tag or c.sealed:
        return False
    if need & ~c.perms:
        return False
    return c.base <= addr and addr + size <= c.top


def derive_set_bounds(c: Capability, new_base: int, new_top: int) -> Capability:
    """Restrict bounds; any attempt to expand clears the tag.

    The cursor is clamped into [new_base, new_top]; all other fields are
    copied.  Sealed sources yield an untagged result.
    """
    ok = (
        c.tag == 1
        and not c.sealed
        and new_base >= c.base
        and new_top <= c.top
        and new_base <= new_top
    )
    addr = min(max(c.addr, new_base), new_top)
    return replace(c, tag=1 if ok else 0, base=new_base, top=new_top, addr=addr)


def derive_and_perm(c: Capability, mask: int) -> Capability:
    """Intersect permissions; never grants, and sealed sources lose the tag."""
    ok = c.tag == 1 and not c.sealed
    return replace(c, tag=1 if ok else 0, perms=c.perms & mask & PERM_MASK)


def derive_inc_addr(c: Capability, delta: int, addr_width: int) -> Capability:
    """Move the cursor (wrapping); bounds keep, sealed sources lose the tag."""
    ok = c.tag == 1 and not c.sealed
    return replace(c, tag=1 if ok else 0, addr=(c.addr + delta) & ((1 << addr_width) - 1))


def unseal_if_sentry(c: Capability) -> Capability:
    """Entry capabilities unseal when installed as the program counter."""
    if c.otype == OTYPE_SENTRY:
        return replace(c, otype=OTYPE_UNSEALED)
    return c


def pack_cap(c: Capability, addr_width: int, otype_width: int) -> tuple[int, int]:
    """In-memory layout: two words, the tag travels on the port tag bit.

    low word:  addr | base << addr_width
    high word: top | perms << (addr_width+1) | otype << (addr_width+1+PERM_WIDTH)
    """
    amask = (1 << addr_width) - 1
    lo = (c.addr & amask) | ((c.base & amask) << addr_width)
    hi = (
        (c.top & ((1 << (addr_width + 1)) - 1))
        | ((c.perms & PERM_MASK) << (addr_width + 1))
        | ((c.otype & ((1 << otype_width) - 1)) << (addr_width + 1 + PERM_WIDTH))
    )
    return lo, hi


def unpack_cap(lo: int, hi: int, tag: int, addr_width: int, otype_width: int) -> Capability:
    amask = (1 << addr_width) - 1
    return Capability(
        tag=1 if tag else 0,
        perms=(hi >> (addr_width + 1)) & PERM_MASK,
        base=(lo >> addr_width) & amask,
        top=hi & ((1 << (addr_width + 1)) - 1),
        addr=lo & amask,
        otype=(hi >> (addr_width + 1 + PERM_WIDTH)) & ((1 << otype_width) - 1),
    )
