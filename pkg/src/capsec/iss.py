"""Instruction-set simulator: the architectural ground truth for the core.

`iss_step` executes one instruction atomically with full capability checks
and documented timing.  The cycle counter advances by the per-kind latency
listed below while the core is in task mode (exception flag clear) and
freezes inside the trap handler:

    occupancy 1: ALU, LOAD, STORE, CSETBOUNDS, CANDPERM, CINCADDR, CJALR,
                 BRANCH, ECALL_RET, and any excepting instruction
    occupancy 2: CLOADCAP, CSTORECAP
    occupancy 0: a fetch-bounds trap (no instruction enters execute)

plus one refill cycle after any control-flow redirect (taken branch, jump,
trap entry/return) and after reset.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .caps import (
    Capability,
    OTYPE_SENTRY,
    PERM_MASK,
    Perm,
    check_access,
    derive_and_perm,
    derive_inc_addr,
    derive_set_bounds,
    null_cap,
    int_cap,
    pack_cap,
    unpack_cap,
    unseal_if_sentry,
)
from .core import CoreConfig
from .isa import AluOp, Instruction, Kind, MalformedInstruction, sign16

__all__ = ["CoreState", "MemRequest", "iss_step", "reset_state",
           "EXC_FETCH", "EXC_ILLEGAL", "EXC_LOAD", "EXC_STORE", "EXC_JUMP", "EXC_ECALL"]

EXC_FETCH = "fetch-bounds"
EXC_ILLEGAL = "illegal-instruction"
EXC_LOAD = "load-bounds"
EXC_STORE = "store-bounds"
EXC_JUMP = "jump-target"
EXC_ECALL = "ecall"


@dataclass
class MemRequest:
    we: bool
    addr: int
    size: int  # bytes; one or two beats
    wdata: int | None = None  # packed little-endian across beats
    wtag: int = 0


@dataclass
class CoreState:
    regs: list[Capability]
    pcc: Capability
    scr0: Capability  # context-switch / trap target
    scr1: Capability  # trap save
    cyc: int = 0
    exc_flag: int = 0
    refill: int = 1  # pipeline refill owed after a redirect/reset (timing model)

    def copy(self) -> "CoreState":
        return CoreState(list(self.regs), self.pcc, self.scr0, self.scr1,
                         self.cyc, self.exc_flag, self.refill)


def reset_state(cfg: CoreConfig) -> CoreState:
    base, top = cfg.reset_pcc_bounds
    pcc = Capability(tag=1, perms=int(Perm.X | Perm.R), base=base, top=top, addr=base)
    return CoreState([null_cap()] * cfg.num_regs, pcc, null_cap(), null_cap())


def iss_step(
    s: CoreState,
    instr: Instruction | None,
    mem_read_data=None,
    *,
    cfg: CoreConfig,
    prot_enabled: bool = True,
) -> tuple[CoreState, MemRequest | None, str | None]:
    """Execute one instruction (or take the pending fetch trap).

    `instr` is the instruction at the current program counter; pass None
    for an illegal encoding.  `mem_read_data` supplies the value a load
    returns: an int for LOAD, a (lo, hi, tag) triple for CLOADCAP.
    """
    A = cfg.addr_width
    amask = (1 << A) - 1
    dmask = (1 << cfg.data_width) - 1
    ns = s.copy()
    bonus = 1 if s.refill else 0

    def finish(occ: int, redirect: bool, req: MemRequest | None, exc: str | None):
        if s.exc_flag == 0:
            ns.cyc = (ns.cyc + occ + bonus) & dmask
        ns.refill = 1 if redirect else 0
        return ns, req, exc

    def trap(cause: str, save_pc: int):
        ns.scr1 = replace(s.pcc, addr=save_pc & amask)
        ns.pcc = unseal_if_sentry(s.scr0)
        ns.exc_flag = 1
        return cause

    def ok(c, addr, size, need) -> bool:
        return (not prot_enabled) or check_access(c, addr, size, need)

    # fetch legality is checked before the instruction can execute; a fetch
    # trap saves the faulting address itself, while execute-stage traps save
    # the following address (skip-and-continue handler convention)
    pc = s.pcc.addr
    if not ok(s.pcc, pc, 4, int(Perm.X)):
        return finish(0, True, None, trap(EXC_FETCH, pc))

    if instr is None:
        return finish(1, True, None, trap(EXC_ILLEGAL, pc + 4))
    instr.validate(cfg.num_regs)

    rs1 = s.regs[instr.rs1]
    rs2 = s.regs[instr.rs2]
    imm = instr.imm & 0xFFFF
    ea = (rs1.addr + imm) & amask
    ea2 = (ea + cfg.beat_bytes) & amask
    kind = instr.kind

    def write_rd(cap: Capability):
        ns.regs[instr.rd] = cap

    def advance():
        ns.pcc = replace(s.pcc, addr=(pc + 4) & amask)

    if kind == Kind.ALU:
        op = AluOp(imm & 7) if (imm & 7) <= int(AluOp.LI) else None
        a, b = rs1.addr, rs2.addr
        vals = {
            AluOp.ADD: a + b,
            AluOp.SUB: a - b,
            AluOp.AND: a & b,
            AluOp.OR: a | b,
            AluOp.XOR: a ^ b,
            AluOp.LI: imm,
        }
        # unknown funct values fall back to ADD, as in the pipeline's mux
        val = vals.get(op, a + b)
        write_rd(int_cap(val, A))
        advance()
        return finish(1, False, None, None)

    if kind == Kind.LOAD:
        if not ok(rs1, ea, cfg.beat_bytes, int(Perm.R)):
            return finish(1, True, None, trap(EXC_LOAD, pc + 4))
        write_rd(int_cap((mem_read_data or 0) & amask, A))
        advance()
        return finish(1, False, MemRequest(False, ea, cfg.beat_bytes), None)

    if kind == Kind.STORE:
        if not ok(rs1, ea, cfg.beat_bytes, int(Perm.W)):
            return finish(1, True, None, trap(EXC_STORE, pc + 4))
        advance()
        req = MemRequest(True, ea, cfg.beat_bytes, rs2.addr & dmask, 0)
        return finish(1, False, req, None)

    if kind == Kind.CLOADCAP:
        if not ok(rs1, ea, 2 * cfg.beat_bytes, int(Perm.R | Perm.LOAD_CAP)):
            return finish(1, True, None, trap(EXC_LOAD, pc + 4))
        lo, hi, tag = mem_read_data if mem_read_data else (0, 0, 0)
        write_rd(unpack_cap(lo, hi, tag, A, cfg.otype_width))
        advance()
        return finish(2, False, MemRequest(False, ea, 2 * cfg.beat_bytes), None)

    if kind == Kind.CSTORECAP:
        if not ok(rs1, ea, 2 * cfg.beat_bytes, int(Perm.W | Perm.STORE_CAP)):
            return finish(1, True, None, trap(EXC_STORE, pc + 4))
        lo, hi = pack_cap(rs2, A, cfg.otype_width)
        advance()
        req = MemRequest(True, ea, 2 * cfg.beat_bytes, lo | (hi << cfg.data_width), rs2.tag)
        return finish(2, False, req, None)

    if kind == Kind.CSETBOUNDS:
        write_rd(derive_set_bounds(rs1, rs1.addr, rs1.addr + rs2.addr))
        advance()
        return finish(1, False, None, None)

    if kind == Kind.CANDPERM:
        write_rd(derive_and_perm(rs1, rs2.addr & PERM_MASK))
        advance()
        return finish(1, False, None, None)

    if kind == Kind.CINCADDR:
        write_rd(derive_inc_addr(rs1, imm, A))
        advance()
        return finish(1, False, None, None)

    if kind == Kind.CJALR:
        sentry = rs1.tag and rs1.otype == OTYPE_SENTRY and rs1.perms & Perm.SEAL_ENTRY
        plain = rs1.tag and rs1.otype == 0 and rs1.perms & Perm.X
        if prot_enabled and not (sentry or plain):
            return finish(1, True, None, trap(EXC_JUMP, pc + 4))
        write_rd(replace(s.pcc, addr=(pc + 4) & amask))
        ns.pcc = unseal_if_sentry(rs1)
        return finish(1, True, None, None)

    if kind == Kind.BRANCH:
        taken = (rs1.addr == rs2.addr) == (imm & 1 == 0)
        if taken:
            ns.pcc = replace(s.pcc, addr=(pc + (sign16(imm) & ~1)) & amask)
            return finish(1, True, None, None)
        advance()
        return finish(1, False, None, None)

    if kind == Kind.ECALL_RET:
        if s.exc_flag:
            ns.pcc = unseal_if_sentry(s.scr1)
            ns.exc_flag = 0
            return finish(1, True, None, None)
        return finish(1, True, None, trap(EXC_ECALL, pc + 4))

    raise MalformedInstruction(f"unhandled kind {kind}")  # pragma: no cover
