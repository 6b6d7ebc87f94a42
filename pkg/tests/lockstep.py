"""Shared harness: drive the pipelined core and the ISS in lockstep.

The pipeline runs cycle by cycle against functional instruction/data memory
images; every retired instruction (and every trap) is replayed on the ISS
and the architectural views are compared, including the cycle counter and
the data-port beat stream.
"""

from __future__ import annotations

import random
from dataclasses import replace

from capsec.caps import Capability, OTYPE_SENTRY, Perm
from capsec.core import CoreConfig, build_core, documented_enable_level
from capsec.isa import Instruction, Kind, decode, encode
from capsec.iss import CoreState, iss_step, reset_state
from capsec.system import compile_stepper

CAP_FIELDS = ("tag", "perms", "base", "top", "addr", "otype")


def put_cap(state: dict, prefix: str, c: Capability) -> None:
    for f in CAP_FIELDS:
        state[f"{prefix}_{f}"] = getattr(c, f)


def get_cap(state: dict, prefix: str) -> Capability:
    return Capability(**{f: state[f"{prefix}_{f}"] for f in CAP_FIELDS})


def random_start(cfg: CoreConfig, rng: random.Random) -> tuple[dict, CoreState]:
    """A live post-reset state: executable PCC, sentry trap target, random regs."""
    ts_state = {}
    half = 1 << (cfg.addr_width - 1)
    quarter = half >> 1
    pcc = Capability(tag=1, perms=int(Perm.X | Perm.R), base=0, top=half, addr=0)
    scr0 = Capability(tag=1, perms=int(Perm.X | Perm.R | Perm.SEAL_ENTRY),
                      base=half, top=half + quarter, addr=half, otype=OTYPE_SENTRY)
    iss = reset_state(cfg)
    iss.pcc, iss.scr0 = pcc, scr0
    for i in range(cfg.num_regs):
        iss.regs[i] = random_cap(cfg, rng)
    # a few guaranteed-usable data capabilities keep memory traffic flowing
    full = int(Perm.R | Perm.W | Perm.X | Perm.LOAD_CAP | Perm.STORE_CAP)
    space = 1 << cfg.addr_width
    span = max(space // 16, 4 * cfg.beat_bytes)
    for i in range(1, min(4, cfg.num_regs)):
        base = rng.randrange(space - span)
        iss.regs[i] = Capability(tag=1, perms=full, base=base,
                                 top=min(base + span, space), addr=base)
    ts = build_core(cfg)
    ts_state.update(ts.reset_values)
    put_cap(ts_state, "pcc", pcc)
    put_cap(ts_state, "scr0", scr0)
    for i in range(cfg.num_regs):
        put_cap(ts_state, f"reg{i}", iss.regs[i])
    return ts_state, iss


def random_cap(cfg: CoreConfig, rng: random.Random) -> Capability:
    space = 1 << cfg.addr_width
    if rng.random() < 0.3:
        return Capability(addr=rng.randrange(space))  # plain integer
    base = rng.randrange(space)
    top = min(base + rng.randrange(1, space // 2), space)
    addr = rng.randrange(max(base - 4, 0), min(top + 4, space - 1) + 1)
    # mostly permissive so that memory ops usually retire; faults stay common
    # enough to exercise the trap path
    full = int(Perm.R | Perm.W | Perm.X | Perm.LOAD_CAP | Perm.STORE_CAP)
    perms = full if rng.random() < 0.5 else rng.randrange(64)
    otype = rng.choice([0] * 6 + [OTYPE_SENTRY, 2])
    return Capability(tag=1, perms=perms, base=base, top=top, addr=addr, otype=otype)


SAFE_KINDS = (Kind.ALU, Kind.ALU, Kind.CINCADDR, Kind.CSETBOUNDS, Kind.CANDPERM, Kind.BRANCH)
MEM_KINDS = (Kind.LOAD, Kind.STORE, Kind.CLOADCAP, Kind.CSTORECAP)


def random_word(cfg: CoreConfig, rng: random.Random, safe: bool = False) -> int:
    if not safe and rng.random() < 0.08:
        return rng.randrange(1 << 32)
    kinds = SAFE_KINDS if safe else list(Kind) + list(MEM_KINDS)  # extra weight on memory ops
    kind = rng.choice(kinds)
    if kind in MEM_KINDS:
        # small offsets so effective addresses mostly stay inside the
        # authorizing capability's bounds
        imm = rng.randrange(32) if rng.random() < 0.9 else rng.randrange(1 << 16)
    elif safe:
        imm = rng.randrange(1 << 8)
    else:
        imm = rng.randrange(1 << 16)
    instr = Instruction(
        kind,
        rd=rng.randrange(cfg.num_regs),
        rs1=rng.randrange(cfg.num_regs),
        rs2=rng.randrange(cfg.num_regs),
        imm=imm,
    )
    return encode(instr)


class MemoryImage:
    """Functional memory: lazily generated, writes applied, tags per granule."""

    def __init__(self, cfg: CoreConfig, rng: random.Random):
        self.cfg = cfg
        self.rng = rng
        self.imem: dict[int, int] = {}
        self.dmem: dict[int, int] = {}
        self.tags: dict[int, int] = {}

    def fetch(self, addr: int) -> int:
        if addr not in self.imem:
            half = 1 << (self.cfg.addr_width - 1)
            if addr >= half:
                # trap-handler region: retiring instructions, periodic return
                if (addr - half) // 4 % 4 == 3:
                    self.imem[addr] = encode(Instruction(Kind.ECALL_RET))
                else:
                    self.imem[addr] = random_word(self.cfg, self.rng, safe=True)
            else:
                self.imem[addr] = random_word(self.cfg, self.rng)
        return self.imem[addr]

    def read(self, addr: int) -> int:
        if addr not in self.dmem:
            self.dmem[addr] = self.rng.randrange(1 << self.cfg.data_width)
        return self.dmem[addr]

    def read_tag(self, addr: int) -> int:
        return self.tags.get(self._granule(addr), 0)

    def write(self, addr: int, data: int, tag: int) -> None:
        self.dmem[addr] = data
        self.tags[self._granule(addr)] = tag

    def _granule(self, addr: int) -> int:
        return addr // (2 * self.cfg.beat_bytes)


class LockstepMismatch(AssertionError):
    pass


def run_lockstep(cfg: CoreConfig, seed: int = 0, cycles: int = 2000,
                 pin_enabled: bool = True, episode_len: int = 250) -> dict:
    """Run the pipeline and ISS side by side; raises on any divergence.

    The run restarts from a fresh random state every `episode_len` cycles:
    fault loops otherwise absorb the machine (a return from a fault trap
    re-executes the faulting instruction), and fresh episodes spread
    coverage over many start states and code images.
    """
    ts = build_core(cfg)
    step = compile_stepper(ts)
    rng = random.Random(seed)
    doc = documented_enable_level(cfg)
    pin = doc if pin_enabled else doc ^ 1
    prot = pin_enabled != cfg.bug_enable_pin_polarity
    stats = {"retired": 0, "traps": 0, "beats": 0}
    done = 0
    while done < cycles:
        n = min(episode_len, cycles - done)
        _episode(cfg, ts, step, rng, pin, prot, n, stats)
        done += n
    return stats


def _episode(cfg, ts, step, rng, pin, prot, cycles, stats):
    state, iss = random_start(cfg, rng)
    mem = MemoryImage(cfg, rng)
    rtl_beats: list[tuple] = []
    iss_beats: list[tuple] = []

    def expand(req):
        if req is None:
            return
        d = self_dmask
        beats = [(req.we, req.addr, (req.wdata or 0) & d, req.wtag)]
        if req.size == 2 * cfg.beat_bytes:
            beats.append((req.we, (req.addr + cfg.beat_bytes) & amask,
                          (req.wdata or 0) >> cfg.data_width, req.wtag))
        for we, a, wd, wt in beats:
            iss_beats.append((we, a, wd, wt) if we else (we, a))

    amask = (1 << cfg.addr_width) - 1
    self_dmask = (1 << cfg.data_width) - 1

    for cycle in range(cycles):
        inputs = {"rst": 0, "cheri_en": pin, "imem_rdata": 0, "dmem_rdata": 0, "dmem_rtag": 0}
        _, pre = step(state, inputs)
        if pre["ireq_valid"]:
            inputs["imem_rdata"] = mem.fetch(pre["ireq_addr"])
        dval = 0
        dtag = 0
        if pre["dreq_valid"] and not pre["dreq_we"]:
            dval = mem.read(pre["dreq_addr"])
            dtag = mem.read_tag(pre["dreq_addr"])
            inputs["dmem_rdata"] = dval
            inputs["dmem_rtag"] = dtag
        nxt, defs = step(state, inputs)

        if defs["dreq_valid"]:
            stats["beats"] += 1
            if defs["dreq_we"]:
                rtl_beats.append((True, defs["dreq_addr"], defs["dreq_wdata"], defs["dreq_wtag"]))
                mem.write(defs["dreq_addr"], defs["dreq_wdata"], defs["dreq_wtag"])
            else:
                rtl_beats.append((False, defs["dreq_addr"]))

        had_event = False
        fetchish = defs["trap_commit"] and (defs["fetch_fault"] or state["flush_pend"])
        if defs["retire"] or (defs["trap_commit"] and not fetchish):
            had_event = True
            word = state["if_instr"]
            instr = decode(word, cfg.num_regs)
            mrd = None
            if instr is not None:
                if instr.kind == Kind.LOAD:
                    mrd = dval
                elif instr.kind == Kind.CLOADCAP:
                    mrd = (state["ld_lo"], dval, dtag)
            iss, req, exc = iss_step(iss, instr, mrd, cfg=cfg, prot_enabled=prot)
            expand(req)
            stats["retired" if exc is None else "traps"] += 1
        if fetchish:
            had_event = True
            iss, req, exc = iss_step(iss, None, cfg=cfg, prot_enabled=prot)
            if exc != "fetch-bounds":
                raise LockstepMismatch(f"cycle {cycle}: RTL fetch trap but ISS said {exc}")
            stats["traps"] += 1

        state = nxt
        _compare(cfg, cycle, state, iss, check_cyc=had_event)
        # two-beat operations post their first beat one cycle before the
        # retire event creates both ISS beats, so compare prefixes
        n = min(len(rtl_beats), len(iss_beats))
        if rtl_beats[:n] != iss_beats[:n] or abs(len(rtl_beats) - len(iss_beats)) > 1:
            raise LockstepMismatch(
                f"cycle {cycle}: beat streams diverge\n rtl={rtl_beats[-4:]}\n iss={iss_beats[-4:]}"
            )
    n = min(len(rtl_beats), len(iss_beats))
    if rtl_beats[:n] != iss_beats[:n]:
        raise LockstepMismatch("beat streams diverge at end of episode")


def _compare(cfg: CoreConfig, cycle: int, state: dict, iss: CoreState, check_cyc: bool = True) -> None:
    def fail(what, got, want):
        raise LockstepMismatch(f"cycle {cycle}: {what}: rtl={got} iss={want}")

    for i in range(cfg.num_regs):
        got = get_cap(state, f"reg{i}")
        if state["wb_valid"] and state["wb_dest"] == i:
            got = get_cap(state, "wb")  # write lands next cycle; forwarded view
        if got != iss.regs[i]:
            fail(f"reg{i}", got, iss.regs[i])
    rtl_pcc = get_cap(state, "pcc")
    arch_pc = state["if_pc"] if state["if_valid"] else state["pcc_addr"]
    if replace(rtl_pcc, addr=arch_pc) != iss.pcc:
        fail("pcc", replace(rtl_pcc, addr=arch_pc), iss.pcc)
    for name in ("scr0", "scr1"):
        if get_cap(state, name) != getattr(iss, name):
            fail(name, get_cap(state, name), getattr(iss, name))
    if state["exc_flag"] != iss.exc_flag:
        fail("exc_flag", state["exc_flag"], iss.exc_flag)
    if check_cyc and state["cyc"] != iss.cyc:
        fail("cyc", state["cyc"], iss.cyc)
