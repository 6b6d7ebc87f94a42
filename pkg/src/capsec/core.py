"""The reference capability core: a 3-stage pipeline as a transition system.

Stages: fetch (IF) -> decode/execute (EX) -> writeback (WB).  Capability
loads and stores occupy EX for two beats of data_width/8 bytes each; the
fix for out-of-bounds second beats checks the full range up front and
re-verifies the second address at issue time.  Memory is implicit: read
data arrives on per-cycle inputs, writes are only observable on the port
defines.

Bug toggles (each reproduces one case-study failure mode):

* bug_enable_pin_polarity - the global protection-enable pin acts with the
  opposite polarity of its documented (configured) sense.
* bug_capstore_second_beat - capability loads/stores check only the first
  beat's address; the second beat issues unchecked.
* bug_fetch_before_pcc_check - the fetch request goes out before the PCC
  bounds check resolves, and if both designated bits [1:0] of the returned
  word are set the pipeline flush is delayed one cycle, perturbing the
  task cycle counter.

The architectural cycle counter counts cycles while the core is in task
mode (exception flag clear); it freezes inside the trap handler.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from . import ir
from .caps import OTYPE_SENTRY, PERM_WIDTH, Perm
from .ir import BOOL, Term, bv, const
from .system import CapGroup, PortGroup, StateVar, TransitionSystem

__all__ = ["CoreConfig", "CapSig", "build_core", "CAP_LOCATION_KINDS"]

CAP_LOCATION_KINDS = ("register", "pipeline-buffer")  # refinement catalogue kinds


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CoreConfig:
    addr_width: int = 16
    data_width: int = 32
    num_regs: int = 8
    otype_width: int = 4
    cheri_enable_active_low: bool = True  # documented sense of the enable pin
    bug_enable_pin_polarity: bool = False
    bug_capstore_second_beat: bool = False
    bug_fetch_before_pcc_check: bool = False
    # oracle-scale escape hatch: relaxes the address-width floor so the
    # explicit-state twin stays enumerable
    micro: bool = False

    @property
    def beat_bytes(self) -> int:
        return self.data_width // 8

    @property
    def reset_pcc_bounds(self) -> tuple[int, int]:
        # boot/task image lives in the lower half of the address space
        return 0, 1 << (self.addr_width - 1)

    def validate(self, micro: bool | None = None) -> None:
        micro = self.micro if micro is None else micro
        min_addr = 4 if micro else 8
        if self.addr_width < min_addr:
            raise ConfigError(f"addr_width must be >= {min_addr}")
        if not 2 <= self.num_regs <= 8:
            raise ConfigError("num_regs must be in 2..8")
        if self.data_width % 8 or self.data_width < 8:
            raise ConfigError("data_width must be a positive multiple of 8")
        if 2 * self.addr_width > self.data_width:
            raise ConfigError("capability address+base must fit one data word")
        if (self.addr_width + 1) + PERM_WIDTH + self.otype_width > self.data_width:
            raise ConfigError("capability top+perms+otype must fit one data word")

    @classmethod
    def make_micro(cls, **overrides) -> "CoreConfig":
        """Oracle-scale parameters: 4-bit addresses, 8 two-byte words, 2 regs."""
        kw = dict(addr_width=4, data_width=16, num_regs=2, micro=True)
        kw.update(overrides)
        cfg = cls(**kw)
        cfg.validate()
        return cfg


@dataclass
class CapSig:
    """A capability as a bundle of terms (one per field)."""

    tag: Term
    perms: Term
    base: Term
    top: Term
    addr: Term
    otype: Term

    def fields(self) -> dict[str, Term]:
        return {"tag": self.tag, "perms": self.perms, "base": self.base,
                "top": self.top, "addr": self.addr, "otype": self.otype}

    def mux(self, cond: Term, other: "CapSig") -> "CapSig":
        return CapSig(**{f: ir.ite(cond, v, other.fields()[f]) for f, v in self.fields().items()})


def _cap_sorts(cfg: CoreConfig) -> dict[str, ir.Sort]:
    return {
        "tag": BOOL,
        "perms": bv(PERM_WIDTH),
        "base": bv(cfg.addr_width),
        "top": bv(cfg.addr_width + 1),
        "addr": bv(cfg.addr_width),
        "otype": bv(cfg.otype_width),
    }


def build_core(cfg: CoreConfig) -> TransitionSystem:
    cfg.validate()
    A, D, OT = cfg.addr_width, cfg.data_width, cfg.otype_width
    BEAT = cfg.beat_bytes
    aw, a1w, dw = bv(A), bv(A + 1), bv(D)
    csorts = _cap_sorts(cfg)

    ts = TransitionSystem(name="cheri_core")
    nxt: dict[str, Term] = {}

    def inp(name: str, sort) -> Term:
        t = ir.var(name, sort, "input")
        ts.inputs[name] = t
        return t

    def st(name: str, sort, reset: int) -> Term:
        t = ir.var(name, sort, "state")
        ts.state_vars[name] = StateVar(name, sort, t)  # next patched at the end
        ts.reset_values[name] = reset
        return t

    def cap_state(prefix: str, kind: str, reset: dict[str, int] | None = None) -> CapSig:
        reset = reset or {}
        sig = CapSig(**{f: st(f"{prefix}_{f}", s, reset.get(f, 0)) for f, s in csorts.items()})
        ts.cap_groups[prefix] = CapGroup(prefix, kind, {f: f"{prefix}_{f}" for f in csorts})
        return sig

    # ---- inputs ----------------------------------------------------------
    rst = inp("rst", BOOL)
    cheri_en = inp("cheri_en", BOOL)
    imem_rdata = inp("imem_rdata", bv(32))
    dmem_rdata = inp("dmem_rdata", dw)
    dmem_rtag = inp("dmem_rtag", BOOL)

    # ---- architectural state ---------------------------------------------
    rb, rt = cfg.reset_pcc_bounds
    regs = [cap_state(f"reg{i}", "register") for i in range(cfg.num_regs)]
    pcc = cap_state("pcc", "register",
                    reset={"tag": 1, "perms": int(Perm.X | Perm.R), "base": rb, "top": rt, "addr": rb})
    scr0 = cap_state("scr0", "register")  # context-switch / trap target
    scr1 = cap_state("scr1", "register")  # trap save
    cyc = st("cyc", dw, 0)
    exc_flag = st("exc_flag", BOOL, 0)

    # ---- microarchitectural state ------------------------------------------
    if_valid = st("if_valid", BOOL, 0)
    if_instr = st("if_instr", bv(32), 0)
    if_pc = st("if_pc", aw, 0)
    ex_beat = st("ex_beat", BOOL, 0)
    ld_lo = st("ld_lo", dw, 0)
    wb_valid = st("wb_valid", BOOL, 0)
    wb_dest = st("wb_dest", bv(3), 0)
    wb = cap_state("wb", "pipeline-buffer")
    flush_pend = st("flush_pend", BOOL, 0)

    # ---- protection enable ------------------------------------------------
    # Documented sense comes from the config; the polarity bug makes the RTL
    # interpret the pin the other way around.
    rtl_active_low = cfg.cheri_enable_active_low != cfg.bug_enable_pin_polarity
    prot_on = ir.not_(cheri_en) if rtl_active_low else cheri_en
    prot_off = ir.not_(prot_on)

    # ---- register read with WB forwarding ---------------------------------
    def regread(idx: Term) -> CapSig:
        out = {}
        for f, sort in csorts.items():
            acc = regs[0].fields()[f]
            for i in range(1, cfg.num_regs):
                acc = ir.ite(ir.eq(idx, const(i, bv(3))), regs[i].fields()[f], acc)
            fwd = ir.and_(wb_valid, ir.eq(idx, wb_dest))
            out[f] = ir.ite(fwd, wb.fields()[f], acc)
        return CapSig(**out)

    # ---- decode ------------------------------------------------------------
    from .isa import Kind

    enc_ok = ir.eq(ir.extract(if_instr, 1, 0), const(3, bv(2)))
    kindf = ir.extract(if_instr, 6, 2)
    k = {kd: ir.eq(kindf, const(int(kd), bv(5))) for kd in Kind}
    kind_valid = ir.disj(k.values())
    rd_i = ir.extract(if_instr, 9, 7)
    rs1_i = ir.extract(if_instr, 12, 10)
    rs2_i = ir.extract(if_instr, 15, 13)
    reg_ok = ir.btrue()
    if cfg.num_regs < 8:
        lim = const(cfg.num_regs, bv(3))
        reg_ok = ir.conj(ir.ult(i, lim) for i in (rd_i, rs1_i, rs2_i))
    imm = ir.extract(if_instr, 31, 16)
    imm_a = ir.extract(imm, A - 1, 0) if A <= 16 else ir.sext(imm, A)
    alu_funct = ir.extract(imm, 2, 0)

    rs1 = regread(rs1_i)
    rs2 = regread(rs2_i)

    # ---- access checks ------------------------------------------------------
    def has_perm(c: CapSig, need: int) -> Term:
        nc = const(need, bv(PERM_WIDTH))
        return ir.eq(ir.and_(c.perms, nc), nc)

    def chk(c: CapSig, ea: Term, size: int, need: int) -> Term:
        raw = ir.conj([
            c.tag,
            ir.eq(c.otype, const(0, bv(OT))),
            has_perm(c, need),
            ir.ule(c.base, ea),
            ir.ule(ir.add(ir.zext(ea, A + 1), const(size, a1w)), c.top),
        ])
        return ir.or_(prot_off, raw)

    ea = ir.add(rs1.addr, imm_a)
    ea1 = ir.add(ea, const(BEAT, aw))
    load_ok = chk(rs1, ea, BEAT, int(Perm.R))
    store_ok = chk(rs1, ea, BEAT, int(Perm.W))
    need_ld = int(Perm.R | Perm.LOAD_CAP)
    need_st = int(Perm.W | Perm.STORE_CAP)
    if cfg.bug_capstore_second_beat:
        cap0_ok_ld = chk(rs1, ea, BEAT, need_ld)
        cap0_ok_st = chk(rs1, ea, BEAT, need_st)
        cap1_gate_ld = ir.btrue()
        cap1_gate_st = ir.btrue()
    else:
        cap0_ok_ld = chk(rs1, ea, 2 * BEAT, need_ld)
        cap0_ok_st = chk(rs1, ea, 2 * BEAT, need_st)
        cap1_gate_ld = chk(rs1, ea1, BEAT, need_ld)
        cap1_gate_st = chk(rs1, ea1, BEAT, need_st)

    sentry_c = const(OTYPE_SENTRY, bv(OT))
    zero_ot = const(0, bv(OT))

    def sentry_ok(c: CapSig) -> Term:
        return ir.conj([c.tag, ir.eq(c.otype, sentry_c), has_perm(c, int(Perm.SEAL_ENTRY))])

    cjalr_sentry = sentry_ok(rs1)
    cjalr_plain = ir.conj([rs1.tag, ir.eq(rs1.otype, zero_ot), has_perm(rs1, int(Perm.X))])
    cjalr_ok = ir.or_(prot_off, ir.or_(cjalr_sentry, cjalr_plain))

    # ---- execute ----------------------------------------------------------
    beat0 = ir.and_(if_valid, ir.not_(ex_beat))
    beat1 = ir.and_(if_valid, ex_beat)
    is_capmem = ir.or_(k[Kind.CLOADCAP], k[Kind.CSTORECAP])
    illegal = ir.disj([ir.not_(enc_ok), ir.not_(kind_valid), ir.not_(reg_ok)])

    ex_fault = ir.and_(beat0, ir.disj([
        illegal,
        ir.and_(k[Kind.LOAD], ir.not_(load_ok)),
        ir.and_(k[Kind.STORE], ir.not_(store_ok)),
        ir.and_(k[Kind.CLOADCAP], ir.not_(cap0_ok_ld)),
        ir.and_(k[Kind.CSTORECAP], ir.not_(cap0_ok_st)),
        ir.and_(k[Kind.CJALR], ir.not_(cjalr_ok)),
    ]))
    legal0 = ir.and_(beat0, ir.not_(ex_fault))
    ecall_enter = ir.conj([legal0, k[Kind.ECALL_RET], ir.not_(exc_flag)])
    eret = ir.conj([legal0, k[Kind.ECALL_RET], exc_flag])

    branch_ne = ir.eq(ir.extract(imm, 0, 0), const(1, bv(1)))
    branch_off = ir.concat(ir.extract(imm_a, A - 1, 1), const(0, bv(1)))
    branch_taken = ir.and_(k[Kind.BRANCH], ir.xor_(ir.eq(rs1.addr, rs2.addr), branch_ne))

    retire = ir.or_(ir.and_(legal0, ir.and_(ir.not_(is_capmem), ir.not_(ecall_enter))), beat1)
    ex_redirect = ir.and_(legal0, ir.disj([branch_taken, k[Kind.CJALR], eret]))
    redirect_any = ir.disj([ex_redirect, ex_fault, ecall_enter])

    # ---- fetch -------------------------------------------------------------
    ex_busy_next = ir.and_(legal0, is_capmem)
    accept = ir.or_(ir.not_(if_valid), retire)
    do_fetch = ir.conj([ir.not_(redirect_any), ir.not_(flush_pend), accept, ir.not_(ex_busy_next), ir.not_(rst)])
    fetch_ok = chk(pcc, pcc.addr, 4, int(Perm.X))
    fetch_fault = ir.and_(do_fetch, ir.not_(fetch_ok))
    if cfg.bug_fetch_before_pcc_check:
        ireq_valid = do_fetch
        delay_bits = ir.eq(ir.extract(imem_rdata, 1, 0), const(3, bv(2)))
        fetch_trap_now = ir.and_(fetch_fault, ir.not_(delay_bits))
        set_flush_pend = ir.and_(fetch_fault, delay_bits)
    else:
        ireq_valid = ir.and_(do_fetch, fetch_ok)
        fetch_trap_now = fetch_fault
        set_flush_pend = ir.bfalse()
    fetch_success = ir.and_(do_fetch, fetch_ok)
    trap_commit = ir.disj([ex_fault, ecall_enter, fetch_trap_now, flush_pend])

    # ---- derived capability results ----------------------------------------
    def int_result(val: Term) -> CapSig:
        return CapSig(ir.bfalse(), const(0, bv(PERM_WIDTH)), const(0, aw),
                      const(0, a1w), val, zero_ot)

    unsealed = ir.eq(rs1.otype, zero_ot)
    derivable = ir.and_(rs1.tag, unsealed)

    # CSETBOUNDS: base := cursor, top := cursor + rs2.addr
    nb = rs1.addr
    nt = ir.add(ir.zext(nb, A + 1), ir.zext(rs2.addr, A + 1))
    setb_ok = ir.conj([derivable, ir.ule(rs1.base, nb), ir.ule(nt, rs1.top)])
    setbounds_res = CapSig(setb_ok, rs1.perms, nb, nt, nb, rs1.otype)

    mask6 = ir.extract(rs2.addr, 5, 0) if A >= 6 else ir.zext(rs2.addr, 6)
    andperm_res = CapSig(derivable, ir.and_(rs1.perms, mask6), rs1.base, rs1.top, rs1.addr, rs1.otype)
    incaddr_res = CapSig(derivable, rs1.perms, rs1.base, rs1.top, ea, rs1.otype)

    avals = [
        ir.add(rs1.addr, rs2.addr),
        ir.sub(rs1.addr, rs2.addr),
        ir.and_(rs1.addr, rs2.addr),
        ir.or_(rs1.addr, rs2.addr),
        ir.xor_(rs1.addr, rs2.addr),
        imm_a,  # LI
    ]
    alu_val = avals[0]
    for fi in range(1, len(avals)):
        alu_val = ir.ite(ir.eq(alu_funct, const(fi, bv(3))), avals[fi], alu_val)
    alu_res = int_result(alu_val)
    load_res = int_result(ir.extract(dmem_rdata, A - 1, 0))
    link_res = CapSig(pcc.tag, pcc.perms, pcc.base, pcc.top,
                      ir.add(if_pc, const(4, aw)), pcc.otype)

    # capability load assembly (beat 1): low word was latched, high word and
    # tag arrive this cycle
    cl_tag = ir.and_(dmem_rtag, cap1_gate_ld)
    cload_res = CapSig(
        cl_tag,
        ir.extract(dmem_rdata, A + PERM_WIDTH, A + 1),
        ir.extract(ld_lo, 2 * A - 1, A),
        ir.extract(dmem_rdata, A, 0),
        ir.extract(ld_lo, A - 1, 0),
        ir.extract(dmem_rdata, A + PERM_WIDTH + OT, A + PERM_WIDTH + 1),
    )

    result = alu_res
    result = setbounds_res.mux(k[Kind.CSETBOUNDS], result)
    result = andperm_res.mux(k[Kind.CANDPERM], result)
    result = incaddr_res.mux(k[Kind.CINCADDR], result)
    result = load_res.mux(k[Kind.LOAD], result)
    result = link_res.mux(k[Kind.CJALR], result)
    result = cload_res.mux(k[Kind.CLOADCAP], result)

    # retire already excludes faulting instructions; a co-incident fetch trap
    # must not cancel the writeback of an instruction that completed
    writes_rd = ir.disj([k[kd] for kd in
                         (Kind.ALU, Kind.LOAD, Kind.CLOADCAP, Kind.CSETBOUNDS,
                          Kind.CANDPERM, Kind.CINCADDR, Kind.CJALR)])
    wb_fill = ir.and_(retire, writes_rd)

    # ---- data port ---------------------------------------------------------
    def pack_lo(c: CapSig) -> Term:
        return ir.zext(ir.concat(c.base, c.addr), D)

    def pack_hi(c: CapSig) -> Term:
        return ir.zext(ir.concat(c.otype, ir.concat(c.perms, c.top)), D)

    dreq_valid = ir.disj([
        ir.and_(beat0, ir.disj([
            ir.and_(ir.not_(illegal), ir.and_(k[Kind.LOAD], load_ok)),
            ir.and_(ir.not_(illegal), ir.and_(k[Kind.STORE], store_ok)),
            ir.and_(ir.not_(illegal), ir.and_(k[Kind.CLOADCAP], cap0_ok_ld)),
            ir.and_(ir.not_(illegal), ir.and_(k[Kind.CSTORECAP], cap0_ok_st)),
        ])),
        ir.and_(beat1, ir.ite(k[Kind.CLOADCAP], cap1_gate_ld, cap1_gate_st)),
    ])
    dreq_we = ir.or_(ir.and_(beat0, k[Kind.STORE]), k[Kind.CSTORECAP])
    dreq_addr = ir.ite(ex_beat, ea1, ea)
    dreq_wdata = ir.ite(k[Kind.STORE], ir.zext(rs2.addr, D),
                        ir.ite(ex_beat, pack_hi(rs2), pack_lo(rs2)))
    dreq_wtag = ir.and_(k[Kind.CSTORECAP], rs2.tag)

    # ---- next state ---------------------------------------------------------
    def unseal(c: CapSig) -> CapSig:
        return CapSig(c.tag, c.perms, c.base, c.top, c.addr,
                      ir.ite(ir.eq(c.otype, sentry_c), zero_ot, c.otype))

    # regfile: WB write port (independent of traps; WB holds an older,
    # already-retired instruction)
    for i, r in enumerate(regs):
        wr = ir.and_(wb_valid, ir.eq(wb_dest, const(i, bv(3))))
        for f, t in r.fields().items():
            nxt[f"reg{i}_{f}"] = ir.ite(wr, wb.fields()[f], t)

    # execute-stage traps save the following address (the handler convention
    # is skip-and-continue); fetch-bounds traps save the faulting address
    trap_pc = ir.ite(ir.or_(ex_fault, ecall_enter), ir.add(if_pc, const(4, aw)), pcc.addr)

    cjalr_target = unseal(CapSig(rs1.tag, rs1.perms, rs1.base, rs1.top, rs1.addr, rs1.otype))
    pcc_seq = CapSig(pcc.tag, pcc.perms, pcc.base, pcc.top,
                     ir.ite(fetch_success, ir.add(pcc.addr, const(4, aw)), pcc.addr), pcc.otype)
    pcc_branch = CapSig(pcc.tag, pcc.perms, pcc.base, pcc.top, ir.add(if_pc, branch_off), pcc.otype)

    pcc_next = pcc_seq
    pcc_next = pcc_branch.mux(ir.and_(legal0, branch_taken), pcc_next)
    pcc_next = cjalr_target.mux(ir.and_(legal0, k[Kind.CJALR]), pcc_next)
    pcc_next = unseal(scr1).mux(eret, pcc_next)
    pcc_next = unseal(scr0).mux(trap_commit, pcc_next)
    for f, t in pcc_next.fields().items():
        nxt[f"pcc_{f}"] = t

    for f, t in scr0.fields().items():
        nxt[f"scr0_{f}"] = t
    scr1_save = CapSig(pcc.tag, pcc.perms, pcc.base, pcc.top, trap_pc, pcc.otype)
    for f, t in scr1_save.mux(trap_commit, scr1).fields().items():
        nxt[f"scr1_{f}"] = t

    nxt["cyc"] = ir.ite(exc_flag, cyc, ir.add(cyc, const(1, dw)))
    nxt["exc_flag"] = ir.ite(trap_commit, ir.btrue(), ir.ite(eret, ir.bfalse(), exc_flag))

    squash = ir.or_(trap_commit, redirect_any)
    nxt["if_valid"] = ir.ite(squash, ir.bfalse(),
                             ir.ite(fetch_success, ir.btrue(),
                                    ir.ite(retire, ir.bfalse(), if_valid)))
    nxt["if_instr"] = ir.ite(fetch_success, imem_rdata, if_instr)
    nxt["if_pc"] = ir.ite(fetch_success, pcc.addr, if_pc)
    nxt["ex_beat"] = ir.ite(squash, ir.bfalse(),
                            ir.ite(ex_busy_next, ir.btrue(),
                                   ir.ite(beat1, ir.bfalse(), ex_beat)))
    nxt["ld_lo"] = ir.ite(ir.and_(legal0, k[Kind.CLOADCAP]), dmem_rdata, ld_lo)
    nxt["wb_valid"] = ir.ite(wb_fill, ir.btrue(), ir.bfalse())
    nxt["wb_dest"] = ir.ite(wb_fill, rd_i, wb_dest)
    for f, t in result.fields().items():
        nxt[f"wb_{f}"] = ir.ite(wb_fill, t, wb.fields()[f])
    nxt["flush_pend"] = ir.ite(flush_pend, ir.bfalse(),
                               ir.ite(set_flush_pend, ir.btrue(), ir.bfalse()))

    # reset has priority over everything
    for name, sv in ts.state_vars.items():
        rv = const(ts.reset_values[name], sv.sort)
        ts.state_vars[name] = StateVar(name, sv.sort, ir.ite(rst, rv, nxt[name]))

    # ---- defines -------------------------------------------------------------
    ts.defines["ireq_valid"] = ireq_valid
    ts.defines["ireq_we"] = ir.bfalse()
    ts.defines["ireq_addr"] = pcc.addr
    ts.defines["ireq_wdata"] = const(0, bv(32))
    ts.defines["ireq_wtag"] = ir.bfalse()
    ts.defines["dreq_valid"] = dreq_valid
    ts.defines["dreq_we"] = dreq_we
    ts.defines["dreq_addr"] = dreq_addr
    ts.defines["dreq_wdata"] = dreq_wdata
    ts.defines["dreq_wtag"] = dreq_wtag
    ts.defines["prot_active"] = prot_on
    ts.defines["retire"] = retire
    ts.defines["trap_commit"] = trap_commit
    ts.defines["fetch_fault"] = fetch_fault
    ts.defines["arch_pc"] = ir.ite(if_valid, if_pc, pcc.addr)
    ts.defines["ctx_switch_commit"] = ir.disj([
        ir.and_(legal0, ir.and_(k[Kind.CJALR], cjalr_sentry)),
        ir.and_(trap_commit, sentry_ok(scr0)),
        ir.and_(eret, sentry_ok(scr1)),
    ])

    # capability views of the data port: the store side exposes the full
    # written capability (stable across both beats), the load side exposes
    # the assembled capability at its consumption point.
    cstore_active = ir.and_(k[Kind.CSTORECAP], dreq_valid)
    ts.defines["cstore_active"] = cstore_active
    for f, t in rs2.fields().items():
        ts.defines[f"cstore_{f}"] = t
    ts.cap_groups["cstore"] = CapGroup("cstore", "store-port",
                                       {f: f"cstore_{f}" for f in csorts})
    ts.defines["cload_ret_active"] = ir.and_(beat1, k[Kind.CLOADCAP])
    for f, t in cload_res.fields().items():
        ts.defines[f"cload_ret_{f}"] = t
    ts.cap_groups["cload_ret"] = CapGroup("cload_ret", "load-port",
                                          {f: f"cload_ret_{f}" for f in csorts})

    # ---- labels ---------------------------------------------------------------
    arch_groups = [f"reg{i}" for i in range(cfg.num_regs)] + ["pcc", "scr0", "scr1"]
    p_arch = tuple(f"{g}_{f}" for g in arch_groups for f in csorts) + ("cyc", "exc_flag")
    p_uarch = ("if_valid", "if_instr", "if_pc", "ex_beat", "ld_lo",
               "wb_valid", "wb_dest") + tuple(f"wb_{f}" for f in csorts) + ("flush_pend",)
    ts.labels["P_arch"] = p_arch
    ts.labels["P_uarch"] = p_uarch
    ts.labels["P"] = p_arch + p_uarch
    ts.labels["mem_port"] = ("ireq_valid", "ireq_we", "ireq_addr", "ireq_wdata", "ireq_wtag",
                             "dreq_valid", "dreq_we", "dreq_addr", "dreq_wdata", "dreq_wtag")

    ts.port_groups["instr"] = PortGroup("instr", "ireq_valid", "ireq_we", "ireq_addr",
                                        "ireq_wdata", "ireq_wtag", 4, ("imem_rdata",))
    ts.port_groups["data"] = PortGroup("data", "dreq_valid", "dreq_we", "dreq_addr",
                                       "dreq_wdata", "dreq_wtag", BEAT,
                                       ("dmem_rdata", "dmem_rtag"))
    ts.pin_levels = {"rst": 0, "cheri_en": documented_enable_level(cfg)}

    ts.validate()
    return ts


def capability_catalogue(ts: TransitionSystem) -> list[str]:
    """Register/buffer groups whose layout matches the capability type.

    This is the candidate pool for protected-set refinement; port views are
    part of the protection macro but are never refinement candidates.
    """
    return [g.name for g in ts.cap_groups.values() if g.kind in CAP_LOCATION_KINDS]


def documented_enable_level(cfg: CoreConfig) -> int:
    """Pin level that enables protection according to the documentation."""
    return 0 if cfg.cheri_enable_active_low else 1
