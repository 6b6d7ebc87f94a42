"""Instruction set: kinds, binary encoding, and the text program format.

Fixed 32-bit instruction words.  Bits [1:0] must be 0b11 (the uncompressed
encoding indicator); anything else is an illegal instruction.

    [1:0]   = 0b11
    [6:2]   = kind
    [9:7]   = rd
    [12:10] = rs1
    [15:13] = rs2
    [31:16] = imm (signed except where noted below)

ALU selects its operation through imm[2:0] (LI takes the immediate itself,
zero-extended).  BRANCH uses imm bit 0 as the condition (0: eq, 1: ne) and
the remaining bits as an even signed offset.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

__all__ = ["Kind", "AluOp", "Instruction", "MalformedInstruction", "encode", "decode",
           "parse_instruction", "format_instruction"]


class Kind(IntEnum):
    ALU = 0
    LOAD = 1
    STORE = 2
    CLOADCAP = 3
    CSTORECAP = 4
    CSETBOUNDS = 5
    CANDPERM = 6
    CINCADDR = 7
    CJALR = 8
    BRANCH = 9
    ECALL_RET = 10


class AluOp(IntEnum):
    ADD = 0
    SUB = 1
    AND = 2
    OR = 3
    XOR = 4
    LI = 5


class MalformedInstruction(ValueError):
    pass


@dataclass(frozen=True)
class Instruction:
    kind: Kind
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    imm: int = 0  # 16-bit, interpretation per kind

    def validate(self, num_regs: int) -> None:
        for r in (self.rd, self.rs1, self.rs2):
            if not 0 <= r < num_regs:
                raise MalformedInstruction(f"register index {r} out of range (<{num_regs})")
        if not -(1 << 15) <= self.imm < (1 << 16):
            raise MalformedInstruction(f"immediate {self.imm} does not fit 16 bits")


def encode(instr: Instruction) -> int:
    return (
        0b11
        | (int(instr.kind) << 2)
        | (instr.rd << 7)
        | (instr.rs1 << 10)
        | (instr.rs2 << 13)
        | ((instr.imm & 0xFFFF) << 16)
    )


def decode(word: int, num_regs: int) -> Instruction | None:
    """Decode a fetched word; None means illegal (traps)."""
    if word & 0b11 != 0b11:
        return None
    kind = (word >> 2) & 0x1F
    if kind > int(Kind.ECALL_RET):
        return None
    rd = (word >> 7) & 7
    rs1 = (word >> 10) & 7
    rs2 = (word >> 13) & 7
    if rd >= num_regs or rs1 >= num_regs or rs2 >= num_regs:
        return None
    return Instruction(Kind(kind), rd, rs1, rs2, (word >> 16) & 0xFFFF)


def sign16(v: int) -> int:
    v &= 0xFFFF
    return v - 0x10000 if v & 0x8000 else v


def parse_instruction(text: str) -> Instruction:
    """Parse the one-line text form, e.g. 'CINCADDR rd=1 rs1=0 imm=4'."""
    toks = text.split()
    if not toks:
        raise MalformedInstruction("empty instruction")
    try:
        kind = Kind[toks[0].upper()]
    except KeyError:
        raise MalformedInstruction(f"unknown instruction kind {toks[0]!r}") from None
    fields = {"rd": 0, "rs1": 0, "rs2": 0, "imm": 0}
    for tok in toks[1:]:
        if "=" not in tok:
            raise MalformedInstruction(f"bad operand {tok!r} (expected name=value)")
        key, val = tok.split("=", 1)
        if key not in fields:
            raise MalformedInstruction(f"unknown operand {key!r}")
        fields[key] = int(val, 0)
    return Instruction(kind, **fields)


def format_instruction(instr: Instruction) -> str:
    return f"{instr.kind.name} rd={instr.rd} rs1={instr.rs1} rs2={instr.rs2} imm={instr.imm & 0xFFFF}"
