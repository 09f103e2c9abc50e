//! Instruction set: mnemonics, fixed 32-bit encoding, decode/encode.
//!
//! Every instruction is one little-endian 32-bit word:
//!
//! ```text
//! [31:24] opcode   [23:20] rd   [19:16] rs1   [15:12] rs2   [11:0] imm12
//!                                             [15:0]  imm16
//! ```
//!
//! `imm16` is unsigned for MOVI and a signed word offset for branches,
//! JMP and CALL (target = addr_of_instr + 4 + offset*4). `imm12` is a
//! signed byte offset for LOADW/STOREW and an unsigned shift amount
//! (taken mod 32) for SHL/SHR. The opcode byte 0x00 is deliberately
//! unassigned so that zero-filled memory traps as an illegal opcode.

/// Operation selector for the three-register ALU form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AluOp {
    Add,
    Sub,
    Mul,
    And,
    Or,
    Xor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftOp {
    Shl,
    Shr,
}

/// Condition codes for conditional branches, evaluated against the
/// flags set by the last CMP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cond {
    Eq,
    Ne,
    Lt,
    Ge,
}

/// A decoded instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instr {
    Nop,
    Halt,
    /// rd <- imm (zero-extended)
    Movi {
        rd: u8,
        imm: u16,
    },
    /// rd <- rs1
    Mov {
        rd: u8,
        rs1: u8,
    },
    /// rd <- rs1 op rs2 (wrapping)
    Alu {
        op: AluOp,
        rd: u8,
        rs1: u8,
        rs2: u8,
    },
    /// rd <- rs1 shifted by a constant amount (amount mod 32)
    Shift {
        op: ShiftOp,
        rd: u8,
        rs1: u8,
        amount: u8,
    },
    /// rd <- mem32[rs1 + offset]
    Loadw {
        rd: u8,
        base: u8,
        offset: i16,
    },
    /// mem32[rs1 + offset] <- rs2
    Storew {
        src: u8,
        base: u8,
        offset: i16,
    },
    /// set flags from rs1 - rs2 (signed compare)
    Cmp {
        rs1: u8,
        rs2: u8,
    },
    /// conditional pc-relative branch, offset in words
    Branch {
        cond: Cond,
        offset: i16,
    },
    Jmp {
        offset: i16,
    },
    /// R15 <- return address, then jump
    Call {
        offset: i16,
    },
    /// pc <- R15
    Ret,
    /// SP -= 4; mem32[SP] <- rd
    Push {
        rd: u8,
    },
    /// rd <- mem32[SP]; SP += 4
    Pop {
        rd: u8,
    },
    /// append rs1 to the output buffer, little-endian
    Out {
        rs1: u8,
    },
}

pub mod opcode {
    pub const NOP: u8 = 0x01;
    pub const HALT: u8 = 0x02;
    pub const MOVI: u8 = 0x03;
    pub const MOV: u8 = 0x04;
    pub const ADD: u8 = 0x05;
    pub const SUB: u8 = 0x06;
    pub const MUL: u8 = 0x07;
    pub const AND: u8 = 0x08;
    pub const OR: u8 = 0x09;
    pub const XOR: u8 = 0x0A;
    pub const SHL: u8 = 0x0B;
    pub const SHR: u8 = 0x0C;
    pub const LOADW: u8 = 0x0D;
    pub const STOREW: u8 = 0x0E;
    pub const CMP: u8 = 0x0F;
    pub const BEQ: u8 = 0x10;
    pub const BNE: u8 = 0x11;
    pub const BLT: u8 = 0x12;
    pub const BGE: u8 = 0x13;
    pub const JMP: u8 = 0x14;
    pub const CALL: u8 = 0x15;
    pub const RET: u8 = 0x16;
    pub const PUSH: u8 = 0x17;
    pub const POP: u8 = 0x18;
    pub const OUT: u8 = 0x19;
}

#[inline]
fn rd(word: u32) -> u8 {
    ((word >> 20) & 0xF) as u8
}

#[inline]
fn rs1(word: u32) -> u8 {
    ((word >> 16) & 0xF) as u8
}

#[inline]
fn rs2(word: u32) -> u8 {
    ((word >> 12) & 0xF) as u8
}

#[inline]
fn imm16(word: u32) -> u16 {
    (word & 0xFFFF) as u16
}

#[inline]
fn imm12_signed(word: u32) -> i16 {
    // sign-extend the low 12 bits
    (((word & 0xFFF) as i16) << 4) >> 4
}

/// Decode one instruction word. Any unassigned opcode byte is an error;
/// operand fields are plain bit slices and always decode.
pub fn decode(word: u32) -> Result<Instr, ()> {
    use opcode::*;
    let op = (word >> 24) as u8;
    let instr = match op {
        NOP => Instr::Nop,
        HALT => Instr::Halt,
        MOVI => Instr::Movi {
            rd: rd(word),
            imm: imm16(word),
        },
        MOV => Instr::Mov {
            rd: rd(word),
            rs1: rs1(word),
        },
        ADD => Instr::Alu {
            op: AluOp::Add,
            rd: rd(word),
            rs1: rs1(word),
            rs2: rs2(word),
        },
        SUB => Instr::Alu {
            op: AluOp::Sub,
            rd: rd(word),
            rs1: rs1(word),
            rs2: rs2(word),
        },
        MUL => Instr::Alu {
            op: AluOp::Mul,
            rd: rd(word),
            rs1: rs1(word),
            rs2: rs2(word),
        },
        AND => Instr::Alu {
            op: AluOp::And,
            rd: rd(word),
            rs1: rs1(word),
            rs2: rs2(word),
        },
        OR => Instr::Alu {
            op: AluOp::Or,
            rd: rd(word),
            rs1: rs1(word),
            rs2: rs2(word),
        },
        XOR => Instr::Alu {
            op: AluOp::Xor,
            rd: rd(word),
            rs1: rs1(word),
            rs2: rs2(word),
        },
        SHL => Instr::Shift {
            op: ShiftOp::Shl,
            rd: rd(word),
            rs1: rs1(word),
            amount: ((word & 0xFFF) % 32) as u8,
        },
        SHR => Instr::Shift {
            op: ShiftOp::Shr,
            rd: rd(word),
            rs1: rs1(word),
            amount: ((word & 0xFFF) % 32) as u8,
        },
        LOADW => Instr::Loadw {
            rd: rd(word),
            base: rs1(word),
            offset: imm12_signed(word),
        },
        STOREW => Instr::Storew {
            src: rs2(word),
            base: rs1(word),
            offset: imm12_signed(word),
        },
        CMP => Instr::Cmp {
            rs1: rs1(word),
            rs2: rs2(word),
        },
        BEQ => Instr::Branch {
            cond: Cond::Eq,
            offset: imm16(word) as i16,
        },
        BNE => Instr::Branch {
            cond: Cond::Ne,
            offset: imm16(word) as i16,
        },
        BLT => Instr::Branch {
            cond: Cond::Lt,
            offset: imm16(word) as i16,
        },
        BGE => Instr::Branch {
            cond: Cond::Ge,
            offset: imm16(word) as i16,
        },
        JMP => Instr::Jmp {
            offset: imm16(word) as i16,
        },
        CALL => Instr::Call {
            offset: imm16(word) as i16,
        },
        RET => Instr::Ret,
        PUSH => Instr::Push { rd: rd(word) },
        POP => Instr::Pop { rd: rd(word) },
        OUT => Instr::Out { rs1: rs1(word) },
        _ => return Err(()),
    };
    Ok(instr)
}

fn pack(op: u8, rd: u8, rs1: u8, rs2: u8, imm12: u16) -> u32 {
    ((op as u32) << 24)
        | (((rd & 0xF) as u32) << 20)
        | (((rs1 & 0xF) as u32) << 16)
        | (((rs2 & 0xF) as u32) << 12)
        | ((imm12 & 0xFFF) as u32)
}

fn pack16(op: u8, rd: u8, rs1: u8, imm16: u16) -> u32 {
    ((op as u32) << 24)
        | (((rd & 0xF) as u32) << 20)
        | (((rs1 & 0xF) as u32) << 16)
        | (imm16 as u32)
}

/// Encode an instruction into its 32-bit word.
pub fn encode(instr: Instr) -> u32 {
    use opcode::*;
    match instr {
        Instr::Nop => pack16(NOP, 0, 0, 0),
        Instr::Halt => pack16(HALT, 0, 0, 0),
        Instr::Movi { rd, imm } => pack16(MOVI, rd, 0, imm),
        Instr::Mov { rd, rs1 } => pack16(MOV, rd, rs1, 0),
        Instr::Alu { op, rd, rs1, rs2 } => {
            let opc = match op {
                AluOp::Add => ADD,
                AluOp::Sub => SUB,
                AluOp::Mul => MUL,
                AluOp::And => AND,
                AluOp::Or => OR,
                AluOp::Xor => XOR,
            };
            pack(opc, rd, rs1, rs2, 0)
        }
        Instr::Shift {
            op,
            rd,
            rs1,
            amount,
        } => {
            let opc = match op {
                ShiftOp::Shl => SHL,
                ShiftOp::Shr => SHR,
            };
            pack(opc, rd, rs1, 0, amount as u16)
        }
        Instr::Loadw { rd, base, offset } => pack(LOADW, rd, base, 0, offset as u16),
        Instr::Storew { src, base, offset } => pack(STOREW, 0, base, src, offset as u16),
        Instr::Cmp { rs1, rs2 } => pack(CMP, 0, rs1, rs2, 0),
        Instr::Branch { cond, offset } => {
            let opc = match cond {
                Cond::Eq => BEQ,
                Cond::Ne => BNE,
                Cond::Lt => BLT,
                Cond::Ge => BGE,
            };
            pack16(opc, 0, 0, offset as u16)
        }
        Instr::Jmp { offset } => pack16(JMP, 0, 0, offset as u16),
        Instr::Call { offset } => pack16(CALL, 0, 0, offset as u16),
        Instr::Ret => pack16(RET, 0, 0, 0),
        Instr::Push { rd } => pack16(PUSH, rd, 0, 0),
        Instr::Pop { rd } => pack16(POP, rd, 0, 0),
        Instr::Out { rs1 } => pack16(OUT, 0, rs1, 0),
    }
}
