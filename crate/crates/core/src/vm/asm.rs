//! Two-pass assembler for the line-oriented assembly format.
//!
//! Grammar, one item per line: `label:` definitions, instructions,
//! `;` comments, and the directives `.data` (switch to the data
//! section), `.word v[, v...]` and `.space n`. Code assembles at
//! address 0; data follows the code, 4-byte aligned. Labels may be used
//! anywhere a numeric immediate is accepted.

use std::collections::BTreeMap;

use thiserror::Error;

use super::image::ProgramImage;
use super::isa::{encode, AluOp, Cond, Instr, ShiftOp};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AsmError {
    #[error("line {line}: unknown mnemonic `{mnemonic}`")]
    UnknownMnemonic { line: usize, mnemonic: String },
    #[error("line {line}: undefined label `{label}`")]
    UndefinedLabel { line: usize, label: String },
    #[error("line {line}: duplicate label `{label}`")]
    DuplicateLabel { line: usize, label: String },
    #[error("line {line}: immediate {value} out of range for a {width}-bit field")]
    ImmediateOutOfRange { line: usize, value: i64, width: u8 },
    #[error("line {line}: branch target out of range")]
    BranchOutOfRange { line: usize },
    #[error("line {line}: bad register `{text}`")]
    BadRegister { line: usize, text: String },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Code,
    Data,
}

/// One operand as written in the source: a number or a label reference.
#[derive(Debug, Clone)]
enum Val {
    Num(i64),
    Label(String),
}

#[derive(Debug, Clone)]
enum Item {
    Instr {
        line: usize,
        mnemonic: String,
        args: Vec<String>,
    },
    Word {
        line: usize,
        vals: Vec<Val>,
    },
    Space {
        len: u32,
    },
}

/// Assemble source text into a program image.
pub fn assemble(source: &str) -> Result<ProgramImage, AsmError> {
    let mut section = Section::Code;
    let mut code_items: Vec<Item> = Vec::new();
    let mut data_items: Vec<Item> = Vec::new();
    // label -> (section, offset within section)
    let mut labels: BTreeMap<String, (Section, u32)> = BTreeMap::new();
    let mut code_off: u32 = 0;
    let mut data_off: u32 = 0;

    // pass 1: collect items and label offsets
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let mut text = raw;
        if let Some(pos) = text.find(';') {
            text = &text[..pos];
        }
        let mut text = text.trim();

        // any number of leading `label:` definitions
        while let Some(pos) = text.find(':') {
            let (head, rest) = text.split_at(pos);
            let name = head.trim();
            if !is_ident(name) {
                break;
            }
            if labels
                .insert(
                    name.to_string(),
                    (section, current_off(section, code_off, data_off)),
                )
                .is_some()
            {
                return Err(AsmError::DuplicateLabel {
                    line,
                    label: name.to_string(),
                });
            }
            text = rest[1..].trim();
        }
        if text.is_empty() {
            continue;
        }

        let (head, tail) = split_mnemonic(text);
        match head.to_ascii_lowercase().as_str() {
            ".data" => {
                section = Section::Data;
            }
            ".word" => {
                if section != Section::Data {
                    return Err(AsmError::Syntax {
                        line,
                        msg: ".word is only valid in the .data section".into(),
                    });
                }
                let vals = tail
                    .split(',')
                    .map(|tok| parse_val(tok.trim(), line))
                    .collect::<Result<Vec<_>, _>>()?;
                if vals.is_empty() {
                    return Err(AsmError::Syntax {
                        line,
                        msg: ".word needs at least one value".into(),
                    });
                }
                data_off += vals.len() as u32 * 4;
                data_items.push(Item::Word { line, vals });
            }
            ".space" => {
                if section != Section::Data {
                    return Err(AsmError::Syntax {
                        line,
                        msg: ".space is only valid in the .data section".into(),
                    });
                }
                let len = match parse_val(tail.trim(), line)? {
                    Val::Num(n) if n >= 0 => n as u32,
                    _ => {
                        return Err(AsmError::Syntax {
                            line,
                            msg: "bad .space length".into(),
                        })
                    }
                };
                data_off += len;
                data_items.push(Item::Space { len });
            }
            _ if head.starts_with('.') => {
                return Err(AsmError::Syntax {
                    line,
                    msg: format!("unknown directive `{head}`"),
                });
            }
            _ => {
                if section != Section::Code {
                    return Err(AsmError::Syntax {
                        line,
                        msg: "instructions are not allowed in the .data section".into(),
                    });
                }
                let args = if tail.is_empty() {
                    Vec::new()
                } else {
                    tail.split(',').map(|a| a.trim().to_string()).collect()
                };
                code_items.push(Item::Instr {
                    line,
                    mnemonic: head.to_string(),
                    args,
                });
                code_off += 4;
            }
        }
    }

    let code_base: u32 = 0;
    let data_base = (code_base + code_off + 3) & !3;
    let resolve = |name: &str, line: usize| -> Result<u32, AsmError> {
        match labels.get(name) {
            Some((Section::Code, off)) => Ok(code_base + off),
            Some((Section::Data, off)) => Ok(data_base + off),
            None => Err(AsmError::UndefinedLabel {
                line,
                label: name.to_string(),
            }),
        }
    };

    // pass 2: encode
    let mut code = Vec::with_capacity(code_items.len());
    for item in &code_items {
        let Item::Instr {
            line,
            mnemonic,
            args,
        } = item
        else {
            unreachable!()
        };
        let addr = code_base + code.len() as u32 * 4;
        let instr = encode_line(*line, mnemonic, args, addr, &resolve)?;
        code.push(encode(instr));
    }

    let mut data = Vec::with_capacity(data_off as usize);
    for item in &data_items {
        match item {
            Item::Word { line, vals } => {
                for v in vals {
                    let n = match v {
                        Val::Num(n) => *n,
                        Val::Label(name) => resolve(name, *line)? as i64,
                    };
                    if n < -(1i64 << 31) || n > (1i64 << 32) - 1 {
                        return Err(AsmError::ImmediateOutOfRange {
                            line: *line,
                            value: n,
                            width: 32,
                        });
                    }
                    data.extend_from_slice(&(n as u32).to_le_bytes());
                }
            }
            Item::Space { len } => data.resize(data.len() + *len as usize, 0),
            Item::Instr { .. } => unreachable!(),
        }
    }

    let symbols = labels
        .into_iter()
        .map(|(name, (sec, off))| {
            let addr = match sec {
                Section::Code => code_base + off,
                Section::Data => data_base + off,
            };
            (name, addr)
        })
        .collect();

    Ok(ProgramImage {
        code,
        code_base,
        data,
        data_base,
        entry: code_base,
        symbols,
    })
}

fn current_off(section: Section, code_off: u32, data_off: u32) -> u32 {
    match section {
        Section::Code => code_off,
        Section::Data => data_off,
    }
}

fn is_ident(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .next()
            .map(|c| c.is_ascii_alphabetic() || c == '_')
            .unwrap_or(false)
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn split_mnemonic(text: &str) -> (&str, &str) {
    match text.find(char::is_whitespace) {
        Some(pos) => (&text[..pos], text[pos..].trim()),
        None => (text, ""),
    }
}

fn parse_val(tok: &str, line: usize) -> Result<Val, AsmError> {
    if tok.is_empty() {
        return Err(AsmError::Syntax {
            line,
            msg: "empty operand".into(),
        });
    }
    let (neg, body) = match tok.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, tok),
    };
    let parsed = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        u64::from_str_radix(&hex.replace('_', ""), 16)
            .ok()
            .map(|v| v as i64)
    } else if body.chars().all(|c| c.is_ascii_digit()) {
        body.parse::<i64>().ok()
    } else {
        return if is_ident(tok) {
            Ok(Val::Label(tok.to_string()))
        } else {
            Err(AsmError::Syntax {
                line,
                msg: format!("bad operand `{tok}`"),
            })
        };
    };
    match parsed {
        Some(v) => Ok(Val::Num(if neg { -v } else { v })),
        None => Err(AsmError::Syntax {
            line,
            msg: format!("bad number `{tok}`"),
        }),
    }
}

fn parse_reg(tok: &str, line: usize) -> Result<u8, AsmError> {
    let t = tok.trim().to_ascii_uppercase();
    match t.as_str() {
        "SP" => return Ok(14),
        "LR" => return Ok(15),
        _ => {}
    }
    if let Some(num) = t.strip_prefix('R') {
        if let Ok(idx) = num.parse::<u8>() {
            if idx < 16 {
                return Ok(idx);
            }
        }
    }
    Err(AsmError::BadRegister {
        line,
        text: tok.trim().to_string(),
    })
}

fn imm_value(
    tok: &str,
    line: usize,
    resolve: &impl Fn(&str, usize) -> Result<u32, AsmError>,
) -> Result<i64, AsmError> {
    match parse_val(tok, line)? {
        Val::Num(n) => Ok(n),
        Val::Label(name) => Ok(resolve(&name, line)? as i64),
    }
}

fn check_range(v: i64, lo: i64, hi: i64, width: u8, line: usize) -> Result<i64, AsmError> {
    if v < lo || v > hi {
        return Err(AsmError::ImmediateOutOfRange {
            line,
            value: v,
            width,
        });
    }
    Ok(v)
}

/// `[rs1+imm]` or `[rs1-imm]` or `[rs1]`
fn parse_mem_operand(
    tok: &str,
    line: usize,
    resolve: &impl Fn(&str, usize) -> Result<u32, AsmError>,
) -> Result<(u8, i16), AsmError> {
    let inner = tok
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| AsmError::Syntax {
            line,
            msg: format!("expected [reg+imm], got `{tok}`"),
        })?
        .trim();
    let (reg_part, off) = if let Some(pos) = inner.find('+') {
        (
            &inner[..pos],
            imm_value(inner[pos + 1..].trim(), line, resolve)?,
        )
    } else if let Some(pos) = inner[1..].find('-') {
        let pos = pos + 1;
        (
            &inner[..pos],
            -imm_value(inner[pos + 1..].trim(), line, resolve)?,
        )
    } else {
        (inner, 0)
    };
    let base = parse_reg(reg_part.trim(), line)?;
    let off = check_range(off, -2048, 2047, 12, line)?;
    Ok((base, off as i16))
}

fn branch_offset(target: u32, addr: u32, line: usize) -> Result<i16, AsmError> {
    let delta = (target as i64) - (addr as i64) - 4;
    if delta % 4 != 0 {
        return Err(AsmError::Syntax {
            line,
            msg: "branch target is not word-aligned".into(),
        });
    }
    let words = delta / 4;
    if words < i16::MIN as i64 || words > i16::MAX as i64 {
        return Err(AsmError::BranchOutOfRange { line });
    }
    Ok(words as i16)
}

fn encode_line(
    line: usize,
    mnemonic: &str,
    args: &[String],
    addr: u32,
    resolve: &impl Fn(&str, usize) -> Result<u32, AsmError>,
) -> Result<Instr, AsmError> {
    let expect = |n: usize| -> Result<(), AsmError> {
        if args.len() != n {
            Err(AsmError::Syntax {
                line,
                msg: format!("{mnemonic} expects {n} operand(s), got {}", args.len()),
            })
        } else {
            Ok(())
        }
    };
    let m = mnemonic.to_ascii_uppercase();
    let alu = |op: AluOp, args: &[String]| -> Result<Instr, AsmError> {
        Ok(Instr::Alu {
            op,
            rd: parse_reg(&args[0], line)?,
            rs1: parse_reg(&args[1], line)?,
            rs2: parse_reg(&args[2], line)?,
        })
    };
    let shift = |op: ShiftOp, args: &[String]| -> Result<Instr, AsmError> {
        let amount = check_range(imm_value(&args[2], line, resolve)?, 0, 31, 5, line)?;
        Ok(Instr::Shift {
            op,
            rd: parse_reg(&args[0], line)?,
            rs1: parse_reg(&args[1], line)?,
            amount: amount as u8,
        })
    };
    let branch = |cond: Cond, args: &[String]| -> Result<Instr, AsmError> {
        let target = imm_value(&args[0], line, resolve)?;
        let target = check_range(target, 0, u32::MAX as i64, 32, line)? as u32;
        Ok(Instr::Branch {
            cond,
            offset: branch_offset(target, addr, line)?,
        })
    };
    match m.as_str() {
        "NOP" => {
            expect(0)?;
            Ok(Instr::Nop)
        }
        "HALT" => {
            expect(0)?;
            Ok(Instr::Halt)
        }
        "MOVI" => {
            expect(2)?;
            let imm = check_range(imm_value(&args[1], line, resolve)?, 0, 65535, 16, line)?;
            Ok(Instr::Movi {
                rd: parse_reg(&args[0], line)?,
                imm: imm as u16,
            })
        }
        "MOV" => {
            expect(2)?;
            Ok(Instr::Mov {
                rd: parse_reg(&args[0], line)?,
                rs1: parse_reg(&args[1], line)?,
            })
        }
        "ADD" => {
            expect(3)?;
            alu(AluOp::Add, args)
        }
        "SUB" => {
            expect(3)?;
            alu(AluOp::Sub, args)
        }
        "MUL" => {
            expect(3)?;
            alu(AluOp::Mul, args)
        }
        "AND" => {
            expect(3)?;
            alu(AluOp::And, args)
        }
        "OR" => {
            expect(3)?;
            alu(AluOp::Or, args)
        }
        "XOR" => {
            expect(3)?;
            alu(AluOp::Xor, args)
        }
        "SHL" => {
            expect(3)?;
            shift(ShiftOp::Shl, args)
        }
        "SHR" => {
            expect(3)?;
            shift(ShiftOp::Shr, args)
        }
        "LOADW" => {
            expect(2)?;
            let (base, offset) = parse_mem_operand(&args[1], line, resolve)?;
            Ok(Instr::Loadw {
                rd: parse_reg(&args[0], line)?,
                base,
                offset,
            })
        }
        "STOREW" => {
            expect(2)?;
            let (base, offset) = parse_mem_operand(&args[1], line, resolve)?;
            Ok(Instr::Storew {
                src: parse_reg(&args[0], line)?,
                base,
                offset,
            })
        }
        "CMP" => {
            expect(2)?;
            Ok(Instr::Cmp {
                rs1: parse_reg(&args[0], line)?,
                rs2: parse_reg(&args[1], line)?,
            })
        }
        "BEQ" => {
            expect(1)?;
            branch(Cond::Eq, args)
        }
        "BNE" => {
            expect(1)?;
            branch(Cond::Ne, args)
        }
        "BLT" => {
            expect(1)?;
            branch(Cond::Lt, args)
        }
        "BGE" => {
            expect(1)?;
            branch(Cond::Ge, args)
        }
        "JMP" => {
            expect(1)?;
            let target = imm_value(&args[0], line, resolve)? as u32;
            Ok(Instr::Jmp {
                offset: branch_offset(target, addr, line)?,
            })
        }
        "CALL" => {
            expect(1)?;
            let target = imm_value(&args[0], line, resolve)? as u32;
            Ok(Instr::Call {
                offset: branch_offset(target, addr, line)?,
            })
        }
        "RET" => {
            expect(0)?;
            Ok(Instr::Ret)
        }
        "PUSH" => {
            expect(1)?;
            Ok(Instr::Push {
                rd: parse_reg(&args[0], line)?,
            })
        }
        "POP" => {
            expect(1)?;
            Ok(Instr::Pop {
                rd: parse_reg(&args[0], line)?,
            })
        }
        "OUT" => {
            expect(1)?;
            Ok(Instr::Out {
                rs1: parse_reg(&args[0], line)?,
            })
        }
        _ => Err(AsmError::UnknownMnemonic {
            line,
            mnemonic: mnemonic.to_string(),
        }),
    }
}
