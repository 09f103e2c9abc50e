//! Property tests for the structural invariants: instruction coding,
//! execution determinism, flip involution, and the event identities.

use std::collections::BTreeSet;

use proptest::prelude::*;

use faultlab_core::debug::{DebugSession, FaultLocation, FaultTarget};
use faultlab_core::uarch::EventKind;
use faultlab_core::vm::isa::{self, AluOp, Cond, Instr, ShiftOp};
use faultlab_core::vm::{assemble, Machine, MachineConfig};

fn reg() -> impl Strategy<Value = u8> {
    0u8..16
}

fn arb_instr() -> impl Strategy<Value = Instr> {
    prop_oneof![
        Just(Instr::Nop),
        Just(Instr::Halt),
        (reg(), any::<u16>()).prop_map(|(rd, imm)| Instr::Movi { rd, imm }),
        (reg(), reg()).prop_map(|(rd, rs1)| Instr::Mov { rd, rs1 }),
        (reg(), reg(), reg(), 0usize..6).prop_map(|(rd, rs1, rs2, op)| {
            let op = [
                AluOp::Add,
                AluOp::Sub,
                AluOp::Mul,
                AluOp::And,
                AluOp::Or,
                AluOp::Xor,
            ][op];
            Instr::Alu { op, rd, rs1, rs2 }
        }),
        (reg(), reg(), 0u8..32, any::<bool>()).prop_map(|(rd, rs1, amount, left)| Instr::Shift {
            op: if left { ShiftOp::Shl } else { ShiftOp::Shr },
            rd,
            rs1,
            amount,
        }),
        (reg(), reg(), -2048i16..=2047).prop_map(|(rd, base, offset)| Instr::Loadw {
            rd,
            base,
            offset
        }),
        (reg(), reg(), -2048i16..=2047).prop_map(|(src, base, offset)| Instr::Storew {
            src,
            base,
            offset
        }),
        (reg(), reg()).prop_map(|(rs1, rs2)| Instr::Cmp { rs1, rs2 }),
        (any::<i16>(), 0usize..4).prop_map(|(offset, c)| {
            let cond = [Cond::Eq, Cond::Ne, Cond::Lt, Cond::Ge][c];
            Instr::Branch { cond, offset }
        }),
        any::<i16>().prop_map(|offset| Instr::Jmp { offset }),
        any::<i16>().prop_map(|offset| Instr::Call { offset }),
        Just(Instr::Ret),
        reg().prop_map(|rd| Instr::Push { rd }),
        reg().prop_map(|rd| Instr::Pop { rd }),
        reg().prop_map(|rs1| Instr::Out { rs1 }),
    ]
}

/// Render an instruction back to assembly text.
fn render(instr: &Instr, addr: u32, labels: &mut Vec<(u32, String)>) -> String {
    let mut target = |offset: i16| -> String {
        let t = (addr as i64 + 4 + offset as i64 * 4).rem_euclid(1 << 32) as u32;
        let name = format!("t_{t:x}");
        labels.push((t, name.clone()));
        name
    };
    match instr {
        Instr::Nop => "NOP".into(),
        Instr::Halt => "HALT".into(),
        Instr::Movi { rd, imm } => format!("MOVI R{rd}, {imm}"),
        Instr::Mov { rd, rs1 } => format!("MOV R{rd}, R{rs1}"),
        Instr::Alu { op, rd, rs1, rs2 } => {
            let m = match op {
                AluOp::Add => "ADD",
                AluOp::Sub => "SUB",
                AluOp::Mul => "MUL",
                AluOp::And => "AND",
                AluOp::Or => "OR",
                AluOp::Xor => "XOR",
            };
            format!("{m} R{rd}, R{rs1}, R{rs2}")
        }
        Instr::Shift {
            op,
            rd,
            rs1,
            amount,
        } => {
            let m = if *op == ShiftOp::Shl { "SHL" } else { "SHR" };
            format!("{m} R{rd}, R{rs1}, {amount}")
        }
        Instr::Loadw { rd, base, offset } => format!("LOADW R{rd}, [R{base}+{offset}]"),
        Instr::Storew { src, base, offset } => format!("STOREW R{src}, [R{base}+{offset}]"),
        Instr::Cmp { rs1, rs2 } => format!("CMP R{rs1}, R{rs2}"),
        Instr::Branch { cond, offset } => {
            let m = match cond {
                Cond::Eq => "BEQ",
                Cond::Ne => "BNE",
                Cond::Lt => "BLT",
                Cond::Ge => "BGE",
            };
            format!("{m} {}", target(*offset))
        }
        Instr::Jmp { offset } => format!("JMP {}", target(*offset)),
        Instr::Call { offset } => format!("CALL {}", target(*offset)),
        Instr::Ret => "RET".into(),
        Instr::Push { rd } => format!("PUSH R{rd}"),
        Instr::Pop { rd } => format!("POP R{rd}"),
        Instr::Out { rs1 } => format!("OUT R{rs1}"),
    }
}

proptest! {
    #[test]
    fn encode_decode_round_trip(instr in arb_instr()) {
        let word = isa::encode(instr);
        prop_assert_eq!(isa::decode(word), Ok(instr));
    }

    /// Rendering to text and assembling matches direct encoding, for
    /// programs whose branch targets stay inside the image.
    #[test]
    fn assembler_agrees_with_encoder(instrs in prop::collection::vec(arb_instr(), 1..40)) {
        let len = instrs.len() as i64;
        // keep branch targets inside [0, len*4) so labels resolve
        let fixed: Vec<Instr> = instrs
            .into_iter()
            .enumerate()
            .map(|(i, ins)| {
                let clamp = |offset: i16| -> i16 {
                    let target = (i as i64 + 1 + offset as i64).rem_euclid(len);
                    (target - i as i64 - 1) as i16
                };
                match ins {
                    Instr::Branch { cond, offset } => Instr::Branch { cond, offset: clamp(offset) },
                    Instr::Jmp { offset } => Instr::Jmp { offset: clamp(offset) },
                    Instr::Call { offset } => Instr::Call { offset: clamp(offset) },
                    other => other,
                }
            })
            .collect();

        let mut labels: Vec<(u32, String)> = Vec::new();
        let lines: Vec<String> = fixed
            .iter()
            .enumerate()
            .map(|(i, ins)| render(ins, i as u32 * 4, &mut labels))
            .collect();
        labels.sort();
        labels.dedup();
        let mut source = String::new();
        for (i, line) in lines.iter().enumerate() {
            for (addr, name) in labels.iter().filter(|(a, _)| *a == i as u32 * 4) {
                let _ = addr;
                source.push_str(&format!("{name}:\n"));
            }
            source.push_str(line);
            source.push('\n');
        }
        let image = assemble(&source).unwrap();
        let direct: Vec<u32> = fixed.iter().map(|i| isa::encode(*i)).collect();
        prop_assert_eq!(image.code, direct);
    }

    /// Two executions of the same machine are bit-for-bit identical,
    /// and the all-events vector satisfies the catalog identities no
    /// matter how the program ends.
    #[test]
    fn execution_is_deterministic_with_valid_identities(
        instrs in prop::collection::vec(arb_instr(), 1..60),
        budget in 1u64..4000,
    ) {
        let image = {
            let mut code: Vec<u32> = instrs.iter().map(|i| isa::encode(*i)).collect();
            code.push(isa::encode(Instr::Halt));
            let source: String = "NOP\n".to_string(); // placeholder assembly
            let mut img = assemble(&source).unwrap();
            img.code = code;
            img
        };
        let config = MachineConfig { hpc_slots: 12, mem_size: 1 << 18, ..Default::default() };
        let run = || {
            let mut m = Machine::load(&image, &config).unwrap();
            for (slot, kind) in EventKind::ALL.iter().enumerate() {
                m.pmu.configure(slot, *kind).unwrap();
            }
            m.pmu.enable();
            let stop = m.run_until(&BTreeSet::new(), budget);
            let counts: Vec<u64> =
                (0..12).map(|slot| m.pmu.read(slot).unwrap()).collect();
            (stop, m.regs, m.pc, m.cycle, m.output().to_vec(), counts)
        };
        let a = run();
        let b = run();
        prop_assert_eq!(&a, &b);

        let mut vector = faultlab_core::uarch::EventVector::default();
        for (slot, kind) in EventKind::ALL.iter().enumerate() {
            vector.set(*kind, a.5[slot]);
        }
        prop_assert!(vector.check_identities().is_ok(), "{:?}", vector);
    }

    /// Applying the same flip twice restores the full machine state.
    #[test]
    fn flip_bits_is_an_involution(
        loc_pick in 0usize..3,
        index in 0u8..16,
        addr_word in 0u32..(1 << 16) / 4,
        bits in prop::collection::btree_set(0u8..32, 1..8),
    ) {
        let image = assemble("NOP\nHALT").unwrap();
        let config = MachineConfig { mem_size: 1 << 16, ..Default::default() };
        let mut machine = Machine::load(&image, &config).unwrap();
        machine.regs = [0xA5A5_5A5A; 16];
        machine.pc = 0x1234;
        let mut session = DebugSession::new(machine);
        let location = match loc_pick {
            0 => FaultLocation::Register { index },
            1 => FaultLocation::ProgramCounter,
            _ => FaultLocation::Memory { addr: addr_word * 4 },
        };
        let target = FaultTarget { location, bits: bits.into_iter().collect() };
        let before = (
            session.machine().regs,
            session.machine().pc,
            session.machine().mem.clone(),
        );
        let first = session.flip_bits(&target).unwrap();
        prop_assert_ne!(first.old, first.new);
        let second = session.flip_bits(&target).unwrap();
        prop_assert_eq!(second.new, first.old);
        let after = (
            session.machine().regs,
            session.machine().pc,
            session.machine().mem.clone(),
        );
        prop_assert_eq!(before, after);
    }
}
