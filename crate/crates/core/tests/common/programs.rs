//! Random small contracts for the VM suites.

use rand::Rng;
use tracehook_core::detectors::{builtin_flashloan, builtin_reentrancy};
use tracehook_core::pltl::ProviderSet;
use tracehook_core::vm::{Account, Op};
use tracehook_core::{Address, CallStackEntry, PropertyBinding, PropertySet, Registry, Selector, Transaction, World};

pub const EOA: u64 = 0x1;
pub const VM_CONTRACTS: [u64; 3] = [0xA, 0xB, 0xC];

enum Item {
    Op(Op),
    /// `PUSH <offset of the n-th JUMPDEST>` followed by the jump.
    JumpTo(usize, bool),
}

fn push(items: &mut Vec<Item>, ops: &[Op]) {
    items.extend(ops.iter().map(|&op| Item::Op(op)));
}

fn small(rng: &mut impl Rng) -> Op {
    Op::Push(rng.gen_range(0..8))
}

fn target(rng: &mut impl Rng) -> Op {
    let pool = [VM_CONTRACTS[0], VM_CONTRACTS[1], VM_CONTRACTS[2], EOA, 0x77];
    Op::Push(pool[rng.gen_range(0..pool.len())])
}

/// Random bytecode of roughly `len` items. Calls, transfers and stores get
/// their operands pushed first so they usually execute.
pub fn gen_code(rng: &mut impl Rng, len: usize) -> Vec<u8> {
    let mut items = Vec::new();
    let mut dests = 0;
    for _ in 0..len {
        match rng.gen_range(0..24) {
            0..=3 => {
                let op = small(rng);
                push(&mut items, &[op]);
            }
            4 => {
                let arith = [Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Lt, Op::Gt, Op::Eq, Op::And, Op::Or];
                push(&mut items, &[arith[rng.gen_range(0..arith.len())]]);
            }
            5 => {
                let unary = [Op::IsZero, Op::Not, Op::Pop, Op::Dup(rng.gen_range(0..3)), Op::Swap(rng.gen_range(0..2))];
                push(&mut items, &[unary[rng.gen_range(0..unary.len())]]);
            }
            6 => {
                let env = [Op::Caller, Op::CallValue, Op::SelfAddr, Op::CallArg, Op::Selector];
                push(&mut items, &[env[rng.gen_range(0..env.len())]]);
            }
            7 => {
                let t = target(rng);
                push(&mut items, &[t, Op::Balance]);
            }
            8..=9 => {
                let (v, k) = (small(rng), Op::Push(rng.gen_range(0..4)));
                push(&mut items, &[v, k, Op::SStore]);
            }
            10 => {
                let k = Op::Push(rng.gen_range(0..4));
                push(&mut items, &[k, Op::SLoad]);
            }
            11 => {
                let (e, amt) = (Op::Emit(rng.gen_range(0..3)), small(rng));
                push(&mut items, &[amt, e]);
            }
            12..=13 => {
                let (h, arg) = (Op::Hook(rng.gen_range(0..3)), small(rng));
                push(&mut items, &[arg, h]);
            }
            14..=15 => {
                let arg = small(rng);
                let value = Op::Push(rng.gen_range(0..3));
                let sel = Op::Push(rng.gen_range(0..3));
                let to = target(rng);
                push(&mut items, &[arg, value, sel, to, Op::Call]);
            }
            16 => {
                let (amt, to) = (Op::Push(rng.gen_range(0..4)), target(rng));
                push(&mut items, &[amt, to, Op::Transfer]);
            }
            17..=18 => {
                push(&mut items, &[Op::JumpDest]);
                dests += 1;
            }
            19..=20 => {
                let cond = rng.gen_bool(0.6);
                if cond {
                    let c = small(rng);
                    push(&mut items, &[c]);
                }
                items.push(Item::JumpTo(rng.gen_range(0..=dests), cond));
            }
            21 => {
                let v = small(rng);
                push(&mut items, &[v, Op::Return]);
            }
            22 => push(&mut items, &[Op::Push(0), Op::Revert]),
            _ => push(&mut items, &[Op::Stop]),
        }
    }
    if dests == 0 {
        push(&mut items, &[Op::JumpDest]);
    }

    // layout pass: jump targets may point forward
    let mut offsets = Vec::new();
    let mut pc = 0;
    for item in &items {
        match item {
            Item::Op(op) => {
                if *op == Op::JumpDest {
                    offsets.push(pc);
                }
                pc += op.size();
            }
            Item::JumpTo(..) => pc += Op::Push(0).size() + 1,
        }
    }
    let mut code = Vec::with_capacity(pc);
    for item in &items {
        match *item {
            Item::Op(op) => op.encode(&mut code),
            Item::JumpTo(n, cond) => {
                let dest = offsets[n.min(offsets.len() - 1)] as u64;
                Op::Push(dest).encode(&mut code);
                (if cond { Op::JumpI } else { Op::Jump }).encode(&mut code);
            }
        }
    }
    code
}

pub struct Program {
    pub world: World,
    pub registry: Registry,
    pub props: PropertySet,
    pub tx: Transaction,
}

/// Three contracts of random code, an externally owned origin, and
/// reentrancy and flashloan properties bound to hooks 1 and 2.
pub fn gen_program(rng: &mut impl Rng) -> Program {
    let mut world = World::new();
    world.insert(Address(EOA), Account::new(rng.gen_range(0..100), Vec::new()));
    for &c in &VM_CONTRACTS {
        let len = rng.gen_range(4..40);
        world.insert(Address(c), Account::new(rng.gen_range(0..50), gen_code(rng, len)));
        for key in 0..rng.gen_range(0..3) {
            world.store(Address(c), key, rng.gen_range(1..10));
        }
    }
    let mut props = PropertySet::new();
    props.insert("reentrancy", builtin_reentrancy());
    props.insert("flashloan", builtin_flashloan());
    let providers: ProviderSet = [CallStackEntry::new(Address(VM_CONTRACTS[1]), Selector(1))].into();
    let mut bindings = Vec::new();
    for &c in &VM_CONTRACTS {
        bindings.push(PropertyBinding { contract: Address(c), hook_id: 1, property: "reentrancy".into() });
        bindings.push(PropertyBinding { contract: Address(c), hook_id: 2, property: "flashloan".into() });
    }
    let registry = Registry { flashloan_providers: providers.into(), bindings, tvl_thresholds: Default::default() };
    let tx = Transaction {
        origin: Address(EOA),
        target: Address(VM_CONTRACTS[rng.gen_range(0..VM_CONTRACTS.len())]),
        selector: Selector(rng.gen_range(0..3)),
        value: rng.gen_range(0..3),
        arg: rng.gen_range(0..8),
        gas_limit: rng.gen_range(20..3000),
    };
    Program { world, registry, props, tx }
}
