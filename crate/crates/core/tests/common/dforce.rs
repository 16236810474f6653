//! Paths and readings for the dForce miniature fixtures.

use std::path::PathBuf;

use tracehook_core::scenario::TxRun;
use tracehook_core::{load_scenario, Address, Scenario, StepPayload, Trace, World};

pub const POOL: Address = Address(0x100);
pub const LENDER: Address = Address(0x200);
pub const FLASH_LENDER: (u64, u32) = (0x300, 1);
pub const ATTACKER: Address = Address(0x400);
pub const GET_VIRTUAL_PRICE: u32 = 3;
pub const SUPPLY_SLOT: u64 = 0;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn scenario(name: &str) -> Scenario {
    load_scenario(&fixture(&format!("dforce/{name}.json"))).unwrap()
}

pub fn run_one(name: &str) -> TxRun {
    let (mut runs, _) = scenario(name).run(false);
    assert_eq!(runs.len(), 1);
    runs.remove(0)
}

/// Pool balance scaled by 1000 per LP token, computed from raw state.
pub fn fair_price(world: &World) -> u64 {
    world.balance(POOL) * 1000 / world.load(POOL, SUPPLY_SLOT)
}

/// Values returned by `get_virtual_price` calls, in trace order.
pub fn quoted_prices(trace: &Trace) -> Vec<u64> {
    trace
        .steps()
        .iter()
        .filter(|s| s.contract == POOL && s.selector.0 == GET_VIRTUAL_PRICE)
        .filter_map(|s| match s.payload {
            StepPayload::Return { success: true, value } => Some(value),
            _ => None,
        })
        .collect()
}
