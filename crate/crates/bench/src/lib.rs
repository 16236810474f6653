//! Workloads shared by the benchmarks.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracehook_core::{Address, EventKind, Selector, Trace, Tracer};

/// A well-nested trace of `len` steps over a handful of contracts, with
/// nesting up to depth 8. Open frames are closed at the end.
pub fn synthetic_trace(len: usize, seed: u64) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tracer::new();
    t.record_call(Address(1), Selector(0), Address(1), 0, 0).unwrap();
    let mut depth = 0;
    while t.trace().len() < len {
        match rng.gen_range(0..10) {
            0..=2 if depth < 8 => {
                let contract = Address(rng.gen_range(0xA..0x10));
                t.record_call(contract, Selector(rng.gen_range(0..4)), Address(1), 0, 0).unwrap();
                depth += 1;
            }
            3..=4 if depth > 0 => {
                t.record_return(true, 0).unwrap();
                depth -= 1;
            }
            5..=6 => {
                let event = if rng.gen_bool(0.7) { EventKind::Deposit } else { EventKind::Withdrawal };
                t.record_emit(event, rng.gen_range(0..1000)).unwrap();
            }
            _ => t.record_hook(1, rng.gen_range(0..1000)).unwrap(),
        }
    }
    t.unwind().unwrap();
    t.into_trace()
}

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}
