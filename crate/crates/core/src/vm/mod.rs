//! A small EVM-flavored stack machine with 64-bit words, flat gas and a
//! `HOOK` instruction that hands control to the tracer.

mod asm;
mod interp;
pub mod opcode;
mod world;

pub use asm::{assemble, load_code, AsmError};
pub use interp::{
    execute_transaction, Abort, CallResult, Frame, Halt, Machine, Outcome, Receipt, Transaction, TxStatus,
    MAX_CALL_DEPTH, MAX_STACK,
};
pub use opcode::Op;
pub use world::{Account, Snapshot, World};
