use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::trace::{Address, Word};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Account {
    pub balance: Word,
    /// Zero-valued slots are never stored.
    pub storage: BTreeMap<Word, Word>,
    pub code: Vec<u8>,
}

impl Account {
    pub fn new(balance: Word, code: Vec<u8>) -> Self {
        Self { balance, storage: BTreeMap::new(), code }
    }

    pub fn load(&self, key: Word) -> Word {
        self.storage.get(&key).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct World {
    accounts: BTreeMap<Address, Account>,
}

/// Full copy of a world.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot(World);

impl World {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, address: Address, account: Account) -> Option<Account> {
        self.accounts.insert(address, account)
    }

    pub fn account(&self, address: Address) -> Option<&Account> {
        self.accounts.get(&address)
    }

    pub fn accounts(&self) -> impl Iterator<Item = (Address, &Account)> {
        self.accounts.iter().map(|(a, acc)| (*a, acc))
    }

    pub fn balance(&self, address: Address) -> Word {
        self.accounts.get(&address).map_or(0, |a| a.balance)
    }

    pub fn code(&self, address: Address) -> &[u8] {
        self.accounts.get(&address).map_or(&[], |a| a.code.as_slice())
    }

    pub fn load(&self, address: Address, key: Word) -> Word {
        self.accounts.get(&address).map_or(0, |a| a.load(key))
    }

    /// Writes a slot; storing 0 deletes it. Returns the previous value.
    pub fn store(&mut self, address: Address, key: Word, value: Word) -> Word {
        if value == 0 {
            return self.accounts.get_mut(&address).and_then(|a| a.storage.remove(&key)).unwrap_or(0);
        }
        self.accounts.entry(address).or_default().storage.insert(key, value).unwrap_or(0)
    }

    pub fn set_balance(&mut self, address: Address, balance: Word) {
        self.accounts.entry(address).or_default().balance = balance;
    }

    /// Moves `amount` from `from` to `to`. Fails without effect on
    /// insufficient funds or recipient overflow.
    pub fn transfer(&mut self, from: Address, to: Address, amount: Word) -> bool {
        if amount == 0 {
            return true;
        }
        let Some(debited) = self.balance(from).checked_sub(amount) else {
            return false;
        };
        if from != to {
            let Some(credited) = self.balance(to).checked_add(amount) else {
                return false;
            };
            self.set_balance(from, debited);
            self.set_balance(to, credited);
        }
        true
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot(self.clone())
    }

    pub fn revert_to(&mut self, snap: Snapshot) {
        *self = snap.0;
    }

    /// Deterministic text rendering: one line per account in address order.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        for (address, account) in &self.accounts {
            let _ = write!(out, "{address} balance={} code=", account.balance);
            for b in &account.code {
                let _ = write!(out, "{b:02x}");
            }
            out.push_str(" storage={");
            for (n, (k, v)) in account.storage.iter().enumerate() {
                if n > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{k}:{v}");
            }
            out.push_str("}\n");
        }
        out.into_bytes()
    }
}
