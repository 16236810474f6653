//! JSON scenario documents: accounts, registry, property bindings and a
//! list of transactions to run in order.
//!
//! ```json
//! {
//!   "accounts": [{"address": "0x100", "balance": 5, "code": "STOP", "storage": {"0": 1}}],
//!   "registry": {"flashloan_providers": [{"contract": "0x300", "selector": "0x1"}],
//!                "tvl_thresholds": [{"contract": "0x100", "num": 1, "den": 2}]},
//!   "properties_file": "props.pltl",
//!   "bindings": [{"contract": "0x100", "hook_id": 1, "property": "builtin.reentrancy"}],
//!   "transactions": [{"origin": "0x1", "target": "0x100", "selector": "0x1",
//!                     "value": 0, "arg": 0, "gas_limit": 100000}]
//! }
//! ```
//!
//! Numbers may be JSON integers or decimal / `0x` strings. `code` is hex
//! bytecode or assembly text; `code_file` names an assembly file relative
//! to the scenario.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::detectors;
use crate::pltl::{parse_properties, CheckError, ParseError, PropertySet};
use crate::trace::{parse_u64, Address, CallStackEntry, Selector, Word};
use crate::tracer::{PropertyBinding, Registry, Tracer};
use crate::vm::{execute_transaction, load_code, Account, AsmError, Receipt, Transaction, World};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("scenario JSON, line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("code of account {account}: {source}")]
    Asm { account: Address, source: AsmError },
    #[error("{path}:{source}")]
    Properties { path: PathBuf, source: ParseError },
    #[error("{0}")]
    Invalid(String),
}

impl ScenarioError {
    /// True for errors in a properties file, as opposed to the scenario itself.
    pub fn is_property_parse(&self) -> bool {
        matches!(self, ScenarioError::Properties { .. })
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Num {
    Int(u64),
    Text(String),
}

impl Num {
    fn word(&self, what: &str) -> Result<Word, ScenarioError> {
        match self {
            Num::Int(n) => Ok(*n),
            Num::Text(s) => parse_u64(s).ok_or_else(|| ScenarioError::Invalid(format!("{what}: invalid number `{s}`"))),
        }
    }

    fn address(&self, what: &str) -> Result<Address, ScenarioError> {
        self.word(what).map(Address)
    }

    fn selector(&self, what: &str) -> Result<Selector, ScenarioError> {
        let w = self.word(what)?;
        u32::try_from(w).map(Selector).map_err(|_| ScenarioError::Invalid(format!("{what}: selector {w} exceeds 32 bits")))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AccountDoc {
    address: Num,
    #[serde(default)]
    balance: Option<Num>,
    #[serde(default)]
    code: Option<String>,
    #[serde(default)]
    code_file: Option<String>,
    #[serde(default)]
    storage: BTreeMap<String, Num>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryDoc {
    contract: Num,
    selector: Num,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ThresholdDoc {
    contract: Num,
    num: Num,
    den: Num,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RegistryDoc {
    #[serde(default)]
    flashloan_providers: Vec<EntryDoc>,
    #[serde(default)]
    tvl_thresholds: Vec<ThresholdDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BindingDoc {
    contract: Num,
    hook_id: u8,
    property: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TxDoc {
    origin: Num,
    target: Num,
    #[serde(default)]
    selector: Option<Num>,
    #[serde(default)]
    value: Option<Num>,
    #[serde(default)]
    arg: Option<Num>,
    #[serde(default)]
    gas_limit: Option<Num>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    accounts: Vec<AccountDoc>,
    #[serde(default)]
    registry: RegistryDoc,
    #[serde(default)]
    properties_file: Option<String>,
    #[serde(default)]
    bindings: Vec<BindingDoc>,
    #[serde(default)]
    transactions: Vec<TxDoc>,
}

pub const DEFAULT_GAS_LIMIT: Word = 1_000_000;

/// A loaded, validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub world: World,
    pub registry: Registry,
    pub props: PropertySet,
    pub transactions: Vec<Transaction>,
}

/// Outcome of one transaction in a scenario run.
#[derive(Debug, Clone)]
pub struct TxRun {
    pub receipt: Receipt,
    pub tracer: Tracer,
    pub pre: World,
    pub post: World,
}

impl Scenario {
    /// Runs every transaction in order against a copy of the initial world.
    /// Returns the per-transaction results and the final world.
    pub fn run(&self, debug: bool) -> (Vec<TxRun>, World) {
        let mut world = self.world.clone();
        let mut runs = Vec::with_capacity(self.transactions.len());
        for tx in &self.transactions {
            let pre = world.clone();
            let mut tracer = Tracer::with_debug(debug);
            let receipt = execute_transaction(&mut world, tx, &mut tracer, &self.registry, &self.props);
            runs.push(TxRun { receipt, tracer, pre, post: world.clone() });
        }
        (runs, world)
    }

    /// The same scenario with every binding removed.
    pub fn unbound(&self) -> Scenario {
        let mut s = self.clone();
        s.registry.bindings.clear();
        s
    }
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })
}

/// Reads and validates a scenario file. Relative paths inside it resolve
/// against the file's directory.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_scenario(&text, base)
}

pub fn parse_scenario(text: &str, base: &Path) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioDoc = serde_json::from_str(text).map_err(|e| ScenarioError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let invalid = |m: String| ScenarioError::Invalid(m);

    let mut world = World::new();
    let mut defined = BTreeSet::new();
    for acc in &doc.accounts {
        let address = acc.address.address("account address")?;
        if !defined.insert(address) {
            return Err(invalid(format!("account {address} defined twice")));
        }
        let source = match (&acc.code, &acc.code_file) {
            (Some(_), Some(_)) => return Err(invalid(format!("account {address} has both code and code_file"))),
            (Some(c), None) => Some(c.clone()),
            (None, Some(f)) => Some(read(&base.join(f))?),
            (None, None) => None,
        };
        let code = match source {
            Some(s) => load_code(&s).map_err(|source| ScenarioError::Asm { account: address, source })?,
            None => Vec::new(),
        };
        let balance = acc.balance.as_ref().map(|b| b.word("balance")).transpose()?.unwrap_or(0);
        let mut account = Account::new(balance, code);
        for (k, v) in &acc.storage {
            let key = parse_u64(k).ok_or_else(|| invalid(format!("account {address}: invalid storage key `{k}`")))?;
            let value = v.word("storage value")?;
            if value != 0 {
                account.storage.insert(key, value);
            }
        }
        world.insert(address, account);
    }
    let require = |a: Address, role: &str| {
        if defined.contains(&a) {
            Ok(a)
        } else {
            Err(invalid(format!("{role} {a} is not a defined account")))
        }
    };

    let mut providers = BTreeSet::new();
    for e in &doc.registry.flashloan_providers {
        let contract = require(e.contract.address("flashloan provider")?, "flashloan provider")?;
        providers.insert(CallStackEntry::new(contract, e.selector.selector("flashloan provider selector")?));
    }
    let mut tvl_thresholds = BTreeMap::new();
    for t in &doc.registry.tvl_thresholds {
        let contract = require(t.contract.address("tvl threshold")?, "tvl threshold contract")?;
        let (num, den) = (t.num.word("num")?, t.den.word("den")?);
        if den == 0 {
            return Err(invalid(format!("tvl threshold for {contract}: den must be positive")));
        }
        tvl_thresholds.insert(contract, (num, den));
    }

    let mut props = match &doc.properties_file {
        Some(f) => {
            let path = base.join(f);
            parse_properties(&read(&path)?).map_err(|source| ScenarioError::Properties { path, source })?
        }
        None => PropertySet::new(),
    };

    let mut bindings = Vec::with_capacity(doc.bindings.len());
    for b in &doc.bindings {
        let contract = require(b.contract.address("binding contract")?, "binding contract")?;
        let mut reference = b.property.trim().to_string();
        if reference == detectors::TVL {
            let (num, den) = tvl_thresholds
                .get(&contract)
                .ok_or_else(|| invalid(format!("binding to {} on {contract} has no tvl threshold", detectors::TVL)))?;
            reference = detectors::tvl_name(*num, *den);
        }
        let property = match detectors::resolve_builtin(&reference) {
            Some(resolved) => {
                let (name, formula) = resolved.map_err(|e| invalid(format!("binding `{reference}`: {e}")))?;
                if !props.contains(&name) {
                    props.insert(&name, formula);
                }
                name
            }
            None => reference,
        };
        bindings.push(PropertyBinding { contract, hook_id: b.hook_id, property });
    }

    let registry = Registry { flashloan_providers: Arc::new(providers), bindings, tvl_thresholds };
    registry.validate(&props).map_err(|e| match e {
        CheckError::UnknownProperty(name) => invalid(format!("binding references undefined property `{name}`")),
        other => invalid(other.to_string()),
    })?;

    let mut transactions = Vec::with_capacity(doc.transactions.len());
    for (n, t) in doc.transactions.iter().enumerate() {
        let what = |f: &str| format!("transaction {n} {f}");
        let tx = Transaction {
            origin: require(t.origin.address(&what("origin"))?, &what("origin"))?,
            target: require(t.target.address(&what("target"))?, &what("target"))?,
            selector: t.selector.as_ref().map(|s| s.selector(&what("selector"))).transpose()?.unwrap_or(Selector(0)),
            value: t.value.as_ref().map(|v| v.word(&what("value"))).transpose()?.unwrap_or(0),
            arg: t.arg.as_ref().map(|v| v.word(&what("arg"))).transpose()?.unwrap_or(0),
            gas_limit: t.gas_limit.as_ref().map(|v| v.word(&what("gas_limit"))).transpose()?.unwrap_or(DEFAULT_GAS_LIMIT),
        };
        if tx.gas_limit == 0 {
            return Err(invalid(format!("transaction {n}: gas_limit must be positive")));
        }
        transactions.push(tx);
    }

    Ok(Scenario { world, registry, props, transactions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vm::TxStatus;

    fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        parse_scenario(text, Path::new("."))
    }

    const BASIC: &str = r#"{
        "accounts": [
            {"address": "0x1", "balance": 100},
            {"address": "0x10", "code": "PUSH 1\nHOOK 1\nSTOP", "storage": {"0x5": "7"}}
        ],
        "bindings": [{"contract": "0x10", "hook_id": 1, "property": "builtin.reentrancy"}],
        "transactions": [{"origin": "0x1", "target": 16, "value": "0x3"}]
    }"#;

    #[test]
    fn basic_scenario_runs() {
        let s = parse(BASIC).unwrap();
        assert_eq!(s.world.load(Address(0x10), 5), 7);
        assert!(s.props.contains(detectors::REENTRANCY));
        let (runs, world) = s.run(false);
        assert_eq!(runs[0].receipt.status, TxStatus::Success);
        assert_eq!(world.balance(Address(0x10)), 3);
        assert_eq!(runs[0].tracer.verdict_log().len(), 1);
    }

    #[test]
    fn undefined_property_is_named() {
        let text = BASIC.replace("builtin.reentrancy", "no_such_property");
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("no_such_property"), "{err}");
    }

    #[test]
    fn undefined_addresses_rejected() {
        let err = parse(&BASIC.replace("\"target\": 16", "\"target\": 17")).unwrap_err().to_string();
        assert!(err.contains("0x11"), "{err}");
        let err = parse(&BASIC.replace("{\"contract\": \"0x10\"", "{\"contract\": \"0x99\"")).unwrap_err();
        assert!(err.to_string().contains("0x99"));
    }

    #[test]
    fn tvl_binding_uses_registry_threshold() {
        let text = BASIC
            .replace("builtin.reentrancy", "builtin.tvl")
            .replace("\"bindings\"", "\"registry\": {\"tvl_thresholds\": [{\"contract\": \"0x10\", \"num\": 1, \"den\": 2}]},\n\"bindings\"");
        let s = parse(&text).unwrap();
        assert_eq!(s.registry.bindings[0].property, "builtin.tvl(1,2)");
        assert!(parse(&BASIC.replace("builtin.reentrancy", "builtin.tvl")).is_err());
    }

    #[test]
    fn json_and_asm_errors_are_positioned() {
        assert!(matches!(parse("{\n\"accounts\": [,]}"), Err(ScenarioError::Json { line: 2, .. })));
        let err = parse(&BASIC.replace("HOOK 1", "FROB")).unwrap_err();
        assert!(matches!(err, ScenarioError::Asm { source: AsmError { line: 2, .. }, .. }));
    }
}
