mod common;

use std::sync::Arc;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use tracehook_core::pltl::{
    eval, eval_all, monitor_new, parse_formula, parse_properties, pretty, tokenize, Env, Formula, ProviderSet,
};
use tracehook_core::{Address, CallStackEntry, Selector, Trace};

fn provider_set() -> Arc<ProviderSet> {
    Arc::new(providers().into_iter().map(|(c, s)| CallStackEntry::new(Address(c), Selector(s))).collect())
}

fn eval_at(f: &Formula, t: &Trace, i: usize) -> bool {
    let env = Env::at_step(t, i, provider_set()).unwrap();
    eval(f, t, i, &env).unwrap()
}

fn case(seed: u64, opts: FormulaOpts) -> (Formula, Trace) {
    let mut r = rng(seed);
    let len = r.gen_range(1..=16);
    let depth = r.gen_range(0..=4);
    (gen_formula(&mut r, depth, opts), gen_trace(&mut r, len, false))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn eval_matches_reference_semantics(seed in any::<u64>()) {
        let (f, t) = case(seed, FormulaOpts::FULL);
        for i in 0..t.len() {
            let want = oracle(&f, &t, i, &Ctx::at(&t, i, providers()));
            prop_assert_eq!(eval_at(&f, &t, i), want, "{} at {}", pretty(&f), i);
        }
    }

    #[test]
    fn eval_all_is_pointwise_eval(seed in any::<u64>()) {
        let (f, t) = case(seed, FormulaOpts { arith: false, ..FormulaOpts::FULL });
        let all = eval_all(&f, &t, &Env::with_providers(provider_set())).unwrap();
        for (i, v) in all.iter().enumerate() {
            prop_assert_eq!(*v, eval(&f, &t, i, &Env::with_providers(provider_set())).unwrap());
        }
    }

    #[test]
    fn abbreviations_unfold(seed in any::<u64>()) {
        let (f, t) = case(seed, FormulaOpts::FULL);
        let pairs = [
            (Formula::once(f.clone()), Formula::since(Formula::tt(), f.clone())),
            (Formula::historically(f.clone()), Formula::not(Formula::once(Formula::not(f.clone())))),
            (Formula::eventually(f.clone()), Formula::until(Formula::tt(), f.clone())),
            (Formula::always(f.clone()), Formula::not(Formula::eventually(Formula::not(f.clone())))),
        ];
        for i in 0..t.len() {
            for (short, long) in &pairs {
                prop_assert_eq!(eval_at(short, &t, i), eval_at(long, &t, i));
            }
        }
    }

    #[test]
    fn past_formulas_ignore_the_future(seed in any::<u64>()) {
        let (f, t) = case(seed, FormulaOpts::PAST);
        let i = (seed as usize) % t.len();
        let mut prefix = Trace::new();
        for s in &t.steps()[..=i] {
            prefix.append_step(*s).unwrap();
        }
        prop_assert_eq!(eval_at(&f, &t, i), eval_at(&f, &prefix, i));
    }

    #[test]
    fn monitor_agrees_with_offline(seed in any::<u64>()) {
        let (f, t) = case(seed, FormulaOpts::MONITOR);
        let mut m = tracehook_core::pltl::MonitorState::new(&f, Env::with_providers(provider_set())).unwrap();
        for i in 0..t.len() {
            let online = m.step(&t, i).unwrap();
            prop_assert_eq!(online, eval(&f, &t, i, &Env::with_providers(provider_set())).unwrap(), "{} at {}", pretty(&f), i);
        }
    }

    #[test]
    fn pretty_then_parse_is_identity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let depth = r.gen_range(0..=6);
        let f = gen_any_formula(&mut r, depth);
        let text = pretty(&f);
        prop_assert_eq!(parse_formula(&text).unwrap(), f.clone(), "{}", text);
        let file = format!("property p {{ {text} }}");
        prop_assert_eq!(parse_properties(&file).unwrap().get("p").cloned(), Some(f));
    }

    #[test]
    fn parser_survives_arbitrary_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
        let text = String::from_utf8_lossy(&bytes);
        let _ = tokenize(&text);
        let _ = parse_formula(&text);
        let _ = parse_properties(&text);
    }

    #[test]
    fn parser_survives_token_soup(picks in proptest::collection::vec(0usize..40, 0..60)) {
        const VOCAB: [&str; 40] = [
            "property", "p", "{", "}", "(", ")", ",", ":", "not", "and", "or", "->", "X", "U", "S", "Y",
            "F", "G", "O", "H", "forall", "exists", "exists_pair", "in", "callstack", "c", "s",
            "inflashloan", "event", "deposit", "hookid", "1", "arg", "sum", "withdrawals", "ratio",
            "<", "==", "-", "true",
        ];
        let text: Vec<&str> = picks.iter().map(|&i| VOCAB[i]).collect();
        let text = text.join(" ");
        let _ = parse_formula(&text);
        let _ = parse_properties(&text);
    }
}

#[test]
fn future_formulas_are_rejected_by_the_monitor() {
    let f = parse_formula("F event(deposit)").unwrap();
    assert!(monitor_new(&f).is_err());
    let f = parse_formula("O (exists (c,s) in callstack : Y event(deposit))").unwrap();
    assert!(monitor_new(&f).is_err());
}
