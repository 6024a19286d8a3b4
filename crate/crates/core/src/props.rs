//! Seeded property suites shared by the `test` command and the test targets.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assign::{check_assign, synthesize_forms};
use crate::formula::{enumerate_forms, enumerate_values, form_join, form_leq, Form, FormEnv};
use crate::reduce::{enumerate_steps, explore, step, ExploreOptions, Rule};
use crate::stream::{drive, obs_leq, stream_eval};
use crate::surface::compile;
use crate::syntax::{name, Expr, Symbol, SymbolTable};

pub const SUITES: &[&str] = &["symbols", "order", "expansion", "monotonicity", "oracle"];

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub name: String,
    pub seed: u64,
    pub cases: usize,
    pub failures: Vec<String>,
    pub elapsed: Duration,
}

impl SuiteReport {
    fn new(name: &str, seed: u64) -> Self {
        SuiteReport {
            name: name.to_string(),
            seed,
            cases: 0,
            failures: Vec::new(),
            elapsed: Duration::ZERO,
        }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok && self.failures.len() < 20 {
            self.failures.push(what());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Formula enumeration depth for the order suite.
    pub depth: usize,
    /// Number of random terms for the expansion suite.
    pub terms: usize,
    /// Sampled triples for transitivity and leastness.
    pub samples: usize,
    /// Formula height used when certifying terms.
    pub height: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 0x5eed,
            depth: 3,
            terms: 1000,
            samples: 100_000,
            height: 3,
        }
    }
}

pub fn run_suite(name: &str, cfg: &SuiteConfig) -> Option<SuiteReport> {
    let start = Instant::now();
    let mut r = match name {
        "symbols" => symbol_laws(cfg),
        "order" => order_laws(cfg),
        "expansion" => subject_expansion(cfg),
        "monotonicity" => fuel_monotonicity(cfg),
        "oracle" => oracle_equivalence(cfg),
        _ => return None,
    };
    r.elapsed = start.elapsed();
    Some(r)
}

fn two_symbols() -> Vec<Symbol> {
    vec![Symbol::name("a"), Symbol::name("b")]
}

pub fn symbol_laws(cfg: &SuiteConfig) -> SuiteReport {
    let mut r = SuiteReport::new("symbols", cfg.seed);
    let mut chain = SymbolTable::discrete();
    chain.insert(Symbol::name("low"), Symbol::name("high"), Symbol::name("high"));
    chain.insert(Symbol::name("mid"), Symbol::name("high"), Symbol::name("high"));
    chain.insert(Symbol::name("low"), Symbol::name("mid"), Symbol::name("mid"));
    for (label, t) in [("discrete", SymbolTable::discrete()), ("chain", chain)] {
        let res = t.check_laws();
        r.record(res.is_ok(), || format!("{label}: {res:?}"));
    }
    let mut bad = SymbolTable::discrete();
    bad.insert(Symbol::name("p"), Symbol::name("q"), Symbol::name("r"));
    bad.insert(Symbol::name("p"), Symbol::name("r"), Symbol::name("s"));
    r.record(bad.check_laws().is_err(), || "non-associative table accepted".into());
    r
}

/// Order laws over all formulae of the configured depth and two symbols.
pub fn order_laws(cfg: &SuiteConfig) -> SuiteReport {
    let mut r = SuiteReport::new("order", cfg.seed);
    let t = SymbolTable::discrete();
    let syms = two_symbols();
    let forms = enumerate_forms(cfg.depth, &syms);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let leq = |a: &Form, b: &Form| form_leq(a, b, &t);
    let join = |a: &Form, b: &Form| form_join(a, b, &t);

    for f in &forms {
        r.record(leq(f, f), || format!("reflexivity: {f}"));
    }

    // uniform triples rarely chain, so half are built from joins
    let mut chained = 0usize;
    for i in 0..cfg.samples {
        let a = forms.choose(&mut rng).unwrap();
        let (b, c) = if i % 2 == 0 {
            (forms.choose(&mut rng).unwrap().clone(), forms.choose(&mut rng).unwrap().clone())
        } else {
            let b = join(a, forms.choose(&mut rng).unwrap());
            let c = join(&b, forms.choose(&mut rng).unwrap());
            (b, c)
        };
        if leq(a, &b) && leq(&b, &c) {
            chained += 1;
            r.record(leq(a, &c), || format!("transitivity: {a} ⊑ {b} ⊑ {c}"));
        }
    }
    r.record(chained > cfg.samples / 4, || format!("only {chained} chained triples"));

    for a in &forms {
        for b in &forms {
            let j = join(a, b);
            r.record(j.size() <= a.size().max(b.size()), || format!("size of join: {a} ⊔ {b} = {j}"));
            if cfg.depth <= 2 {
                r.record(leq(a, &j) && leq(b, &j), || format!("upper bound: {a} ⊔ {b} = {j}"));
            }
        }
    }

    for _ in 0..cfg.samples {
        let a = forms.choose(&mut rng).unwrap();
        let b = forms.choose(&mut rng).unwrap();
        let j = join(a, b);
        r.record(leq(a, &j) && leq(b, &j), || format!("upper bound: {a} ⊔ {b} = {j}"));
        let ba = join(b, a);
        r.record(leq(&j, &ba) && leq(&ba, &j), || format!("commutativity: {a}, {b}"));
        // an upper bound built from the pair plus noise must sit above the join
        let c = join(&j, forms.choose(&mut rng).unwrap());
        r.record(!(leq(a, &c) && leq(b, &c)) || leq(&j, &c), || format!("least: {a} ⊔ {b} vs {c}"));
        let c = forms.choose(&mut rng).unwrap();
        r.record(!(leq(a, c) && leq(b, c)) || leq(&j, c), || format!("least: {a} ⊔ {b} vs {c}"));
    }

    let inner_vals = enumerate_values(cfg.depth.saturating_sub(1).max(1), &syms);
    let inner = enumerate_forms(cfg.depth.saturating_sub(1).max(1), &syms);
    for tau in &inner_vals {
        for p in &inner {
            for q in &inner {
                let lhs = Form::arrow(tau.clone(), join(p, q));
                let rhs = join(&Form::arrow(tau.clone(), p.clone()), &Form::arrow(tau.clone(), q.clone()));
                r.record(leq(&lhs, &rhs), || format!("distributivity: {tau} -> ({p} ⊔ {q})"));
            }
        }
    }
    r
}

/// Small closed terms over symbols 'a and 'b and binders x, y, z.
pub fn random_term(rng: &mut ChaCha8Rng, size: usize) -> Expr {
    gen(rng, size, &mut Vec::new())
}

/// Like [`random_term`], with the given variables free.
pub fn random_open_term(rng: &mut ChaCha8Rng, size: usize, free: &[&'static str]) -> Expr {
    gen(rng, size, &mut free.to_vec())
}

fn gen(rng: &mut ChaCha8Rng, size: usize, scope: &mut Vec<&'static str>) -> Expr {
    const NAMES: [&str; 3] = ["x", "y", "z"];
    let leaf = |rng: &mut ChaCha8Rng, scope: &[&'static str]| match rng.gen_range(0..24) {
        0 => Expr::Bot,
        1 => Expr::Top,
        2..=4 => Expr::BotV,
        5..=11 if !scope.is_empty() => Expr::var(scope.choose(rng).unwrap()),
        5..=17 => Expr::sym("a"),
        _ => Expr::sym("b"),
    };
    if size <= 1 {
        return leaf(rng, scope);
    }
    let s = size - 1;
    let binder = |rng: &mut ChaCha8Rng| NAMES[rng.gen_range(0..NAMES.len())];
    match rng.gen_range(0..10) {
        0 => {
            let x = binder(rng);
            scope.push(x);
            let body = gen(rng, s, scope);
            scope.pop();
            Expr::lam(x, body)
        }
        1 | 2 => {
            // mostly beta redexes so that steps exist
            let x = binder(rng);
            scope.push(x);
            let body = gen(rng, s / 2, scope);
            scope.pop();
            Expr::app(Expr::lam(x, body), gen(rng, s / 2, scope))
        }
        3 => Expr::pair(gen(rng, s / 2, scope), gen(rng, s / 2, scope)),
        4 => Expr::Set((0..rng.gen_range(0..3)).map(|_| gen(rng, s / 2, scope)).collect()),
        5 => Expr::join(gen(rng, s / 2, scope), gen(rng, s / 2, scope)),
        6 => {
            // the scrutinee usually matches
            let sym = if rng.gen_bool(0.8) { "a" } else { "b" };
            Expr::let_sym(Symbol::name(sym), gen(rng, s / 2, scope), gen(rng, s / 2, scope))
        }
        7 => {
            let (x1, x2) = ("x", "y");
            let src = if rng.gen_bool(0.7) {
                Expr::pair(gen(rng, s / 4, scope), gen(rng, s / 4, scope))
            } else {
                gen(rng, s / 2, scope)
            };
            scope.extend([x1, x2]);
            let body = gen(rng, s / 2, scope);
            scope.truncate(scope.len() - 2);
            Expr::LetPair(name(x1), name(x2), Box::new(src), Box::new(body))
        }
        8 => {
            let x = binder(rng);
            let src = if rng.gen_bool(0.7) {
                Expr::Set((0..rng.gen_range(1..3)).map(|_| gen(rng, s / 4, scope)).collect())
            } else {
                gen(rng, s / 2, scope)
            };
            scope.push(x);
            let body = gen(rng, s / 2, scope);
            scope.pop();
            Expr::big_join(x, src, body)
        }
        _ => Expr::app(gen(rng, s / 2, scope), gen(rng, s / 2, scope)),
    }
}

/// Formulae certified for a successor are re-certified for its predecessor.
pub fn subject_expansion(cfg: &SuiteConfig) -> SuiteReport {
    let mut r = SuiteReport::new("expansion", cfg.seed);
    let t = SymbolTable::discrete();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let env = FormEnv::new();
    let mut done = 0;
    let mut informative = 0;
    let mut attempts = 0;
    while done < cfg.terms && attempts < cfg.terms * 50 {
        attempts += 1;
        let size = rng.gen_range(3..10);
        let e = random_term(&mut rng, size);
        let steps: Vec<_> = enumerate_steps(&e, &t)
            .into_iter()
            .filter(|c| c.rule != Rule::Approximate)
            .collect();
        let Some(c) = steps.choose(&mut rng) else { continue };
        let e2 = match step(&e, c, &t) {
            Ok(e2) => e2,
            Err(err) => {
                r.record(false, || format!("enumerated step failed: {c} on {e}: {err}"));
                continue;
            }
        };
        done += 1;
        let forms = synthesize_forms(&e2, 6, cfg.height, &t);
        if forms.iter().any(|f| !matches!(f, Form::Bot | Form::BotV)) {
            informative += 1;
        }
        for f in forms {
            let ok = check_assign(&env, &e, &f, cfg.height, &t).is_some();
            r.record(ok, || format!("{e} ↦ {e2} via {c}: lost {f}"));
        }
    }
    r.record(done == cfg.terms, || format!("only {done} terms had a step"));
    r.record(informative * 4 >= done, || format!("only {informative} of {done} successors had informative formulae"));
    r
}

/// Consecutive observations of every corpus program never decrease.
pub fn fuel_monotonicity(cfg: &SuiteConfig) -> SuiteReport {
    let mut r = SuiteReport::new("monotonicity", cfg.seed);
    let t = SymbolTable::discrete();
    for (pname, src) in crate::corpus::PROGRAMS {
        let e = compile(src).expect("corpus compiles");
        let mut prev = Expr::Bot;
        for n in 0..64 {
            let cur = stream_eval(&e, n, &t);
            r.record(obs_leq(&prev, &cur, &t) != Some(false), || format!("{pname} at fuel {n}"));
            prev = cur;
        }
    }
    r
}

/// Step budget used to look for the fuel-n result: the length of the
/// deterministic trace plus slack for single steps.
pub fn oracle_budget(e: &Expr, n: u32, t: &SymbolTable) -> usize {
    drive(e, n, t).map(|(_, tr)| tr.len()).unwrap_or(0) + 8
}

/// `stream_eval` results for small fuel are reachable by explicit reduction.
pub fn oracle_equivalence(cfg: &SuiteConfig) -> SuiteReport {
    let mut r = SuiteReport::new("oracle", cfg.seed);
    let t = SymbolTable::discrete();
    for (pname, src) in crate::corpus::PROGRAMS {
        let e = compile(src).expect("corpus compiles");
        for n in 0..=8 {
            let want = stream_eval(&e, n, &t);
            let opts = ExploreOptions {
                budget: oracle_budget(&e, n, &t),
                frontier_cap: 300,
                max_drive_fuel: 8,
            };
            let out = explore(&e, &opts, &t);
            r.record(out.contains(&want), || format!("{pname} at fuel {n}: {want} not reached"));
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_deterministic_and_closed() {
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let x = random_term(&mut a, 8);
            let y = random_term(&mut b, 8);
            assert!(x.is_closed(), "{x}");
            assert_eq!(x.to_string(), y.to_string());
        }
    }

    #[test]
    fn small_suites_pass() {
        let cfg = SuiteConfig {
            depth: 2,
            terms: 50,
            samples: 2_000,
            ..Default::default()
        };
        for name in ["symbols", "order", "expansion"] {
            let rep = run_suite(name, &cfg).unwrap();
            assert!(rep.passed(), "{name}: {:?}", rep.failures);
        }
    }
}
