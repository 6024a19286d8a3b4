//! Nondeterministic approximate small-step reduction, the result join, and a
//! bounded breadth-first explorer.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::syntax::{
    eval_paths, name, replace_at, root_redex, subterm, Canon, EvalCtx, Expr, RedexKind,
    SymbolTable,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    Beta,
    LetPairBeta,
    LetSymThreshold,
    BigJoinExpand,
    JoinOfResults,
    SetDropBot,
    TopPropagate,
    Approximate,
}

impl From<RedexKind> for Rule {
    fn from(k: RedexKind) -> Rule {
        match k {
            RedexKind::Beta => Rule::Beta,
            RedexKind::LetPairBeta => Rule::LetPairBeta,
            RedexKind::LetSymThreshold => Rule::LetSymThreshold,
            RedexKind::BigJoinExpand => Rule::BigJoinExpand,
            RedexKind::JoinOfResults => Rule::JoinOfResults,
            RedexKind::SetDropBot => Rule::SetDropBot,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Rule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Rule, Error> {
        Ok(match s {
            "Beta" => Rule::Beta,
            "LetPairBeta" => Rule::LetPairBeta,
            "LetSymThreshold" => Rule::LetSymThreshold,
            "BigJoinExpand" => Rule::BigJoinExpand,
            "JoinOfResults" => Rule::JoinOfResults,
            "SetDropBot" => Rule::SetDropBot,
            "TopPropagate" => Rule::TopPropagate,
            "Approximate" => Rule::Approximate,
            _ => return Err(Error::Trace(format!("unknown rule `{s}`"))),
        })
    }
}

/// A rule applied at an evaluation-context position, given as a child-index
/// path from the root.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StepChoice {
    pub rule: Rule,
    pub path: Vec<usize>,
}

impl StepChoice {
    pub fn new(rule: Rule, path: Vec<usize>) -> Self {
        StepChoice { rule, path }
    }

    pub fn context(&self, e: &Expr) -> Option<EvalCtx> {
        EvalCtx::from_path(e, &self.path).map(|(c, _)| c)
    }
}

impl fmt::Display for StepChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "({}, .)", self.rule)
        } else {
            let p: Vec<String> = self.path.iter().map(|i| i.to_string()).collect();
            write!(f, "({}, {})", self.rule, p.join("."))
        }
    }
}

impl FromStr for StepChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::Trace(format!("malformed step `{s}`"));
        let inner = s
            .trim()
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(bad)?;
        let (rule, path) = inner.split_once(',').ok_or_else(bad)?;
        let rule: Rule = rule.trim().parse()?;
        let path = path.trim();
        let path = if path == "." {
            Vec::new()
        } else {
            path.split('.')
                .map(|p| p.parse::<usize>().map_err(|_| bad()))
                .collect::<Result<_, _>>()?
        };
        Ok(StepChoice { rule, path })
    }
}

/// Serializes a step sequence, one `(rule, path)` per line.
pub fn format_trace(trace: &[StepChoice]) -> String {
    trace.iter().map(|c| format!("{c}\n")).collect()
}

pub fn parse_trace(text: &str) -> Result<Vec<StepChoice>, Error> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::parse)
        .collect()
}

/// `(r, r')c`: builds a pair only once both components are values.
pub fn comp_lift(r1: Expr, r2: Expr) -> Expr {
    match (&r1, &r2) {
        (Expr::Bot, _) => Expr::Bot,
        (Expr::Top, _) => Expr::Top,
        (_, Expr::Bot) => Expr::Bot,
        (_, Expr::Top) => Expr::Top,
        _ => Expr::pair(r1, r2),
    }
}

fn join_arms(e: Expr, out: &mut Vec<Expr>) {
    match e {
        Expr::Join(a, b) => {
            join_arms(*a, out);
            join_arms(*b, out);
        }
        other => out.push(other),
    }
}

/// Joins two lambda bodies under a shared binder. Arms are flattened, sorted
/// and deduplicated so the join is commutative, associative and idempotent up
/// to alpha-equivalence.
fn join_lambdas(x: &str, e1: &Expr, y: &str, e2: &Expr) -> Expr {
    let mut avoid = e1.free_vars();
    avoid.extend(e2.free_vars());
    let mut z = String::from(x);
    while avoid.iter().any(|n| **n == *z) {
        z.push('\'');
    }
    let zv = Expr::var(&z);
    let mut arms = Vec::new();
    join_arms(e1.substitute(x, &zv), &mut arms);
    join_arms(e2.substitute(y, &zv), &mut arms);
    let mut keyed: Vec<(Canon, Expr)> = arms
        .into_iter()
        .map(|a| (Expr::lam(&z, a.clone()).canonical(true), a))
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed.dedup_by(|a, b| a.0 == b.0);
    let mut it = keyed.into_iter().map(|(_, a)| a);
    let first = it.next().expect("at least one arm");
    let body = it.fold(first, Expr::join);
    Expr::Lam(name(&z), Box::new(body))
}

/// Sorted, alpha-deduplicated union of two set literals.
pub fn set_union(a: &[Expr], b: &[Expr]) -> Expr {
    let mut keyed: Vec<(Canon, Expr)> = a
        .iter()
        .chain(b.iter())
        .map(|e| (e.canonical(true), e.clone()))
        .collect();
    keyed.sort_by(|x, y| x.0.cmp(&y.0));
    keyed.dedup_by(|x, y| x.0 == y.0);
    Expr::Set(keyed.into_iter().map(|(_, e)| e).collect())
}

/// `r1 ⊔ r2` on closed results.
pub fn result_join(r1: &Expr, r2: &Expr, table: &SymbolTable) -> Expr {
    match (r1, r2) {
        (Expr::Bot, r) | (r, Expr::Bot) => r.clone(),
        (Expr::Top, _) | (_, Expr::Top) => Expr::Top,
        (Expr::BotV, v) | (v, Expr::BotV) if v.is_value() => v.clone(),
        (Expr::Sym(a), Expr::Sym(b)) => table.join(a, b).map(Expr::Sym).unwrap_or(Expr::Top),
        (Expr::Pair(a1, a2), Expr::Pair(b1, b2)) => {
            comp_lift(result_join(a1, b1, table), result_join(a2, b2, table))
        }
        (Expr::Set(a), Expr::Set(b)) => set_union(a, b),
        (Expr::Lam(x, e1), Expr::Lam(y, e2)) => join_lambdas(x, e1, y, e2),
        (Expr::Var(x), Expr::Var(y)) if x == y => r1.clone(),
        _ => Expr::Top,
    }
}

/// Applies one step. Fails when the choice does not apply to `e`.
pub fn step(e: &Expr, c: &StepChoice, table: &SymbolTable) -> Result<Expr, Error> {
    let invalid = || Error::InvalidStep(c.to_string());
    let (_, sub) = EvalCtx::from_path(e, &c.path).ok_or_else(invalid)?;
    let new = match c.rule {
        Rule::Approximate => Expr::Bot,
        Rule::TopPropagate => {
            if c.path.is_empty() || !matches!(sub, Expr::Top) {
                return Err(invalid());
            }
            return Ok(Expr::Top);
        }
        rule => {
            match root_redex(&sub, table) {
                Some(k) if Rule::from(k) == rule => {}
                _ => return Err(invalid()),
            }
            contract(&sub, table)
        }
    };
    Ok(replace_at(e, &c.path, new))
}

/// Contracts a root redex.
fn contract(e: &Expr, table: &SymbolTable) -> Expr {
    match e {
        Expr::App(f, v) => match &**f {
            Expr::Lam(x, b) => b.substitute(x, v),
            _ => unreachable!(),
        },
        Expr::LetPair(x1, x2, p, b) => match &**p {
            Expr::Pair(v1, v2) => b.substitute(x1, v1).substitute(x2, v2),
            _ => unreachable!(),
        },
        Expr::LetSym(_, _, b) => (**b).clone(),
        Expr::BigJoin(x, s, b) => match &**s {
            Expr::Set(vs) => {
                let mut arms = vs.iter().map(|v| b.substitute(x, v));
                match arms.next() {
                    None => Expr::Bot,
                    Some(first) => arms.fold(first, Expr::join),
                }
            }
            _ => unreachable!(),
        },
        Expr::Join(a, b) => result_join(a, b, table),
        Expr::Set(es) => {
            let mut es = es.clone();
            let i = es.iter().position(|e| matches!(e, Expr::Bot)).unwrap();
            es.remove(i);
            Expr::Set(es)
        }
        _ => unreachable!(),
    }
}

/// Every applicable choice, with `Approximate` at every evaluation position.
pub fn enumerate_steps(e: &Expr, table: &SymbolTable) -> Vec<StepChoice> {
    let mut out = Vec::new();
    for p in eval_paths(e) {
        let sub = subterm(e, &p).expect("eval path");
        if let Some(k) = root_redex(sub, table) {
            out.push(StepChoice::new(k.into(), p.clone()));
        }
        if matches!(sub, Expr::Top) && !p.is_empty() {
            out.push(StepChoice::new(Rule::TopPropagate, p.clone()));
        }
        out.push(StepChoice::new(Rule::Approximate, p));
    }
    out
}

/// Replays a trace from `e`, validating each step.
pub fn replay(e: &Expr, trace: &[StepChoice], table: &SymbolTable) -> Result<Expr, Error> {
    trace.iter().try_fold(e.clone(), |cur, c| step(&cur, c, table))
}

#[derive(Clone, Debug)]
pub struct ExploreOptions {
    /// Maximum number of primitive steps along any explored sequence.
    pub budget: usize,
    /// Maximum number of distinct states retained.
    pub frontier_cap: usize,
    /// Highest fuel tried for the deterministic drive macro-steps.
    pub max_drive_fuel: u32,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            budget: 64,
            frontier_cap: 20_000,
            max_drive_fuel: 16,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Reached {
    pub result: Expr,
    pub trace: Vec<StepChoice>,
}

#[derive(Clone, Debug, Default)]
pub struct ExploreOutcome {
    pub results: Vec<Reached>,
    pub truncated: bool,
    pub states: usize,
}

impl ExploreOutcome {
    pub fn contains(&self, r: &Expr) -> bool {
        self.results.iter().any(|x| x.result.same_result(r))
    }
}

/// Results reachable within the budget. Besides single steps, each state may
/// take a drive macro-step: the fuel-k evaluation strategy expanded into
/// primitive steps, each of which is validated and counted.
pub fn explore(e: &Expr, opts: &ExploreOptions, table: &SymbolTable) -> ExploreOutcome {
    let mut seen: HashSet<Canon> = HashSet::new();
    let mut out = ExploreOutcome::default();
    let mut heap: BinaryHeap<Reverse<(usize, u64)>> = BinaryHeap::new();
    let mut store: Vec<(Expr, Vec<StepChoice>)> = Vec::new();

    let admit = |state: Expr,
                     trace: Vec<StepChoice>,
                     seen: &mut HashSet<Canon>,
                     heap: &mut BinaryHeap<Reverse<(usize, u64)>>,
                     store: &mut Vec<(Expr, Vec<StepChoice>)>,
                     out: &mut ExploreOutcome| {
        if trace.len() > opts.budget {
            return;
        }
        if !seen.insert(state.canonical(true)) {
            return;
        }
        if seen.len() > opts.frontier_cap {
            out.truncated = true;
            return;
        }
        if state.is_result() {
            out.results.push(Reached {
                result: state.clone(),
                trace: trace.clone(),
            });
        }
        heap.push(Reverse((trace.len(), store.len() as u64)));
        store.push((state, trace));
    };

    admit(e.clone(), Vec::new(), &mut seen, &mut heap, &mut store, &mut out);
    if !e.is_result() {
        for k in 0..=opts.max_drive_fuel {
            if let Ok((r, tr)) = crate::stream::drive(e, k, table) {
                if tr.len() > opts.budget {
                    break;
                }
                admit(r, tr, &mut seen, &mut heap, &mut store, &mut out);
            }
        }
    }

    while let Some(Reverse((depth, idx))) = heap.pop() {
        if depth >= opts.budget {
            continue;
        }
        let (state, trace) = store[idx as usize].clone();
        for c in enumerate_steps(&state, table) {
            if c.rule == Rule::Approximate {
                let sub = subterm(&state, &c.path).expect("eval path");
                if matches!(sub, Expr::Bot) {
                    continue;
                }
                if let Some(last) = trace.last() {
                    if last.rule == Rule::Approximate && last.path == c.path {
                        continue;
                    }
                }
            }
            let Ok(next) = step(&state, &c, table) else {
                continue;
            };
            let mut t = trace.clone();
            t.push(c);
            admit(next, t, &mut seen, &mut heap, &mut store, &mut out);
        }
    }
    out.states = seen.len();
    out.results.sort_by_cached_key(|r| r.result.canonical(true));
    out
}

/// Some non-⊥ result reachable within `budget` primitive steps, if found.
pub fn converges(e: &Expr, budget: usize, table: &SymbolTable) -> Option<Reached> {
    for k in 0..=crate::stream::MAX_DRIVE_FUEL {
        match crate::stream::drive(e, k, table) {
            Ok((_, tr)) if tr.len() > budget => break,
            Ok((r, tr)) if !matches!(r, Expr::Bot) => return Some(Reached { result: r, trace: tr }),
            _ => {}
        }
    }
    let opts = ExploreOptions {
        budget: budget.min(12),
        frontier_cap: 20_000,
        max_drive_fuel: 0,
    };
    explore(e, &opts, table)
        .results
        .into_iter()
        .find(|r| !matches!(r.result, Expr::Bot))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::Symbol;

    fn n(k: &str) -> Expr {
        Expr::sym(k)
    }

    fn t() -> SymbolTable {
        SymbolTable::discrete()
    }

    #[test]
    fn join_examples() {
        let a = Expr::Set(vec![Expr::pair(n("1"), n("2"))]);
        let b = Expr::Set(vec![Expr::pair(n("2"), n("3"))]);
        let j = result_join(&a, &b, &t());
        let want = Expr::Set(vec![Expr::pair(n("1"), n("2")), Expr::pair(n("2"), n("3"))]);
        assert!(j.same_result(&want));
        assert_eq!(result_join(&n("x"), &Expr::Bot, &t()), n("x"));
        let tf = result_join(&Expr::Sym(Symbol::tt()), &Expr::Sym(Symbol::ff()), &t());
        assert_eq!(tf, Expr::Top);
        let lam = Expr::lam("x", Expr::var("x"));
        assert_eq!(result_join(&lam, &Expr::pair(n("1"), n("2")), &t()), Expr::Top);
        assert_eq!(result_join(&Expr::BotV, &n("1"), &t()), n("1"));
    }

    #[test]
    fn lambda_join_is_commutative() {
        let f = Expr::lam("x", Expr::pair(Expr::var("x"), n("a")));
        let g = Expr::lam("y", n("b"));
        let fg = result_join(&f, &g, &t());
        let gf = result_join(&g, &f, &t());
        assert!(fg.alpha_eq(&gf));
        assert!(result_join(&f, &f, &t()).alpha_eq(&f));
    }

    #[test]
    fn comp_lift_examples() {
        assert_eq!(comp_lift(Expr::Bot, n("5")), Expr::Bot);
        assert_eq!(comp_lift(Expr::Top, Expr::Bot), Expr::Top);
        assert_eq!(comp_lift(n("1"), n("2")), Expr::pair(n("1"), n("2")));
        assert_eq!(comp_lift(n("1"), Expr::Bot), Expr::Bot);
    }

    #[test]
    fn step_examples() {
        let two = Symbol::name("2");
        let succ = Expr::Sym(Symbol::string_lit("success"));
        let e = Expr::let_sym(two.clone(), Expr::Sym(two), succ.clone());
        let r = step(&e, &StepChoice::new(Rule::LetSymThreshold, vec![]), &t()).unwrap();
        assert_eq!(r, succ);

        let j = Expr::join(Expr::Bot, succ.clone());
        let r = step(&j, &StepChoice::new(Rule::JoinOfResults, vec![]), &t()).unwrap();
        assert_eq!(r, succ);

        let r = step(&j, &StepChoice::new(Rule::Approximate, vec![]), &t()).unwrap();
        assert_eq!(r, Expr::Bot);

        let s = Expr::Set(vec![n("1"), Expr::Bot, n("2")]);
        let r = step(&s, &StepChoice::new(Rule::SetDropBot, vec![]), &t()).unwrap();
        assert_eq!(r, Expr::Set(vec![n("1"), n("2")]));

        let empty = Expr::big_join("x", Expr::Set(vec![]), Expr::var("x"));
        let r = step(&empty, &StepChoice::new(Rule::BigJoinExpand, vec![]), &t()).unwrap();
        assert_eq!(r, Expr::Bot);

        assert!(step(&s, &StepChoice::new(Rule::Beta, vec![]), &t()).is_err());
        let lt = Expr::let_sym(Symbol::name("2"), n("3"), succ);
        assert!(step(&lt, &StepChoice::new(Rule::LetSymThreshold, vec![]), &t()).is_err());
    }

    #[test]
    fn enumerate_examples() {
        let v = Expr::pair(n("1"), n("2"));
        assert!(enumerate_steps(&v, &t())
            .iter()
            .all(|c| c.rule == Rule::Approximate));
        let id = |x: &str| Expr::lam(x, Expr::var(x));
        let two = Expr::join(Expr::app(id("x"), n("1")), Expr::app(id("y"), n("2")));
        let non_approx = enumerate_steps(&two, &t())
            .into_iter()
            .filter(|c| c.rule != Rule::Approximate)
            .count();
        assert!(non_approx >= 2);
        let top = Expr::pair(Expr::Top, n("1"));
        assert!(enumerate_steps(&top, &t())
            .iter()
            .any(|c| c.rule == Rule::TopPropagate));
    }

    #[test]
    fn trace_roundtrip() {
        let tr = vec![
            StepChoice::new(Rule::Beta, vec![]),
            StepChoice::new(Rule::Approximate, vec![0, 1, 2]),
        ];
        let text = format_trace(&tr);
        assert_eq!(text, "(Beta, .)\n(Approximate, 0.1.2)\n");
        assert_eq!(parse_trace(&text).unwrap(), tr);
    }

    #[test]
    fn explore_small() {
        let succ = Expr::Sym(Symbol::string_lit("success"));
        let j = Expr::join(Expr::Bot, succ.clone());
        let out = explore(
            &j,
            &ExploreOptions {
                budget: 2,
                ..Default::default()
            },
            &t(),
        );
        assert!(out.contains(&succ));
        assert!(out.contains(&Expr::Bot));
        for r in &out.results {
            assert!(replay(&j, &r.trace, &t()).unwrap().same_result(&r.result));
        }
        assert!(converges(&Expr::Bot, 10, &t()).is_none());
    }
}
