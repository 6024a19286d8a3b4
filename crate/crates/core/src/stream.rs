//! Deterministic fuel-indexed evaluation. Every construct receives the same
//! fuel; each beta step hands its body one unit less.

use std::collections::HashMap;

use crate::error::Error;
use crate::reduce::{comp_lift, result_join, step, Rule, StepChoice};
use crate::syntax::{subterm, Canon, Expr, SymbolTable};

/// Highest fuel the convergence search drives a term to.
pub const MAX_DRIVE_FUEL: u32 = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observation {
    pub fuel: u32,
    pub result: Expr,
}

pub fn stream_eval(e: &Expr, n: u32, table: &SymbolTable) -> Expr {
    Evaluator {
        table,
        memo: HashMap::new(),
    }
    .eval(e, n)
}

/// Applications are memoized on their alpha-canonical form and fuel; the
/// cache lives for one top-level call, so results are unaffected.
struct Evaluator<'a> {
    table: &'a SymbolTable,
    memo: HashMap<(Canon, u32), Expr>,
}

impl Evaluator<'_> {
    fn eval(&mut self, e: &Expr, n: u32) -> Expr {
        if n == 0 {
            return Expr::Bot;
        }
        let table = self.table;
        match e {
            Expr::Bot
            | Expr::Top
            | Expr::BotV
            | Expr::Var(_)
            | Expr::Lam(..)
            | Expr::Sym(_) => e.clone(),
            Expr::Pair(a, b) => {
                let ra = self.eval(a, n);
                if !ra.is_value() {
                    return ra;
                }
                comp_lift(ra, self.eval(b, n))
            }
            Expr::Set(es) => {
                let mut vals = Vec::with_capacity(es.len());
                for x in es {
                    match self.eval(x, n) {
                        Expr::Top => return Expr::Top,
                        Expr::Bot => {}
                        v => vals.push(v),
                    }
                }
                Expr::Set(vals)
            }
            Expr::Join(a, b) => {
                let ra = self.eval(a, n);
                let rb = self.eval(b, n);
                result_join(&ra, &rb, table)
            }
            Expr::App(f, a) => match self.eval(f, n) {
                Expr::Lam(x, body) => {
                    let ra = self.eval(a, n);
                    if !ra.is_value() {
                        return ra;
                    }
                    let key = (
                        Expr::app(Expr::Lam(x.clone(), body.clone()), ra.clone()).canonical(false),
                        n,
                    );
                    if let Some(r) = self.memo.get(&key) {
                        return r.clone();
                    }
                    let r = self.eval(&body.substitute(&x, &ra), n - 1);
                    self.memo.insert(key, r.clone());
                    r
                }
                Expr::Bot | Expr::BotV => Expr::Bot,
                _ => Expr::Top,
            },
            Expr::LetPair(x1, x2, s, body) => match self.eval(s, n) {
                Expr::Pair(v1, v2) => self.eval(&body.substitute(x1, &v1).substitute(x2, &v2), n),
                Expr::Top => Expr::Top,
                _ => Expr::Bot,
            },
            Expr::LetSym(sym, s, body) => match self.eval(s, n) {
                Expr::Sym(s2) if table.leq(sym, &s2) => self.eval(body, n),
                Expr::Top => Expr::Top,
                _ => Expr::Bot,
            },
            Expr::BigJoin(x, s, body) => match self.eval(s, n) {
                Expr::Set(vs) => {
                    let mut acc = Expr::Bot;
                    for v in &vs {
                        let r = self.eval(&body.substitute(x, v), n);
                        if matches!(r, Expr::Top) {
                            return Expr::Top;
                        }
                        acc = result_join(&acc, &r, table);
                    }
                    acc
                }
                Expr::Top => Expr::Top,
                _ => Expr::Bot,
            },
        }
    }
}

/// `[streamEval(e, 0), .., streamEval(e, max_fuel)]`.
pub fn observe(e: &Expr, max_fuel: u32, table: &SymbolTable) -> Vec<Observation> {
    (0..=max_fuel)
        .map(|fuel| Observation {
            fuel,
            result: stream_eval(e, fuel, table),
        })
        .collect()
}

/// Keeps only observations that differ from their predecessor.
pub fn change_points(obs: &[Observation]) -> Vec<Observation> {
    let mut out: Vec<Observation> = Vec::new();
    for o in obs {
        match out.last() {
            Some(prev) if prev.result.same_result(&o.result) => {}
            _ => out.push(o.clone()),
        }
    }
    out
}

/// The streaming order on first-order results; `None` when a lambda is
/// involved.
pub fn obs_leq(r1: &Expr, r2: &Expr, table: &SymbolTable) -> Option<bool> {
    if !r1.is_first_order() || !r2.is_first_order() {
        return None;
    }
    Some(leq(r1, r2, table))
}

fn leq(a: &Expr, b: &Expr, t: &SymbolTable) -> bool {
    match (a, b) {
        (Expr::Bot, _) | (_, Expr::Top) => true,
        (_, Expr::Bot) | (Expr::Top, _) => false,
        (Expr::BotV, _) => true,
        (_, Expr::BotV) => false,
        (Expr::Sym(x), Expr::Sym(y)) => t.leq(x, y),
        (Expr::Pair(a1, a2), Expr::Pair(b1, b2)) => leq(a1, b1, t) && leq(a2, b2, t),
        (Expr::Set(xs), Expr::Set(ys)) => xs.iter().all(|x| ys.iter().any(|y| leq(x, y, t))),
        (Expr::Var(x), Expr::Var(y)) => x == y,
        _ => false,
    }
}

/// Reproduces `stream_eval(e, n)` as an explicit sequence of validated
/// primitive steps. Fails where the evaluator reports an error that no
/// reduction sequence reaches (applying a non-function).
pub fn drive(e: &Expr, n: u32, table: &SymbolTable) -> Result<(Expr, Vec<StepChoice>), Error> {
    let mut d = Driver {
        term: e.clone(),
        trace: Vec::new(),
        table,
    };
    d.go(&mut Vec::new(), n)?;
    Ok((d.term, d.trace))
}

struct Driver<'a> {
    term: Expr,
    trace: Vec<StepChoice>,
    table: &'a SymbolTable,
}

/// Whether the whole term collapsed to ⊤.
type Aborted = bool;

impl Driver<'_> {
    fn at(&self, path: &[usize]) -> Expr {
        subterm(&self.term, path).expect("driver path").clone()
    }

    fn apply(&mut self, rule: Rule, path: &[usize]) -> Result<(), Error> {
        let c = StepChoice::new(rule, path.to_vec());
        self.term = step(&self.term, &c, self.table)?;
        self.trace.push(c);
        Ok(())
    }

    fn approx(&mut self, path: &[usize]) -> Result<Aborted, Error> {
        if !matches!(self.at(path), Expr::Bot) {
            self.apply(Rule::Approximate, path)?;
        }
        Ok(false)
    }

    fn check_top(&mut self, path: &[usize]) -> Result<Aborted, Error> {
        if matches!(self.at(path), Expr::Top) {
            if !path.is_empty() {
                self.apply(Rule::TopPropagate, path)?;
            }
            return Ok(true);
        }
        Ok(false)
    }

    fn child(&mut self, path: &mut Vec<usize>, i: usize, n: u32) -> Result<(Aborted, Expr), Error> {
        path.push(i);
        let r = self.go(path, n);
        let out = match r {
            Ok(true) => Ok((true, Expr::Top)),
            Ok(false) => Ok((false, self.at(path))),
            Err(e) => Err(e),
        };
        path.pop();
        out
    }

    fn go(&mut self, path: &mut Vec<usize>, n: u32) -> Result<Aborted, Error> {
        if n == 0 {
            return self.approx(path);
        }
        let sub = self.at(path);
        match sub {
            Expr::Top => self.check_top(path),
            Expr::Bot | Expr::BotV | Expr::Var(_) | Expr::Lam(..) | Expr::Sym(_) => Ok(false),
            Expr::Pair(..) => {
                let (ab, l) = self.child(path, 0, n)?;
                if ab {
                    return Ok(true);
                }
                if !l.is_value() {
                    return self.approx(path);
                }
                let (ab, r) = self.child(path, 1, n)?;
                if ab {
                    return Ok(true);
                }
                if !r.is_value() {
                    return self.approx(path);
                }
                Ok(false)
            }
            Expr::Set(es) => {
                for i in 0..es.len() {
                    if self.child(path, i, n)?.0 {
                        return Ok(true);
                    }
                }
                while let Expr::Set(es) = self.at(path) {
                    if !es.iter().any(|e| matches!(e, Expr::Bot)) {
                        break;
                    }
                    self.apply(Rule::SetDropBot, path)?;
                }
                Ok(false)
            }
            Expr::Join(..) => {
                if self.child(path, 0, n)?.0 || self.child(path, 1, n)?.0 {
                    return Ok(true);
                }
                self.apply(Rule::JoinOfResults, path)?;
                self.check_top(path)
            }
            Expr::App(..) => {
                let (ab, f) = self.child(path, 0, n)?;
                if ab {
                    return Ok(true);
                }
                match f {
                    Expr::Lam(..) => {
                        let (ab, a) = self.child(path, 1, n)?;
                        if ab {
                            return Ok(true);
                        }
                        if !a.is_value() {
                            return self.approx(path);
                        }
                        self.apply(Rule::Beta, path)?;
                        self.go(path, n - 1)
                    }
                    Expr::Bot | Expr::BotV => self.approx(path),
                    _ => Err(Error::InvalidStep(
                        "application of a non-function has no reduction".into(),
                    )),
                }
            }
            Expr::LetPair(..) => {
                let (ab, s) = self.child(path, 0, n)?;
                if ab {
                    return Ok(true);
                }
                if matches!(s, Expr::Pair(..)) {
                    self.apply(Rule::LetPairBeta, path)?;
                    self.go(path, n)
                } else {
                    self.approx(path)
                }
            }
            Expr::LetSym(sym, ..) => {
                let (ab, s) = self.child(path, 0, n)?;
                if ab {
                    return Ok(true);
                }
                match s {
                    Expr::Sym(s2) if self.table.leq(&sym, &s2) => {
                        self.apply(Rule::LetSymThreshold, path)?;
                        self.go(path, n)
                    }
                    _ => self.approx(path),
                }
            }
            Expr::BigJoin(..) => {
                let (ab, s) = self.child(path, 0, n)?;
                if ab {
                    return Ok(true);
                }
                if matches!(s, Expr::Set(_)) {
                    self.apply(Rule::BigJoinExpand, path)?;
                    self.go(path, n)
                } else {
                    self.approx(path)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduce::replay;
    use crate::syntax::Symbol;

    fn t() -> SymbolTable {
        SymbolTable::discrete()
    }

    #[test]
    fn values_self_evaluate() {
        let v = Expr::pair(Expr::sym("a"), Expr::Set(vec![Expr::sym("b")]));
        assert_eq!(stream_eval(&v, 0, &t()), Expr::Bot);
        assert_eq!(stream_eval(&v, 1, &t()), v);
    }

    #[test]
    fn fuel_counts_betas() {
        let id = Expr::lam("x", Expr::var("x"));
        let e = Expr::app(id.clone(), Expr::app(id, Expr::sym("a")));
        assert_eq!(stream_eval(&e, 1, &t()), Expr::Bot);
        assert_eq!(stream_eval(&e, 2, &t()), Expr::sym("a"));
    }

    #[test]
    fn obs_leq_examples() {
        let t = t();
        let zero = Expr::pair(Expr::sym("zero"), Expr::BotV);
        let cons = Expr::pair(Expr::sym("cons"), Expr::pair(zero.clone(), Expr::BotV));
        assert_eq!(obs_leq(&Expr::BotV, &cons, &t), Some(true));
        let s0 = Expr::Set(vec![zero.clone()]);
        let two = Expr::pair(Expr::sym("succ"), Expr::pair(Expr::sym("succ"), zero.clone()));
        let s02 = Expr::Set(vec![zero, two]);
        assert_eq!(obs_leq(&s0, &s02, &t), Some(true));
        assert_eq!(obs_leq(&s02, &s0, &t), Some(false));
        let lam = Expr::lam("x", Expr::var("x"));
        assert_eq!(obs_leq(&lam, &lam, &t), None);
    }

    #[test]
    fn drive_agrees_and_replays() {
        let t = t();
        let succ = Expr::Sym(Symbol::string_lit("success"));
        let two = Symbol::name("2");
        let body = Expr::let_sym(two.clone(), Expr::var("x"), succ.clone());
        let e = Expr::big_join(
            "x",
            Expr::Set(vec![Expr::sym("0"), Expr::Sym(two)]),
            body,
        );
        for n in 0..4 {
            let (r, tr) = drive(&e, n, &t).unwrap();
            assert!(r.same_result(&stream_eval(&e, n, &t)));
            assert!(replay(&e, &tr, &t).unwrap().same_result(&r));
        }
        assert_eq!(stream_eval(&e, 1, &t), succ);
    }

    #[test]
    fn top_propagates() {
        let t = t();
        let e = Expr::pair(Expr::sym("a"), Expr::join(Expr::Sym(Symbol::tt()), Expr::Sym(Symbol::ff())));
        assert_eq!(stream_eval(&e, 1, &t), Expr::Top);
        let (r, tr) = drive(&e, 1, &t).unwrap();
        assert_eq!(r, Expr::Top);
        assert_eq!(tr.last().unwrap().rule, Rule::TopPropagate);
    }
}
