//! Core abstract syntax: expressions, results, symbols, substitution,
//! alpha-equivalence and evaluation contexts.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::error::Error;

pub type Name = Arc<str>;

/// A base constant. Names (`'nil`, `true`), string literals and unit are all
/// symbols; string literals keep their quotes in the stored text so the two
/// namespaces never collide.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn name(s: &str) -> Self {
        Symbol(Arc::from(s))
    }

    pub fn string_lit(s: &str) -> Self {
        Symbol(Arc::from(format!("\"{s}\"").as_str()))
    }

    pub fn unit() -> Self {
        Symbol(Arc::from("()"))
    }

    pub fn tt() -> Self {
        Symbol::name("true")
    }

    pub fn ff() -> Self {
        Symbol::name("false")
    }

    /// Raw stored text (`nil`, `"accepted"`, `()`).
    pub fn text(&self) -> &str {
        &self.0
    }

    pub fn is_string(&self) -> bool {
        self.0.starts_with('"')
    }

    /// Parses the token forms accepted in symbol tables and formula text:
    /// `'name`, bare `name`, `"string"`, `()`.
    pub fn parse_token(tok: &str) -> Option<Symbol> {
        let tok = tok.trim();
        if tok == "()" {
            return Some(Symbol::unit());
        }
        if tok.len() >= 2 && tok.starts_with('"') && tok.ends_with('"') {
            return Some(Symbol(Arc::from(tok)));
        }
        let bare = tok.strip_prefix('\'').unwrap_or(tok);
        if !bare.is_empty()
            && bare
                .chars()
                .all(|c| c.is_alphanumeric() || c == '_' || c == '\'')
        {
            Some(Symbol::name(bare))
        } else {
            None
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.text();
        if t.starts_with('"') || t == "()" || t == "true" || t == "false" {
            f.write_str(t)
        } else {
            write!(f, "'{t}")
        }
    }
}

/// Partial join on symbols. Distinct symbols are incomparable unless the
/// table says otherwise.
#[derive(Clone, Debug, Default)]
pub struct SymbolTable {
    joins: HashMap<(Symbol, Symbol), Symbol>,
}

impl SymbolTable {
    pub fn discrete() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, a: Symbol, b: Symbol, j: Symbol) {
        self.joins.insert((a.clone(), b.clone()), j.clone());
        self.joins.insert((b, a), j);
    }

    pub fn join(&self, a: &Symbol, b: &Symbol) -> Option<Symbol> {
        if let Some(j) = self.joins.get(&(a.clone(), b.clone())) {
            return Some(j.clone());
        }
        if a == b {
            Some(a.clone())
        } else {
            None
        }
    }

    /// `s1 <= s2` iff `s1 join s2 = s2`.
    pub fn leq(&self, a: &Symbol, b: &Symbol) -> bool {
        self.join(a, b).as_ref() == Some(b)
    }

    /// Every symbol mentioned by the table.
    pub fn symbols(&self) -> Vec<Symbol> {
        let mut out = BTreeSet::new();
        for ((a, b), c) in &self.joins {
            out.insert(a.clone());
            out.insert(b.clone());
            out.insert(c.clone());
        }
        out.into_iter().collect()
    }

    /// Parses lines of the form `sym1 sym2 -> sym3`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut table = SymbolTable::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::SymbolTable {
                line: i + 1,
                msg: format!("expected `sym1 sym2 -> sym3`, got `{line}`"),
            };
            let (lhs, rhs) = line.split_once("->").ok_or_else(bad)?;
            let parts: Vec<&str> = lhs.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(bad());
            }
            let a = Symbol::parse_token(parts[0]).ok_or_else(bad)?;
            let b = Symbol::parse_token(parts[1]).ok_or_else(bad)?;
            let c = Symbol::parse_token(rhs).ok_or_else(bad)?;
            table.insert(a, b, c);
        }
        table.check_laws()?;
        Ok(table)
    }

    /// Idempotence, commutativity and associativity over all mentioned
    /// symbols. Commutativity holds by construction of `insert`.
    pub fn check_laws(&self) -> Result<(), Error> {
        let syms = self.symbols();
        for s in &syms {
            if self.join(s, s).as_ref() != Some(s) {
                return Err(Error::SymbolLaw(format!("{s} join {s} is not {s}")));
            }
        }
        for a in &syms {
            for b in &syms {
                if self.join(a, b) != self.join(b, a) {
                    return Err(Error::SymbolLaw(format!("{a} and {b} do not commute")));
                }
                for c in &syms {
                    let left = self.join(a, b).and_then(|ab| self.join(&ab, c));
                    let right = self.join(b, c).and_then(|bc| self.join(a, &bc));
                    if left != right {
                        return Err(Error::SymbolLaw(format!(
                            "join of {a}, {b}, {c} is not associative"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Expressions. Equality and hashing are up to alpha-equivalence.
#[derive(Clone, Debug)]
pub enum Expr {
    Bot,
    Top,
    BotV,
    Var(Name),
    Lam(Name, Box<Expr>),
    Pair(Box<Expr>, Box<Expr>),
    Sym(Symbol),
    Set(Vec<Expr>),
    App(Box<Expr>, Box<Expr>),
    LetPair(Name, Name, Box<Expr>, Box<Expr>),
    LetSym(Symbol, Box<Expr>, Box<Expr>),
    BigJoin(Name, Box<Expr>, Box<Expr>),
    Join(Box<Expr>, Box<Expr>),
}

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

impl Expr {
    pub fn var(x: &str) -> Expr {
        Expr::Var(name(x))
    }

    pub fn lam(x: &str, body: Expr) -> Expr {
        Expr::Lam(name(x), Box::new(body))
    }

    pub fn app(f: Expr, a: Expr) -> Expr {
        Expr::App(Box::new(f), Box::new(a))
    }

    pub fn pair(a: Expr, b: Expr) -> Expr {
        Expr::Pair(Box::new(a), Box::new(b))
    }

    pub fn join(a: Expr, b: Expr) -> Expr {
        Expr::Join(Box::new(a), Box::new(b))
    }

    pub fn sym(s: &str) -> Expr {
        Expr::Sym(Symbol::name(s))
    }

    pub fn let_sym(s: Symbol, scrut: Expr, body: Expr) -> Expr {
        Expr::LetSym(s, Box::new(scrut), Box::new(body))
    }

    pub fn let_pair(x1: &str, x2: &str, scrut: Expr, body: Expr) -> Expr {
        Expr::LetPair(name(x1), name(x2), Box::new(scrut), Box::new(body))
    }

    pub fn big_join(x: &str, src: Expr, body: Expr) -> Expr {
        Expr::BigJoin(name(x), Box::new(src), Box::new(body))
    }

    /// Values: variables, `botv`, lambdas, symbols and pairs/sets of values.
    pub fn is_value(&self) -> bool {
        match self {
            Expr::Var(_) | Expr::BotV | Expr::Lam(..) | Expr::Sym(_) => true,
            Expr::Pair(a, b) => a.is_value() && b.is_value(),
            Expr::Set(es) => es.iter().all(Expr::is_value),
            _ => false,
        }
    }

    pub fn is_result(&self) -> bool {
        matches!(self, Expr::Bot | Expr::Top) || self.is_value()
    }

    /// True when no lambda occurs anywhere in the term.
    pub fn is_first_order(&self) -> bool {
        match self {
            Expr::Lam(..) => false,
            Expr::Pair(a, b) | Expr::App(a, b) | Expr::Join(a, b) => {
                a.is_first_order() && b.is_first_order()
            }
            Expr::Set(es) => es.iter().all(Expr::is_first_order),
            Expr::LetPair(_, _, a, b) | Expr::LetSym(_, a, b) | Expr::BigJoin(_, a, b) => {
                a.is_first_order() && b.is_first_order()
            }
            _ => true,
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    fn collect_free(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        match self {
            Expr::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Expr::Lam(x, b) => {
                bound.push(x.clone());
                b.collect_free(bound, out);
                bound.pop();
            }
            Expr::Pair(a, b) | Expr::App(a, b) | Expr::Join(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Expr::Set(es) => es.iter().for_each(|e| e.collect_free(bound, out)),
            Expr::LetPair(x1, x2, s, b) => {
                s.collect_free(bound, out);
                bound.push(x1.clone());
                bound.push(x2.clone());
                b.collect_free(bound, out);
                bound.pop();
                bound.pop();
            }
            Expr::LetSym(_, s, b) => {
                s.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Expr::BigJoin(x, s, b) => {
                s.collect_free(bound, out);
                bound.push(x.clone());
                b.collect_free(bound, out);
                bound.pop();
            }
            Expr::Bot | Expr::Top | Expr::BotV | Expr::Sym(_) => {}
        }
    }

    /// Symbols occurring in the term.
    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.walk(&mut |e| match e {
            Expr::Sym(s) | Expr::LetSym(s, ..) => {
                out.insert(s.clone());
            }
            _ => {}
        });
        out
    }

    fn walk(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Lam(_, b) => b.walk(f),
            Expr::Pair(a, b) | Expr::App(a, b) | Expr::Join(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::Set(es) => es.iter().for_each(|e| e.walk(f)),
            Expr::LetPair(_, _, a, b) | Expr::LetSym(_, a, b) | Expr::BigJoin(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            _ => {}
        }
    }

    /// Number of syntax nodes.
    pub fn size(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }

    /// Capture-avoiding substitution `self[v/x]`.
    pub fn substitute(&self, x: &str, v: &Expr) -> Expr {
        let fv = v.free_vars();
        subst(self, x, v, &fv)
    }

    pub fn alpha_eq(&self, other: &Expr) -> bool {
        canon(self, false) == canon(other, false)
    }

    /// Nameless form, optionally with set elements sorted and deduplicated.
    /// The sorted form identifies results that differ only in set order.
    pub fn canonical(&self, sort_sets: bool) -> Canon {
        canon(self, sort_sets)
    }

    /// Result identity used for deduplication: alpha-equivalence with set
    /// literals treated as unordered.
    pub fn same_result(&self, other: &Expr) -> bool {
        canon(self, true) == canon(other, true)
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.alpha_eq(other)
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        canon(self, false).hash(state)
    }
}

fn fresh(base: &str, avoid: &BTreeSet<Name>) -> Name {
    let mut cand = format!("{base}'");
    while avoid.iter().any(|n| **n == *cand) {
        cand.push('\'');
    }
    name(&cand)
}

fn rename_binder(binder: &Name, body: &Expr, fv: &BTreeSet<Name>) -> (Name, Expr) {
    let mut avoid = fv.clone();
    avoid.extend(body.free_vars());
    let nb = fresh(binder, &avoid);
    let renamed = body.substitute(binder, &Expr::Var(nb.clone()));
    (nb, renamed)
}

fn subst(e: &Expr, x: &str, v: &Expr, fv: &BTreeSet<Name>) -> Expr {
    let go = |e: &Expr| subst(e, x, v, fv);
    match e {
        Expr::Var(y) => {
            if &**y == x {
                v.clone()
            } else {
                e.clone()
            }
        }
        Expr::Bot | Expr::Top | Expr::BotV | Expr::Sym(_) => e.clone(),
        Expr::Lam(y, b) => {
            if &**y == x {
                e.clone()
            } else if fv.contains(y) {
                let (ny, nb) = rename_binder(y, b, fv);
                Expr::Lam(ny, Box::new(go(&nb)))
            } else {
                Expr::Lam(y.clone(), Box::new(go(b)))
            }
        }
        Expr::Pair(a, b) => Expr::Pair(Box::new(go(a)), Box::new(go(b))),
        Expr::App(a, b) => Expr::App(Box::new(go(a)), Box::new(go(b))),
        Expr::Join(a, b) => Expr::Join(Box::new(go(a)), Box::new(go(b))),
        Expr::Set(es) => Expr::Set(es.iter().map(go).collect()),
        Expr::LetSym(s, a, b) => Expr::LetSym(s.clone(), Box::new(go(a)), Box::new(go(b))),
        Expr::LetPair(x1, x2, s, b) => {
            let s2 = go(s);
            if &**x1 == x || &**x2 == x {
                return Expr::LetPair(x1.clone(), x2.clone(), Box::new(s2), b.clone());
            }
            let (mut n1, mut n2, mut body) = (x1.clone(), x2.clone(), (**b).clone());
            if fv.contains(&n1) {
                let (a, bb) = rename_binder(&n1, &body, fv);
                n1 = a;
                body = bb;
            }
            if fv.contains(&n2) {
                let mut avoid = fv.clone();
                avoid.insert(n1.clone());
                avoid.extend(body.free_vars());
                let nb = fresh(&n2, &avoid);
                body = body.substitute(&n2, &Expr::Var(nb.clone()));
                n2 = nb;
            }
            Expr::LetPair(n1, n2, Box::new(s2), Box::new(go(&body)))
        }
        Expr::BigJoin(y, s, b) => {
            let s2 = go(s);
            if &**y == x {
                Expr::BigJoin(y.clone(), Box::new(s2), b.clone())
            } else if fv.contains(y) {
                let (ny, nb) = rename_binder(y, b, fv);
                Expr::BigJoin(ny, Box::new(s2), Box::new(go(&nb)))
            } else {
                Expr::BigJoin(y.clone(), Box::new(s2), Box::new(go(b)))
            }
        }
    }
}

/// De Bruijn style nameless term.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Canon {
    Bot,
    Top,
    BotV,
    Bound(usize),
    Free(Name),
    Lam(Box<Canon>),
    Pair(Box<Canon>, Box<Canon>),
    Sym(Symbol),
    Set(Vec<Canon>),
    App(Box<Canon>, Box<Canon>),
    LetPair(Box<Canon>, Box<Canon>),
    LetSym(Symbol, Box<Canon>, Box<Canon>),
    BigJoin(Box<Canon>, Box<Canon>),
    Join(Box<Canon>, Box<Canon>),
}

fn canon(e: &Expr, sort: bool) -> Canon {
    fn go(e: &Expr, env: &mut Vec<Name>, sort: bool) -> Canon {
        let b = |c: Canon| Box::new(c);
        match e {
            Expr::Bot => Canon::Bot,
            Expr::Top => Canon::Top,
            Expr::BotV => Canon::BotV,
            Expr::Sym(s) => Canon::Sym(s.clone()),
            Expr::Var(x) => match env.iter().rev().position(|y| y == x) {
                Some(i) => Canon::Bound(i),
                None => Canon::Free(x.clone()),
            },
            Expr::Lam(x, body) => {
                env.push(x.clone());
                let c = go(body, env, sort);
                env.pop();
                Canon::Lam(b(c))
            }
            Expr::Pair(x, y) => Canon::Pair(b(go(x, env, sort)), b(go(y, env, sort))),
            Expr::App(x, y) => Canon::App(b(go(x, env, sort)), b(go(y, env, sort))),
            Expr::Join(x, y) => Canon::Join(b(go(x, env, sort)), b(go(y, env, sort))),
            Expr::Set(es) => {
                let mut cs: Vec<Canon> = es.iter().map(|e| go(e, env, sort)).collect();
                if sort {
                    cs.sort();
                    cs.dedup();
                }
                Canon::Set(cs)
            }
            Expr::LetSym(s, x, y) => {
                Canon::LetSym(s.clone(), b(go(x, env, sort)), b(go(y, env, sort)))
            }
            Expr::LetPair(x1, x2, s, body) => {
                let cs = go(s, env, sort);
                env.push(x1.clone());
                env.push(x2.clone());
                let cb = go(body, env, sort);
                env.pop();
                env.pop();
                Canon::LetPair(b(cs), b(cb))
            }
            Expr::BigJoin(x, s, body) => {
                let cs = go(s, env, sort);
                env.push(x.clone());
                let cb = go(body, env, sort);
                env.pop();
                Canon::BigJoin(b(cs), b(cb))
            }
        }
    }
    go(e, &mut Vec::new(), sort)
}

/// One frame of an evaluation context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Frame {
    /// `(E, e)`
    PairL(Expr),
    /// `(v, E)`
    PairR(Expr),
    /// `{e1, .., E, .., en}`
    SetAt { before: Vec<Expr>, after: Vec<Expr> },
    /// `E e`
    AppL(Expr),
    /// `v E`
    AppR(Expr),
    /// `let (x1, x2) = E in e`
    LetPairScrut(Name, Name, Expr),
    /// `let s = E in e`
    LetSymScrut(Symbol, Expr),
    /// `for x in E join e`
    BigJoinSrc(Name, Expr),
    /// `E \/ e`
    JoinL(Expr),
    /// `e \/ E`
    JoinR(Expr),
}

impl Frame {
    fn plug(&self, e: Expr) -> Expr {
        let b = Box::new;
        match self {
            Frame::PairL(r) => Expr::Pair(b(e), b(r.clone())),
            Frame::PairR(l) => Expr::Pair(b(l.clone()), b(e)),
            Frame::SetAt { before, after } => {
                let mut es = before.clone();
                es.push(e);
                es.extend(after.iter().cloned());
                Expr::Set(es)
            }
            Frame::AppL(a) => Expr::App(b(e), b(a.clone())),
            Frame::AppR(f) => Expr::App(b(f.clone()), b(e)),
            Frame::LetPairScrut(x1, x2, body) => {
                Expr::LetPair(x1.clone(), x2.clone(), b(e), b(body.clone()))
            }
            Frame::LetSymScrut(s, body) => Expr::LetSym(s.clone(), b(e), b(body.clone())),
            Frame::BigJoinSrc(x, body) => Expr::BigJoin(x.clone(), b(e), b(body.clone())),
            Frame::JoinL(r) => Expr::Join(b(e), b(r.clone())),
            Frame::JoinR(l) => Expr::Join(b(l.clone()), b(e)),
        }
    }

    fn index(&self) -> usize {
        match self {
            Frame::PairR(_) | Frame::AppR(_) | Frame::JoinR(_) => 1,
            Frame::SetAt { before, .. } => before.len(),
            _ => 0,
        }
    }
}

/// A one-hole evaluation context, frames listed outermost first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EvalCtx {
    pub frames: Vec<Frame>,
}

impl EvalCtx {
    pub fn hole() -> Self {
        EvalCtx::default()
    }

    pub fn is_hole(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn plug(&self, e: Expr) -> Expr {
        self.frames.iter().rev().fold(e, |acc, f| f.plug(acc))
    }

    /// Child indices from the root to the hole.
    pub fn path(&self) -> Vec<usize> {
        self.frames.iter().map(Frame::index).collect()
    }

    /// Rebuilds the context of `e` whose hole sits at `path`, provided the
    /// path only descends through evaluation positions.
    pub fn from_path(e: &Expr, path: &[usize]) -> Option<(EvalCtx, Expr)> {
        let mut frames = Vec::with_capacity(path.len());
        let mut cur = e;
        for &i in path {
            let (frame, next): (Frame, &Expr) = match (cur, i) {
                (Expr::Pair(a, b), 0) => (Frame::PairL((**b).clone()), a),
                (Expr::Pair(a, b), 1) if a.is_value() => (Frame::PairR((**a).clone()), b),
                (Expr::Set(es), i) if i < es.len() => (
                    Frame::SetAt {
                        before: es[..i].to_vec(),
                        after: es[i + 1..].to_vec(),
                    },
                    &es[i],
                ),
                (Expr::App(f, a), 0) => (Frame::AppL((**a).clone()), f),
                (Expr::App(f, a), 1) if f.is_value() => (Frame::AppR((**f).clone()), a),
                (Expr::LetPair(x1, x2, s, b), 0) => {
                    (Frame::LetPairScrut(x1.clone(), x2.clone(), (**b).clone()), s)
                }
                (Expr::LetSym(sy, s, b), 0) => (Frame::LetSymScrut(sy.clone(), (**b).clone()), s),
                (Expr::BigJoin(x, s, b), 0) => (Frame::BigJoinSrc(x.clone(), (**b).clone()), s),
                (Expr::Join(a, b), 0) => (Frame::JoinL((**b).clone()), a),
                (Expr::Join(a, b), 1) => (Frame::JoinR((**a).clone()), b),
                _ => return None,
            };
            frames.push(frame);
            cur = next;
        }
        Some((EvalCtx { frames }, cur.clone()))
    }
}

/// Paths of every evaluation-context position of `e`, root first.
pub fn eval_paths(e: &Expr) -> Vec<Vec<usize>> {
    fn go(e: &Expr, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(path.clone());
        let child = |i: usize, c: &Expr, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>| {
            path.push(i);
            go(c, path, out);
            path.pop();
        };
        match e {
            Expr::Pair(a, b) | Expr::App(a, b) => {
                child(0, a, path, out);
                if a.is_value() {
                    child(1, b, path, out);
                }
            }
            Expr::Join(a, b) => {
                child(0, a, path, out);
                child(1, b, path, out);
            }
            Expr::Set(es) => {
                for (i, c) in es.iter().enumerate() {
                    child(i, c, path, out);
                }
            }
            Expr::LetPair(_, _, s, _) | Expr::LetSym(_, s, _) | Expr::BigJoin(_, s, _) => {
                child(0, s, path, out)
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    go(e, &mut Vec::new(), &mut out);
    out
}

pub fn subterm<'a>(e: &'a Expr, path: &[usize]) -> Option<&'a Expr> {
    let mut cur = e;
    for &i in path {
        cur = match (cur, i) {
            (Expr::Pair(a, _), 0) | (Expr::App(a, _), 0) | (Expr::Join(a, _), 0) => a,
            (Expr::Pair(_, b), 1) | (Expr::App(_, b), 1) | (Expr::Join(_, b), 1) => b,
            (Expr::Set(es), i) => es.get(i)?,
            (Expr::LetPair(_, _, s, _), 0)
            | (Expr::LetSym(_, s, _), 0)
            | (Expr::BigJoin(_, s, _), 0) => s,
            _ => return None,
        };
    }
    Some(cur)
}

/// Replaces the subterm at `path`.
pub fn replace_at(e: &Expr, path: &[usize], new: Expr) -> Expr {
    let Some((&i, rest)) = path.split_first() else {
        return new;
    };
    let b = Box::new;
    match (e, i) {
        (Expr::Pair(x, y), 0) => Expr::Pair(b(replace_at(x, rest, new)), y.clone()),
        (Expr::Pair(x, y), _) => Expr::Pair(x.clone(), b(replace_at(y, rest, new))),
        (Expr::App(x, y), 0) => Expr::App(b(replace_at(x, rest, new)), y.clone()),
        (Expr::App(x, y), _) => Expr::App(x.clone(), b(replace_at(y, rest, new))),
        (Expr::Join(x, y), 0) => Expr::Join(b(replace_at(x, rest, new)), y.clone()),
        (Expr::Join(x, y), _) => Expr::Join(x.clone(), b(replace_at(y, rest, new))),
        (Expr::Set(es), i) => {
            let mut es = es.clone();
            es[i] = replace_at(&es[i], rest, new);
            Expr::Set(es)
        }
        (Expr::LetPair(x1, x2, s, body), _) => {
            Expr::LetPair(x1.clone(), x2.clone(), b(replace_at(s, rest, new)), body.clone())
        }
        (Expr::LetSym(sy, s, body), _) => {
            Expr::LetSym(sy.clone(), b(replace_at(s, rest, new)), body.clone())
        }
        (Expr::BigJoin(x, s, body), _) => {
            Expr::BigJoin(x.clone(), b(replace_at(s, rest, new)), body.clone())
        }
        _ => e.clone(),
    }
}

/// The non-approximation rule that fires at the root of `e`, if any.
/// `E[top]` propagation is not a root redex and is handled separately.
pub fn root_redex(e: &Expr, table: &SymbolTable) -> Option<RedexKind> {
    match e {
        Expr::App(f, a) if matches!(**f, Expr::Lam(..)) && a.is_value() => Some(RedexKind::Beta),
        Expr::LetPair(_, _, s, _) if matches!(**s, Expr::Pair(..)) && s.is_value() => {
            Some(RedexKind::LetPairBeta)
        }
        Expr::LetSym(s, scrut, _) => match &**scrut {
            Expr::Sym(s2) if table.leq(s, s2) => Some(RedexKind::LetSymThreshold),
            _ => None,
        },
        Expr::BigJoin(_, s, _) if matches!(**s, Expr::Set(_)) && s.is_value() => {
            Some(RedexKind::BigJoinExpand)
        }
        Expr::Join(a, b) if a.is_result() && b.is_result() => Some(RedexKind::JoinOfResults),
        Expr::Set(es) if es.iter().any(|e| matches!(e, Expr::Bot)) => Some(RedexKind::SetDropBot),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RedexKind {
    Beta,
    LetPairBeta,
    LetSymThreshold,
    BigJoinExpand,
    JoinOfResults,
    SetDropBot,
}

/// Every decomposition `E[e']` of a closed `e` where `e'` is a redex or a
/// `top` sitting under a non-empty context.
pub fn decompose(e: &Expr, table: &SymbolTable) -> Vec<(EvalCtx, Expr)> {
    let mut out = Vec::new();
    for p in eval_paths(e) {
        let sub = subterm(e, &p).expect("eval path is valid");
        let is_top_under_ctx = matches!(sub, Expr::Top) && !p.is_empty();
        if is_top_under_ctx || root_redex(sub, table).is_some() {
            if let Some(d) = EvalCtx::from_path(e, &p) {
                out.push(d);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(n: u32) -> Expr {
        Expr::Sym(Symbol::name(&n.to_string()))
    }

    #[test]
    fn substitute_examples() {
        let v = Expr::sym("v");
        let e = Expr::lam("y", Expr::var("x"));
        assert_eq!(e.substitute("x", &v), Expr::lam("y", v.clone()));
        let shadow = Expr::lam("x", Expr::var("x"));
        assert_eq!(shadow.substitute("x", &v), shadow);
        let p = Expr::pair(Expr::var("x"), Expr::var("x"));
        assert_eq!(p.substitute("x", &num(3)), Expr::pair(num(3), num(3)));
    }

    #[test]
    fn substitute_avoids_capture() {
        // (\y. x) [y/x] must not capture the free y
        let e = Expr::lam("y", Expr::var("x"));
        let out = e.substitute("x", &Expr::var("y"));
        match &out {
            Expr::Lam(b, body) => {
                assert_ne!(&**b, "y");
                assert_eq!(**body, Expr::var("y"));
            }
            _ => panic!("expected lambda"),
        }
        assert_eq!(out.free_vars().into_iter().collect::<Vec<_>>(), vec![name("y")]);
    }

    #[test]
    fn alpha_eq_examples() {
        assert!(Expr::lam("x", Expr::var("x")).alpha_eq(&Expr::lam("y", Expr::var("y"))));
        assert!(!Expr::lam("x", Expr::var("y")).alpha_eq(&Expr::lam("x", Expr::var("z"))));
        let a = Expr::app(Expr::lam("x", Expr::var("x")), num(3));
        let b = Expr::app(Expr::lam("w", Expr::var("w")), num(3));
        assert!(a.alpha_eq(&b));
    }

    #[test]
    fn decompose_examples() {
        let t = SymbolTable::discrete();
        let vals = Expr::join(Expr::pair(num(1), num(2)), Expr::pair(num(3), num(4)));
        let d = decompose(&vals, &t);
        assert_eq!(d.len(), 1);
        assert!(d[0].0.is_hole());

        let id = |x: &str| Expr::lam(x, Expr::var(x));
        let two = Expr::join(Expr::app(id("x"), num(1)), Expr::app(id("y"), num(2)));
        let d = decompose(&two, &t);
        assert_eq!(d.len(), 2);
        for (ctx, r) in &d {
            assert!(ctx.plug(r.clone()).alpha_eq(&two));
        }

        let lam = Expr::lam("x", Expr::app(id("y"), num(1)));
        assert!(decompose(&lam, &t).is_empty());
    }

    #[test]
    fn decompose_top_under_context() {
        let t = SymbolTable::discrete();
        let e = Expr::pair(Expr::Top, num(1));
        let d = decompose(&e, &t);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].0.path(), vec![0]);
        assert!(decompose(&Expr::Top, &t).is_empty());
    }

    #[test]
    fn symbol_order() {
        let t = SymbolTable::discrete();
        assert!(t.leq(&Symbol::tt(), &Symbol::tt()));
        assert!(!t.leq(&Symbol::tt(), &Symbol::ff()));
    }

    #[test]
    fn symbol_table_parse_and_laws() {
        let t = SymbolTable::parse("# chain\nlow mid -> mid\nmid high -> high\nlow high -> high\n")
            .unwrap();
        let low = Symbol::name("low");
        let high = Symbol::name("high");
        assert!(t.leq(&low, &high));
        assert!(!t.leq(&high, &low));
        for a in t.symbols() {
            for b in t.symbols() {
                if let Some(j) = t.join(&a, &b) {
                    assert!(t.leq(&a, &j));
                    assert!(t.leq(&b, &j));
                }
            }
        }
        assert!(SymbolTable::parse("a b -> c\n").is_err(), "non-associative table accepted");
        assert!(SymbolTable::parse("a b c\n").is_err());
    }

    #[test]
    fn symbol_display() {
        assert_eq!(Symbol::name("nil").to_string(), "'nil");
        assert_eq!(Symbol::tt().to_string(), "true");
        assert_eq!(Symbol::string_lit("ok").to_string(), "\"ok\"");
        assert_eq!(Symbol::unit().to_string(), "()");
        assert_eq!(Symbol::parse_token("'nil"), Some(Symbol::name("nil")));
    }
}
