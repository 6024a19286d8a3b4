//! Formula assignment: derivation trees, a bounded goal-directed checker and
//! synthesis of evident formulae from observed results.

use std::collections::HashMap;
use std::fmt;

use crate::formula::{form_join, form_leq, lift_pair, lift_set, Form, FormEnv};
use crate::pretty::pretty;
use crate::stream::stream_eval;
use crate::syntax::{Expr, Name, Symbol, SymbolTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssignRule {
    TSub,
    TBot,
    TBotV,
    TTop,
    TVar,
    TJoin,
    TSym,
    TPair,
    TSet,
    TFun,
    TLetSym,
    TLetPair,
    TForIn,
    TApp,
    TLetPairTop,
    TLetSymTop,
    TAppLTop,
    TAppRTop,
    TForInTop,
}

impl fmt::Display for AssignRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AssignRule::TSub => "TSUB",
            AssignRule::TBot => "TBOT",
            AssignRule::TBotV => "TBOTV",
            AssignRule::TTop => "TTOP",
            AssignRule::TVar => "TVAR",
            AssignRule::TJoin => "TJOIN",
            AssignRule::TSym => "TSYM",
            AssignRule::TPair => "TPAIR",
            AssignRule::TSet => "TSET",
            AssignRule::TFun => "TFUN",
            AssignRule::TLetSym => "TLETSYM",
            AssignRule::TLetPair => "TLETPAIR",
            AssignRule::TForIn => "TFORIN",
            AssignRule::TApp => "TAPP",
            AssignRule::TLetPairTop => "TLETPAIRTOP",
            AssignRule::TLetSymTop => "TLETSYMTOP",
            AssignRule::TAppLTop => "TAPPLTOP",
            AssignRule::TAppRTop => "TAPPRTOP",
            AssignRule::TForInTop => "TFORINTOP",
        };
        f.write_str(s)
    }
}

/// A node `Γ ⊢ e : φ` justified by `rule` from `premises`.
#[derive(Clone, Debug)]
pub struct Derivation {
    pub env: FormEnv,
    pub expr: Expr,
    pub form: Form,
    pub rule: AssignRule,
    pub premises: Vec<Derivation>,
}

fn extend(env: &FormEnv, x: &Name, t: &Form) -> FormEnv {
    let mut env = env.clone();
    env.insert(x.clone(), t.clone());
    env
}

impl Derivation {
    fn leaf(env: &FormEnv, expr: &Expr, form: Form, rule: AssignRule) -> Self {
        Derivation {
            env: env.clone(),
            expr: expr.clone(),
            form,
            rule,
            premises: Vec::new(),
        }
    }

    fn node(env: &FormEnv, expr: &Expr, form: Form, rule: AssignRule, premises: Vec<Derivation>) -> Self {
        Derivation {
            env: env.clone(),
            expr: expr.clone(),
            form,
            rule,
            premises,
        }
    }

    /// Weakens the conclusion to `phi`, which must be below the current one.
    fn weaken(self, phi: &Form) -> Derivation {
        if &self.form == phi {
            return self;
        }
        let (env, expr) = (self.env.clone(), self.expr.clone());
        Derivation::node(&env, &expr, phi.clone(), AssignRule::TSub, vec![self])
    }

    pub fn node_count(&self) -> usize {
        1 + self.premises.iter().map(Derivation::node_count).sum::<usize>()
    }

    /// Re-checks every rule instance in the tree.
    pub fn verify(&self, table: &SymbolTable) -> Result<(), String> {
        for p in &self.premises {
            p.verify(table)?;
        }
        self.check_local(table)
            .map_err(|m| format!("{} at {} : {}: {m}", self.rule, short(&self.expr), self.form))
    }

    fn check_local(&self, t: &SymbolTable) -> Result<(), String> {
        use AssignRule::*;
        let ps = &self.premises;
        let arity = |n: usize| {
            if ps.len() == n {
                Ok(())
            } else {
                Err(format!("expected {n} premises"))
            }
        };
        let premise = |i: usize, env: &FormEnv, e: &Expr| -> Result<&Form, String> {
            let p = ps.get(i).ok_or("missing premise")?;
            if &p.env != env || &p.expr != e {
                return Err(format!("premise {i} has the wrong judgement subject"));
            }
            Ok(&p.form)
        };
        let want = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(msg.to_string()) };
        let env = &self.env;
        let phi = &self.form;
        match (self.rule, &self.expr) {
            (TSub, e) => {
                arity(1)?;
                let above = premise(0, env, e)?;
                want(form_leq(phi, above, t), "conclusion not below premise")
            }
            (TBot, _) => want(*phi == Form::Bot, "TBOT concludes bot"),
            (TBotV, e) => want(e.is_value() && *phi == Form::BotV, "TBOTV needs a value"),
            (TTop, Expr::Top) => want(*phi == Form::Top, "TTOP concludes top"),
            (TVar, Expr::Var(x)) => want(env.get(x) == Some(phi), "variable formula mismatch"),
            (TSym, Expr::Sym(s)) => want(*phi == Form::Sym(s.clone()), "symbol mismatch"),
            (TJoin, Expr::Join(a, b)) => {
                arity(2)?;
                let j = form_join(premise(0, env, a)?, premise(1, env, b)?, t);
                want(j == *phi, "join mismatch")
            }
            (TPair, Expr::Pair(a, b)) => {
                arity(2)?;
                let p = lift_pair(premise(0, env, a)?.clone(), premise(1, env, b)?.clone());
                want(p == *phi, "pair mismatch")
            }
            (TSet, Expr::Set(es)) => {
                arity(es.len())?;
                let mut acc = Form::Set(Vec::new());
                for (i, e) in es.iter().enumerate() {
                    acc = form_join(&acc, &lift_set(premise(i, env, e)?.clone()), t);
                }
                want(acc == *phi, "set mismatch")
            }
            (TFun, Expr::Lam(x, body)) => {
                let mut clauses = Vec::new();
                for p in ps {
                    let tau = p.env.get(x).ok_or("premise does not bind the parameter")?;
                    if !tau.is_value() {
                        return Err("parameter formula must be a value formula".into());
                    }
                    premise(clauses.len(), &extend(env, x, tau), body)?;
                    clauses.push((tau.clone(), p.form.clone()));
                }
                want(Form::fun(clauses) == *phi, "function formula mismatch")
            }
            (TLetSym, Expr::LetSym(s, a, body)) => {
                arity(2)?;
                want(*premise(0, env, a)? == Form::Sym(s.clone()), "scrutinee must have the pattern symbol")?;
                want(premise(1, env, body)? == phi, "body mismatch")
            }
            (TLetPair, Expr::LetPair(x1, x2, a, body)) => {
                arity(2)?;
                match premise(0, env, a)? {
                    Form::Pair(t1, t2) => {
                        let inner = extend(&extend(env, x1, t1), x2, t2);
                        want(premise(1, &inner, body)? == phi, "body mismatch")
                    }
                    _ => Err("scrutinee must have a pair formula".into()),
                }
            }
            (TForIn, Expr::BigJoin(x, a, body)) => match premise(0, env, a)? {
                Form::Set(ts) => {
                    arity(ts.len() + 1)?;
                    let mut acc = Form::Bot;
                    for (i, ti) in ts.iter().enumerate() {
                        acc = form_join(&acc, premise(i + 1, &extend(env, x, ti), body)?, t);
                    }
                    want(acc == *phi, "for-join mismatch")
                }
                _ => Err("source must have a set formula".into()),
            },
            (TApp, Expr::App(f, a)) => {
                arity(2)?;
                match premise(0, env, f)? {
                    Form::Fun(cs) if cs.len() == 1 => {
                        want(premise(1, env, a)? == &cs[0].0, "argument formula mismatch")?;
                        want(cs[0].1 == *phi, "result mismatch")
                    }
                    _ => Err("function premise must be a single arrow".into()),
                }
            }
            (TLetPairTop, Expr::LetPair(_, _, a, _))
            | (TLetSymTop, Expr::LetSym(_, a, _))
            | (TForInTop, Expr::BigJoin(_, a, _))
            | (TAppLTop, Expr::App(a, _)) => {
                arity(1)?;
                want(*premise(0, env, a)? == Form::Top && *phi == Form::Top, "needs a top premise")
            }
            (TAppRTop, Expr::App(f, a)) => {
                arity(2)?;
                want(premise(0, env, f)?.is_value(), "function premise must be a value formula")?;
                want(*premise(1, env, a)? == Form::Top && *phi == Form::Top, "needs a top argument")
            }
            _ => Err("rule does not apply to this expression".into()),
        }
    }

    fn write_tree(&self, f: &mut fmt::Formatter<'_>, indent: usize) -> fmt::Result {
        let env: Vec<String> = self.env.iter().map(|(x, t)| format!("{x}:{t}")).collect();
        writeln!(
            f,
            "{:indent$}{} [{}] ⊢ {} : {}",
            "",
            self.rule,
            env.join(", "),
            short(&self.expr),
            self.form,
            indent = indent
        )?;
        for p in &self.premises {
            p.write_tree(f, indent + 2)?;
        }
        Ok(())
    }
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_tree(f, 0)
    }
}

fn short(e: &Expr) -> String {
    let s = pretty(e);
    if s.chars().count() > 72 {
        let cut: String = s.chars().take(69).collect();
        format!("{cut}...")
    } else {
        s
    }
}

/// Search limits for the checker.
#[derive(Clone, Debug)]
pub struct CheckOptions {
    /// Height bound on intermediate formulae.
    pub height: usize,
    /// Candidates kept per subterm during synthesis.
    pub max_candidates: usize,
    /// Total subterm visits before giving up.
    pub max_work: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            height: 4,
            max_candidates: 8,
            max_work: 20_000,
        }
    }
}

impl CheckOptions {
    pub fn with_height(height: usize) -> Self {
        CheckOptions {
            height,
            ..Default::default()
        }
    }
}

struct Checker<'a> {
    table: &'a SymbolTable,
    opts: CheckOptions,
    probes: Vec<Form>,
    work: usize,
    /// Keyed by node address: every visited term is a subterm of the root.
    memo: HashMap<(FormEnv, usize), Vec<Derivation>>,
}

/// Searches for a derivation of `env ⊢ e : phi` using formulae of height at
/// most `depth`. `None` means none was found within the bounds.
pub fn check_assign(
    env: &FormEnv,
    e: &Expr,
    phi: &Form,
    depth: usize,
    table: &SymbolTable,
) -> Option<Derivation> {
    check_assign_with(env, e, phi, &CheckOptions::with_height(depth), table)
}

pub fn check_assign_with(
    env: &FormEnv,
    e: &Expr,
    phi: &Form,
    opts: &CheckOptions,
    table: &SymbolTable,
) -> Option<Derivation> {
    let mut syms: Vec<Symbol> = e.symbols().into_iter().collect();
    phi.symbols(&mut syms);
    env.values().for_each(|t| t.symbols(&mut syms));
    let mut probes = vec![Form::BotV];
    probes.extend(syms.into_iter().take(8).map(Form::Sym));
    let mut c = Checker {
        table,
        opts: opts.clone(),
        probes,
        work: 0,
        memo: HashMap::new(),
    };
    c.check(env, e, phi)
}

impl Checker<'_> {
    fn leq(&self, a: &Form, b: &Form) -> bool {
        form_leq(a, b, self.table)
    }

    fn join(&self, a: &Form, b: &Form) -> Form {
        form_join(a, b, self.table)
    }

    fn tick(&mut self) -> bool {
        self.work += 1;
        self.work <= self.opts.max_work
    }

    fn check(&mut self, env: &FormEnv, e: &Expr, phi: &Form) -> Option<Derivation> {
        if *phi == Form::Bot {
            return Some(Derivation::leaf(env, e, Form::Bot, AssignRule::TBot));
        }
        if !self.tick() {
            return None;
        }
        if let Some(d) = self.direct(env, e, phi) {
            return Some(d);
        }
        self.infer(env, e)
            .into_iter()
            .find(|d| self.leq(phi, &d.form))
            .map(|d| d.weaken(phi))
    }

    /// Rules chosen by the shape of the goal.
    fn direct(&mut self, env: &FormEnv, e: &Expr, phi: &Form) -> Option<Derivation> {
        use AssignRule::*;
        if *phi == Form::BotV && e.is_value() {
            return Some(Derivation::leaf(env, e, Form::BotV, TBotV));
        }
        match (e, phi) {
            (Expr::Top, _) => Some(Derivation::leaf(env, e, Form::Top, TTop).weaken(phi)),
            (Expr::Var(x), _) => {
                let t = env.get(x)?;
                self.leq(phi, t)
                    .then(|| Derivation::leaf(env, e, t.clone(), TVar).weaken(phi))
            }
            (Expr::Sym(s), _) => {
                let f = Form::Sym(s.clone());
                self.leq(phi, &f)
                    .then(|| Derivation::leaf(env, e, f, TSym).weaken(phi))
            }
            (Expr::Pair(a, b), Form::Pair(t1, t2)) => {
                let da = self.check(env, a, t1)?;
                let db = self.check(env, b, t2)?;
                Some(Derivation::node(env, e, phi.clone(), TPair, vec![da, db]))
            }
            (Expr::Set(es), Form::Set(ts)) => self.check_set(env, e, es, ts, phi),
            (Expr::Lam(x, body), Form::Fun(cs)) => {
                let mut ps = Vec::new();
                for (tau, out) in cs {
                    ps.push(self.check(&extend(env, x, tau), body, out)?);
                }
                Some(Derivation::node(env, e, phi.clone(), TFun, ps))
            }
            (Expr::Join(a, b), _) => self.check_join(env, e, a, b, phi),
            (Expr::App(f, a), _) => {
                let args: Vec<Derivation> = self
                    .infer(env, a)
                    .into_iter()
                    .filter(|d| d.form.is_value())
                    .collect();
                for da in args {
                    let clause = Form::arrow(da.form.clone(), phi.clone());
                    if let Some(df) = self.check(env, f, &clause) {
                        return Some(Derivation::node(env, e, phi.clone(), TApp, vec![df, da]));
                    }
                }
                None
            }
            (Expr::LetSym(s, a, body), _) => {
                let da = self.check(env, a, &Form::Sym(s.clone()))?;
                let db = self.check(env, body, phi)?;
                Some(Derivation::node(env, e, phi.clone(), TLetSym, vec![da, db]))
            }
            (Expr::LetPair(x1, x2, a, body), _) => {
                for da in self.infer(env, a) {
                    if let Form::Pair(t1, t2) = &da.form {
                        let inner = extend(&extend(env, x1, t1), x2, t2);
                        if let Some(db) = self.check(&inner, body, phi) {
                            return Some(Derivation::node(env, e, phi.clone(), TLetPair, vec![da, db]));
                        }
                    }
                }
                None
            }
            (Expr::BigJoin(x, a, body), _) => {
                for da in self.infer(env, a) {
                    if let Form::Set(ts) = &da.form {
                        // one element carries the whole goal
                        for i in 0..ts.len() {
                            let inner = extend(env, x, &ts[i]);
                            if let Some(di) = self.check(&inner, body, phi) {
                                let mut ps = vec![da.clone()];
                                for (j, tj) in ts.iter().enumerate() {
                                    ps.push(if j == i {
                                        di.clone()
                                    } else {
                                        Derivation::leaf(&extend(env, x, tj), body, Form::Bot, TBot)
                                    });
                                }
                                return Some(Derivation::node(env, e, phi.clone(), TForIn, ps));
                            }
                        }
                    }
                }
                None
            }
            _ => None,
        }
    }

    /// Each goal element is covered by some set element; search assignments.
    fn check_set(&mut self, env: &FormEnv, e: &Expr, es: &[Expr], ts: &[Form], phi: &Form) -> Option<Derivation> {
        let n = es.len();
        if n == 0 {
            return ts.is_empty().then(|| Derivation::node(env, e, Form::Set(Vec::new()), AssignRule::TSet, vec![]));
        }
        let k = ts.len();
        let combos = (n as u64).checked_pow(k as u32).unwrap_or(u64::MAX).min(256);
        'outer: for code in 0..combos {
            let mut goals = vec![Form::Bot; n];
            let mut c = code;
            for t in ts {
                let i = (c % n as u64) as usize;
                c /= n as u64;
                goals[i] = self.join(&goals[i], t);
                if goals[i] == Form::Top {
                    continue 'outer;
                }
            }
            let mut ps = Vec::with_capacity(n);
            for (ei, gi) in es.iter().zip(&goals) {
                match self.check(env, ei, gi) {
                    Some(d) => ps.push(d),
                    None => continue 'outer,
                }
            }
            let concl = ps
                .iter()
                .fold(Form::Set(Vec::new()), |acc, d| self.join(&acc, &lift_set(d.form.clone())));
            return Some(Derivation::node(env, e, concl, AssignRule::TSet, ps).weaken(phi));
        }
        None
    }

    fn check_join(&mut self, env: &FormEnv, e: &Expr, a: &Expr, b: &Expr, phi: &Form) -> Option<Derivation> {
        let bot = |x: &Expr| Derivation::leaf(env, x, Form::Bot, AssignRule::TBot);
        let mk = |da: Derivation, db: Derivation, s: &Self| {
            let j = s.join(&da.form, &db.form);
            Derivation::node(env, e, j, AssignRule::TJoin, vec![da, db]).weaken(phi)
        };
        if let Some(da) = self.check(env, a, phi) {
            return Some(mk(da, bot(b), self));
        }
        if let Some(db) = self.check(env, b, phi) {
            return Some(mk(bot(a), db, self));
        }
        // split the parts of a set or function goal between the arms
        let parts: Vec<Form> = match phi {
            Form::Set(ts) => ts.iter().map(|t| Form::Set(vec![t.clone()])).collect(),
            Form::Fun(cs) => cs.iter().map(|c| Form::Fun(vec![c.clone()])).collect(),
            _ => Vec::new(),
        };
        if (2..=6).contains(&parts.len()) {
            for mask in 1..(1u32 << parts.len()) - 1 {
                let (mut ga, mut gb) = (Form::Bot, Form::Bot);
                for (i, p) in parts.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        ga = self.join(&ga, p);
                    } else {
                        gb = self.join(&gb, p);
                    }
                }
                if let (Some(da), Some(db)) = (self.check(env, a, &ga), self.check(env, b, &gb)) {
                    return Some(mk(da, db, self));
                }
            }
        }
        None
    }
}

impl Checker<'_> {
    /// Formulae derivable for `e`, bottom-up, keeping only maximal ones.
    fn infer(&mut self, env: &FormEnv, e: &Expr) -> Vec<Derivation> {
        let key = (env.clone(), e as *const Expr as usize);
        if let Some(ds) = self.memo.get(&key) {
            return ds.clone();
        }
        let ds = self.infer_uncached(env, e);
        self.memo.insert(key, ds.clone());
        ds
    }

    fn infer_uncached(&mut self, env: &FormEnv, e: &Expr) -> Vec<Derivation> {
        use AssignRule::*;
        if !self.tick() {
            return vec![Derivation::leaf(env, e, Form::Bot, TBot)];
        }
        let mut out: Vec<Derivation> = Vec::new();
        match e {
            Expr::Bot => {}
            Expr::Top => out.push(Derivation::leaf(env, e, Form::Top, TTop)),
            Expr::BotV => out.push(Derivation::leaf(env, e, Form::BotV, TBotV)),
            Expr::Var(x) => {
                if let Some(t) = env.get(x) {
                    out.push(Derivation::leaf(env, e, t.clone(), TVar));
                }
            }
            Expr::Sym(s) => out.push(Derivation::leaf(env, e, Form::Sym(s.clone()), TSym)),
            Expr::Pair(a, b) => {
                let da = self.infer(env, a);
                let db = self.infer(env, b);
                for x in &da {
                    for y in &db {
                        let f = lift_pair(x.form.clone(), y.form.clone());
                        out.push(Derivation::node(env, e, f, TPair, vec![x.clone(), y.clone()]));
                    }
                }
            }
            Expr::Set(es) => {
                let mut partial: Vec<(Form, Vec<Derivation>)> = vec![(Form::Set(Vec::new()), Vec::new())];
                for x in es {
                    let dx = self.infer(env, x);
                    let mut next = Vec::new();
                    for (acc, ps) in &partial {
                        for d in &dx {
                            let mut ps = ps.clone();
                            ps.push(d.clone());
                            next.push((self.join(acc, &lift_set(d.form.clone())), ps));
                        }
                    }
                    next.truncate(self.opts.max_candidates * 4);
                    partial = next;
                }
                for (f, ps) in partial {
                    out.push(Derivation::node(env, e, f, TSet, ps));
                }
            }
            Expr::Lam(x, body) => {
                out.push(Derivation::leaf(env, e, Form::BotV, TBotV));
                let mut clauses = Vec::new();
                let mut ps = Vec::new();
                for tau in self.probes.clone() {
                    for d in self.infer(&extend(env, x, &tau), body) {
                        if d.form != Form::Bot {
                            clauses.push((tau.clone(), d.form.clone()));
                            ps.push(d);
                        }
                    }
                }
                // premises follow the canonical clause order
                let mut paired: Vec<((Form, Form), Derivation)> = clauses.into_iter().zip(ps).collect();
                paired.sort_by(|a, b| a.0.cmp(&b.0));
                paired.dedup_by(|a, b| a.0 == b.0);
                let (clauses, ps): (Vec<_>, Vec<_>) = paired.into_iter().unzip();
                out.push(Derivation::node(env, e, Form::Fun(clauses), TFun, ps));
            }
            Expr::App(f, a) => {
                let args = self.infer(env, a);
                if let Expr::Lam(x, body) = &**f {
                    for da in &args {
                        if da.form == Form::Top {
                            let df = Derivation::leaf(env, f, Form::BotV, TBotV);
                            out.push(Derivation::node(env, e, Form::Top, TAppRTop, vec![df, da.clone()]));
                            continue;
                        }
                        if !da.form.is_value() {
                            continue;
                        }
                        let inner = extend(env, x, &da.form);
                        for db in self.infer(&inner, body) {
                            let clause = Form::arrow(da.form.clone(), db.form.clone());
                            let phi = db.form.clone();
                            let df = Derivation::node(env, f, clause, TFun, vec![db]);
                            out.push(Derivation::node(env, e, phi, TApp, vec![df, da.clone()]));
                        }
                    }
                } else {
                    for df in self.infer(env, f) {
                        match &df.form {
                            Form::Top => {
                                out.push(Derivation::node(env, e, Form::Top, TAppLTop, vec![df.clone()]));
                                continue;
                            }
                            Form::Fun(cs) => {
                                for da in &args {
                                    if !da.form.is_value() {
                                        continue;
                                    }
                                    let phi = cs
                                        .iter()
                                        .filter(|(tj, _)| self.leq(tj, &da.form))
                                        .fold(Form::Bot, |acc, (_, pj)| self.join(&acc, pj));
                                    if phi == Form::Bot {
                                        continue;
                                    }
                                    let arrow = Form::arrow(da.form.clone(), phi.clone());
                                    let dfw = df.clone().weaken(&arrow);
                                    out.push(Derivation::node(env, e, phi, TApp, vec![dfw, da.clone()]));
                                }
                            }
                            _ => {}
                        }
                        if df.form.is_value() {
                            if let Some(da) = args.iter().find(|d| d.form == Form::Top) {
                                out.push(Derivation::node(env, e, Form::Top, TAppRTop, vec![df.clone(), da.clone()]));
                            }
                        }
                    }
                }
            }
            Expr::LetSym(s, a, body) => {
                for da in self.infer(env, a) {
                    match &da.form {
                        Form::Top => out.push(Derivation::node(env, e, Form::Top, TLetSymTop, vec![da])),
                        Form::Sym(s2) if self.table.leq(s, s2) => {
                            let da = da.weaken(&Form::Sym(s.clone()));
                            for db in self.infer(env, body) {
                                let phi = db.form.clone();
                                out.push(Derivation::node(env, e, phi, TLetSym, vec![da.clone(), db]));
                            }
                        }
                        _ => {}
                    }
                }
            }
            Expr::LetPair(x1, x2, a, body) => {
                for da in self.infer(env, a) {
                    match &da.form {
                        Form::Top => out.push(Derivation::node(env, e, Form::Top, TLetPairTop, vec![da])),
                        Form::Pair(t1, t2) => {
                            let inner = extend(&extend(env, x1, t1), x2, t2);
                            for db in self.infer(&inner, body) {
                                let phi = db.form.clone();
                                out.push(Derivation::node(env, e, phi, TLetPair, vec![da.clone(), db]));
                            }
                        }
                        _ => {}
                    }
                }
            }
            Expr::BigJoin(x, a, body) => {
                for da in self.infer(env, a) {
                    match &da.form {
                        Form::Top => out.push(Derivation::node(env, e, Form::Top, TForInTop, vec![da])),
                        Form::Set(ts) => {
                            let mut partial: Vec<(Form, Vec<Derivation>)> = vec![(Form::Bot, vec![da.clone()])];
                            for ti in ts {
                                let di = self.infer(&extend(env, x, ti), body);
                                let mut next = Vec::new();
                                for (acc, ps) in &partial {
                                    for d in &di {
                                        let mut ps = ps.clone();
                                        ps.push(d.clone());
                                        next.push((self.join(acc, &d.form), ps));
                                    }
                                }
                                next.truncate(self.opts.max_candidates * 4);
                                partial = next;
                            }
                            for (f, ps) in partial {
                                out.push(Derivation::node(env, e, f, TForIn, ps));
                            }
                        }
                        _ => {}
                    }
                }
            }
            Expr::Join(a, b) => {
                let da = self.infer(env, a);
                let db = self.infer(env, b);
                for x in &da {
                    for y in &db {
                        let f = self.join(&x.form, &y.form);
                        out.push(Derivation::node(env, e, f, TJoin, vec![x.clone(), y.clone()]));
                    }
                }
            }
        }
        self.prune(env, e, out)
    }

    /// Truncates to the height bound and keeps the maximal candidates.
    fn prune(&self, env: &FormEnv, e: &Expr, cands: Vec<Derivation>) -> Vec<Derivation> {
        let h = self.opts.height.max(1);
        let mut cands: Vec<Derivation> = cands
            .into_iter()
            .map(|d| {
                let f = d.form.truncate(h);
                d.weaken(&f)
            })
            .collect();
        cands.sort_by_key(|c| std::cmp::Reverse(c.form.size()));
        let mut kept: Vec<Derivation> = Vec::new();
        for d in cands {
            if kept.iter().any(|k| self.leq(&d.form, &k.form)) {
                continue;
            }
            kept.retain(|k| !self.leq(&k.form, &d.form));
            kept.push(d);
            if kept.len() >= self.opts.max_candidates {
                break;
            }
        }
        if kept.is_empty() {
            kept.push(Derivation::leaf(env, e, Form::Bot, AssignRule::TBot));
        }
        kept
    }
}

/// The evident formula of a result at the given height. Lambdas are probed
/// by applying them to each witness value at the same fuel.
pub fn evident_form(r: &Expr, fuel: u32, height: usize, witnesses: &[Expr], table: &SymbolTable) -> Form {
    let f = match r {
        Expr::Bot => Form::Bot,
        Expr::Top => Form::Top,
        Expr::Sym(s) => Form::Sym(s.clone()),
        _ if height <= 1 => {
            if r.is_value() {
                Form::BotV
            } else {
                Form::Bot
            }
        }
        Expr::Pair(a, b) => lift_pair(
            evident_form(a, fuel, height - 1, witnesses, table),
            evident_form(b, fuel, height - 1, witnesses, table),
        ),
        Expr::Set(es) => Form::set(
            es.iter()
                .map(|x| evident_form(x, fuel, height - 1, witnesses, table))
                .filter(Form::is_value)
                .collect(),
        ),
        Expr::Lam(..) => {
            let mut clauses = Vec::new();
            for w in witnesses {
                let out = stream_eval(&Expr::app(r.clone(), w.clone()), fuel, table);
                let phi = evident_form(&out, fuel, height - 1, witnesses, table);
                if phi != Form::Bot {
                    clauses.push((evident_form(w, fuel, height - 1, witnesses, table), phi));
                }
            }
            Form::fun(clauses)
        }
        _ => Form::BotV,
    };
    f.truncate(height.max(1))
}

/// Witness values used to probe lambdas: `botv` and the symbols of `e`.
pub fn witnesses(e: &Expr) -> Vec<Expr> {
    let mut ws = vec![Expr::BotV];
    ws.extend(e.symbols().into_iter().take(8).map(Expr::Sym));
    ws
}

/// Candidate formulae for `e`: the evident formula of its result at `fuel`
/// truncated to every height up to `height`, plus `bot`.
pub fn evident_forms(e: &Expr, fuel: u32, height: usize, table: &SymbolTable) -> Vec<Form> {
    let r = stream_eval(e, fuel, table);
    let ws = witnesses(e);
    let full = evident_form(&r, fuel, height, &ws, table);
    let mut out = vec![Form::Bot];
    for h in 1..=height.max(1) {
        let f = full.truncate(h);
        if !out.contains(&f) {
            out.push(f);
        }
    }
    out
}

/// Evident formulae of `e` that the checker validates.
pub fn synthesize_forms(e: &Expr, fuel: u32, height: usize, table: &SymbolTable) -> Vec<Form> {
    let env = FormEnv::new();
    evident_forms(e, fuel, height, table)
        .into_iter()
        .filter(|f| check_assign(&env, e, f, height, table).is_some())
        .collect()
}

/// Bounded logical order: every synthesized formula of `e1` is derivable for
/// `e2`. On failure returns the first formula that was not.
pub fn log_leq_bounded(e1: &Expr, e2: &Expr, fuel: u32, height: usize, table: &SymbolTable) -> Result<(), Form> {
    let env = FormEnv::new();
    for f in synthesize_forms(e1, fuel, height, table) {
        if check_assign(&env, e2, &f, height, table).is_none() {
            return Err(f);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_form;
    use crate::surface::{compile, parse_expr};

    fn t() -> SymbolTable {
        SymbolTable::discrete()
    }

    fn derive(src: &str, form: &str) -> Option<Derivation> {
        let e = parse_expr(src).unwrap();
        let phi = parse_form(form).unwrap();
        let d = check_assign(&FormEnv::new(), &e, &phi, 4, &t())?;
        d.verify(&t()).unwrap_or_else(|m| panic!("{m}\n{d}"));
        Some(d)
    }

    #[test]
    fn basic_rules() {
        assert!(derive("'a", "'a").is_some());
        assert!(derive("'a", "botv").is_some());
        assert!(derive("'a", "'b").is_none());
        assert!(derive("top", "'b").is_some());
        assert!(derive("('a, 'b)", "('a, botv)").is_some());
        assert!(derive("{'a, 'b}", "{'b, 'a}").is_some());
        assert!(derive("{'a}", "{'a, 'b}").is_none());
        assert!(derive("'a \\/ 'b", "top").is_some());
        assert!(derive("{'a} \\/ {'b}", "{'a, 'b}").is_some());
    }

    #[test]
    fn functions_and_application() {
        assert!(derive("\\x. (x, x)", "\\/ ['a -> ('a, 'a)]").is_some());
        assert!(derive("(\\x. (x, x)) 'a", "('a, 'a)").is_some());
        assert!(derive("(\\x. let 'a = x in 'b) 'a", "'b").is_some());
        assert!(derive("(\\x. let 'a = x in 'b) 'c", "'b").is_none());
        assert!(derive("(\\f. f 'a) (\\y. {y})", "{'a}").is_some());
        assert!(derive("for x in {'a, 'b} join {(x, x)}", "{('a, 'a), ('b, 'b)}").is_some());
        assert!(derive("let (p, q) = ('a, 'b) in (q, p)", "('b, 'a)").is_some());
    }

    #[test]
    fn top_rules() {
        assert!(derive("top 'a", "top").is_some());
        assert!(derive("(\\x. x) top", "top").is_some());
        assert!(derive("let 'a = top in 'b", "top").is_some());
        assert!(derive("for x in top join x", "top").is_some());
    }

    #[test]
    fn verify_rejects_bad_trees() {
        let e = parse_expr("'a").unwrap();
        let bad = Derivation::leaf(&FormEnv::new(), &e, Form::sym("b"), AssignRule::TSym);
        assert!(bad.verify(&t()).is_err());
        let d = derive("('a, 'b)", "('a, 'b)").unwrap();
        let mut broken = d.clone();
        broken.form = Form::pair(Form::sym("b"), Form::sym("b"));
        assert!(broken.verify(&t()).is_err());
    }

    #[test]
    fn synthesis_on_corpus() {
        let e = compile(crate::corpus::source("relation").unwrap()).unwrap();
        let fs = synthesize_forms(&e, 4, 7, &t());
        assert!(fs.contains(&parse_form("{(1, 2), (2, 3)}").unwrap()), "{fs:?}");
        let e = compile(crate::corpus::source("por_false").unwrap()).unwrap();
        let fs = synthesize_forms(&e, 6, 3, &t());
        assert!(fs.contains(&Form::Sym(Symbol::ff())), "{fs:?}");
    }

    #[test]
    fn logical_order() {
        let a = parse_expr("'a").unwrap();
        let ab = parse_expr("'a \\/ 'b").unwrap();
        assert!(log_leq_bounded(&a, &ab, 4, 3, &t()).is_ok());
        assert!(log_leq_bounded(&ab, &a, 4, 3, &t()).is_err());
    }
}
