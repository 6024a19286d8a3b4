//! Formulae of the filter model: computation formulae (`bot`, `top`, or a
//! value formula), the streaming order, joins, lifts and height.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::Error;
use crate::syntax::{Name, Symbol, SymbolTable};

/// A computation formula. `BotV`, `Sym`, `Pair`, `Set` and `Fun` are the
/// value formulae. Sets and clause lists are kept sorted and deduplicated.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Form {
    Bot,
    Top,
    BotV,
    Sym(Symbol),
    Pair(Box<Form>, Box<Form>),
    Set(Vec<Form>),
    Fun(Vec<(Form, Form)>),
}

pub type FormEnv = BTreeMap<Name, Form>;

impl Form {
    pub fn sym(s: &str) -> Form {
        Form::Sym(Symbol::name(s))
    }

    pub fn pair(a: Form, b: Form) -> Form {
        Form::Pair(Box::new(a), Box::new(b))
    }

    pub fn set(mut elems: Vec<Form>) -> Form {
        elems.sort();
        elems.dedup();
        Form::Set(elems)
    }

    pub fn fun(mut clauses: Vec<(Form, Form)>) -> Form {
        clauses.sort();
        clauses.dedup();
        Form::Fun(clauses)
    }

    pub fn arrow(t: Form, p: Form) -> Form {
        Form::fun(vec![(t, p)])
    }

    pub fn is_value(&self) -> bool {
        !matches!(self, Form::Bot | Form::Top)
    }

    /// Height of the syntax tree. Sets and functions count as one level
    /// above their children, and as height 2 when empty.
    pub fn size(&self) -> usize {
        match self {
            Form::Bot | Form::Top | Form::BotV | Form::Sym(_) => 1,
            Form::Pair(a, b) => 1 + a.size().max(b.size()),
            Form::Set(es) => 1 + es.iter().map(Form::size).max().unwrap_or(1),
            Form::Fun(cs) => {
                1 + cs
                    .iter()
                    .map(|(t, p)| t.size().max(p.size()))
                    .max()
                    .unwrap_or(1)
            }
        }
    }

    pub fn leq(&self, other: &Form, table: &SymbolTable) -> bool {
        form_leq(self, other, table)
    }

    pub fn join(&self, other: &Form, table: &SymbolTable) -> Form {
        form_join(self, other, table)
    }

    /// A formula below `self` whose height is at most `h` (h >= 1).
    pub fn truncate(&self, h: usize) -> Form {
        if self.size() <= h {
            return self.clone();
        }
        match self {
            Form::Bot | Form::Top | Form::BotV | Form::Sym(_) => self.clone(),
            _ if h <= 1 => Form::BotV,
            Form::Pair(a, b) => Form::pair(a.truncate(h - 1), b.truncate(h - 1)),
            Form::Set(es) => Form::set(es.iter().map(|e| e.truncate(h - 1)).collect()),
            Form::Fun(cs) => Form::fun(
                cs.iter()
                    .filter(|(t, _)| t.size() < h)
                    .map(|(t, p)| (t.clone(), p.truncate(h - 1)))
                    .collect(),
            ),
        }
    }

    /// Symbols mentioned by the formula.
    pub fn symbols(&self, out: &mut Vec<Symbol>) {
        match self {
            Form::Sym(s) => {
                if !out.contains(s) {
                    out.push(s.clone())
                }
            }
            Form::Pair(a, b) => {
                a.symbols(out);
                b.symbols(out);
            }
            Form::Set(es) => es.iter().for_each(|e| e.symbols(out)),
            Form::Fun(cs) => cs.iter().for_each(|(t, p)| {
                t.symbols(out);
                p.symbols(out);
            }),
            _ => {}
        }
    }
}

pub fn form_leq(a: &Form, b: &Form, t: &SymbolTable) -> bool {
    match (a, b) {
        (Form::Bot, _) | (_, Form::Top) => true,
        (Form::Top, _) | (_, Form::Bot) => false,
        (Form::BotV, _) => true,
        (_, Form::BotV) => false,
        (Form::Sym(x), Form::Sym(y)) => t.leq(x, y),
        (Form::Pair(a1, a2), Form::Pair(b1, b2)) => form_leq(a1, b1, t) && form_leq(a2, b2, t),
        (Form::Set(xs), Form::Set(ys)) => {
            xs.iter().all(|x| ys.iter().any(|y| form_leq(x, y, t)))
        }
        (Form::Fun(lhs), Form::Fun(rhs)) => lhs.iter().all(|c| clause_covered(c, rhs, t)),
        _ => false,
    }
}

/// Whether some subset J' of `rhs` has every threshold below `tau`
/// combined, and combined output above `phi`.
fn clause_covered((tau, phi): &(Form, Form), rhs: &[(Form, Form)], t: &SymbolTable) -> bool {
    let triggered: Vec<&(Form, Form)> = rhs.iter().filter(|(tj, _)| form_leq(tj, tau, t)).collect();
    if covers(&triggered, tau, phi, t) {
        return true;
    }
    // exhaustive fallback over subsets of all clauses
    if rhs.len() > 12 {
        return false;
    }
    (0u32..(1 << rhs.len())).any(|mask| {
        let sub: Vec<&(Form, Form)> = rhs
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, c)| c)
            .collect();
        covers(&sub, tau, phi, t)
    })
}

fn covers(sub: &[&(Form, Form)], tau: &Form, phi: &Form, t: &SymbolTable) -> bool {
    let dom = sub.iter().fold(Form::Bot, |acc, (tj, _)| form_join(&acc, tj, t));
    let cod = sub.iter().fold(Form::Bot, |acc, (_, pj)| form_join(&acc, pj, t));
    form_leq(&dom, tau, t) && form_leq(phi, &cod, t)
}

pub fn form_join(a: &Form, b: &Form, t: &SymbolTable) -> Form {
    match (a, b) {
        (Form::Bot, x) | (x, Form::Bot) => x.clone(),
        (Form::Top, _) | (_, Form::Top) => Form::Top,
        (Form::BotV, x) | (x, Form::BotV) => x.clone(),
        (Form::Sym(x), Form::Sym(y)) => t.join(x, y).map(Form::Sym).unwrap_or(Form::Top),
        (Form::Pair(a1, a2), Form::Pair(b1, b2)) => {
            lift_pair(form_join(a1, b1, t), form_join(a2, b2, t))
        }
        (Form::Set(xs), Form::Set(ys)) => Form::set(xs.iter().chain(ys).cloned().collect()),
        (Form::Fun(xs), Form::Fun(ys)) => Form::fun(xs.iter().chain(ys).cloned().collect()),
        _ => Form::Top,
    }
}

/// `(φ1, φ2)c`.
pub fn lift_pair(a: Form, b: Form) -> Form {
    match (&a, &b) {
        (Form::Bot, _) => Form::Bot,
        (Form::Top, _) => Form::Top,
        (_, Form::Bot) => Form::Bot,
        (_, Form::Top) => Form::Top,
        _ => Form::pair(a, b),
    }
}

/// `{φ}c`.
pub fn lift_set(a: Form) -> Form {
    match a {
        Form::Bot => Form::Bot,
        Form::Top => Form::Top,
        v => Form::Set(vec![v]),
    }
}

/// All formulae of height at most `depth` over `symbols`, with sets of at
/// most two elements and functions of at most one clause.
pub fn enumerate_forms(depth: usize, symbols: &[Symbol]) -> Vec<Form> {
    if depth == 0 {
        return Vec::new();
    }
    let mut out = vec![Form::Bot, Form::Top];
    out.extend(enumerate_values(depth, symbols));
    out
}

pub fn enumerate_values(depth: usize, symbols: &[Symbol]) -> Vec<Form> {
    let mut vals = vec![Form::BotV];
    vals.extend(symbols.iter().cloned().map(Form::Sym));
    if depth <= 1 {
        return vals;
    }
    let inner_vals = enumerate_values(depth - 1, symbols);
    let inner_comp = enumerate_forms(depth - 1, symbols);
    for a in &inner_vals {
        for b in &inner_vals {
            vals.push(Form::pair(a.clone(), b.clone()));
        }
    }
    vals.push(Form::Set(Vec::new()));
    for (i, a) in inner_vals.iter().enumerate() {
        vals.push(Form::Set(vec![a.clone()]));
        for b in &inner_vals[i + 1..] {
            vals.push(Form::set(vec![a.clone(), b.clone()]));
        }
    }
    vals.push(Form::Fun(Vec::new()));
    for tau in &inner_vals {
        for phi in &inner_comp {
            vals.push(Form::arrow(tau.clone(), phi.clone()));
        }
    }
    vals
}

fn is_tag(f: &Form, tag: &str) -> bool {
    matches!(f, Form::Sym(s) if s.text() == tag)
}

fn as_numeral(f: &Form) -> Option<u64> {
    match f {
        Form::Pair(t, r) if is_tag(t, "zero") && **r == Form::BotV => Some(0),
        Form::Pair(t, r) if is_tag(t, "succ") => as_numeral(r).map(|k| k + 1),
        _ => None,
    }
}

fn as_cons(f: &Form) -> Option<(&Form, &Form)> {
    match f {
        Form::Pair(t, r) if is_tag(t, "cons") => match &**r {
            Form::Pair(h, tl) => Some((h, tl)),
            _ => None,
        },
        _ => None,
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_form(self, f, false)
    }
}

fn write_form(x: &Form, f: &mut fmt::Formatter<'_>, in_cons_head: bool) -> fmt::Result {
    if let Some(k) = as_numeral(x) {
        return write!(f, "{k}");
    }
    if let Some((h, t)) = as_cons(x) {
        if in_cons_head {
            f.write_str("(")?;
        }
        write_form(h, f, true)?;
        f.write_str(" :: ")?;
        write_form(t, f, false)?;
        if in_cons_head {
            f.write_str(")")?;
        }
        return Ok(());
    }
    match x {
        Form::Bot => f.write_str("bot"),
        Form::Top => f.write_str("top"),
        Form::BotV => f.write_str("botv"),
        Form::Sym(s) => write!(f, "{s}"),
        Form::Pair(a, b) => {
            f.write_str("(")?;
            write_form(a, f, false)?;
            f.write_str(", ")?;
            write_form(b, f, false)?;
            f.write_str(")")
        }
        Form::Set(es) => {
            f.write_str("{")?;
            for (i, e) in es.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_form(e, f, false)?;
            }
            f.write_str("}")
        }
        Form::Fun(cs) => {
            f.write_str("\\/ [")?;
            for (i, (t, p)) in cs.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_form(t, f, false)?;
                f.write_str(" -> ")?;
                write_form(p, f, false)?;
            }
            f.write_str("]")
        }
    }
}

/// Parses the textual formula syntax: `bot`, `top`, `botv`, symbols,
/// numerals, `(τ, τ)`, `{τ, ..}`, `τ :: τ` and `\/ [τ -> φ, ..]`.
pub fn parse_form(src: &str) -> Result<Form, Error> {
    let mut p = FormParser {
        chars: src.chars().collect(),
        pos: 0,
    };
    let f = p.form()?;
    p.ws();
    if p.pos < p.chars.len() {
        return Err(p.err("trailing input"));
    }
    Ok(f)
}

struct FormParser {
    chars: Vec<char>,
    pos: usize,
}

impl FormParser {
    fn err(&self, msg: &str) -> Error {
        Error::Formula(format!("{msg} at column {}", self.pos + 1))
    }

    fn ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, s: &str) -> bool {
        self.ws();
        let n = s.chars().count();
        if self.chars[self.pos..].iter().take(n).copied().eq(s.chars()) {
            self.pos += n;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), Error> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{s}`")))
        }
    }

    fn form(&mut self) -> Result<Form, Error> {
        let head = self.atom()?;
        if self.eat("::") {
            let tail = self.form()?;
            if !head.is_value() || !tail.is_value() {
                return Err(self.err("list components must be value formulae"));
            }
            return Ok(Form::pair(Form::sym("cons"), Form::pair(head, tail)));
        }
        Ok(head)
    }

    fn value(&mut self) -> Result<Form, Error> {
        let f = self.form()?;
        if f.is_value() {
            Ok(f)
        } else {
            Err(self.err("expected a value formula"))
        }
    }

    fn atom(&mut self) -> Result<Form, Error> {
        self.ws();
        if self.eat("\\/") {
            self.expect("[")?;
            let mut clauses = Vec::new();
            if !self.eat("]") {
                loop {
                    let t = self.value()?;
                    self.expect("->")?;
                    let p = self.form()?;
                    clauses.push((t, p));
                    if !self.eat(",") {
                        break;
                    }
                }
                self.expect("]")?;
            }
            return Ok(Form::fun(clauses));
        }
        if self.eat("()") {
            return Ok(Form::Sym(Symbol::unit()));
        }
        if self.eat("(") {
            let a = self.value()?;
            self.expect(",")?;
            let b = self.value()?;
            self.expect(")")?;
            return Ok(Form::pair(a, b));
        }
        if self.eat("{") {
            let mut es = Vec::new();
            if !self.eat("}") {
                loop {
                    es.push(self.value()?);
                    if !self.eat(",") {
                        break;
                    }
                }
                self.expect("}")?;
            }
            return Ok(Form::set(es));
        }
        let start = self.pos;
        if self.pos < self.chars.len() && self.chars[self.pos] == '"' {
            self.pos += 1;
            while self.pos < self.chars.len() && self.chars[self.pos] != '"' {
                self.pos += 1;
            }
            if self.pos >= self.chars.len() {
                return Err(self.err("unterminated string"));
            }
            self.pos += 1;
            let s: String = self.chars[start + 1..self.pos - 1].iter().collect();
            return Ok(Form::Sym(Symbol::string_lit(&s)));
        }
        if self.pos < self.chars.len() && self.chars[self.pos] == '\'' {
            self.pos += 1;
        }
        while self.pos < self.chars.len()
            && (self.chars[self.pos].is_alphanumeric() || self.chars[self.pos] == '_')
        {
            self.pos += 1;
        }
        let word: String = self.chars[start..self.pos].iter().collect();
        Ok(match word.as_str() {
            "" => return Err(self.err("expected a formula")),
            "bot" => Form::Bot,
            "top" => Form::Top,
            "botv" => Form::BotV,
            w if w.chars().all(|c| c.is_ascii_digit()) => {
                let k: u64 = w.parse().map_err(|_| self.err("numeral too large"))?;
                (0..k).fold(Form::pair(Form::sym("zero"), Form::BotV), |acc, _| {
                    Form::pair(Form::sym("succ"), acc)
                })
            }
            w => match Symbol::parse_token(w) {
                Some(s) if w.starts_with('\'') || w == "true" || w == "false" => Form::Sym(s),
                _ => return Err(self.err(&format!("unknown formula `{w}`"))),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> SymbolTable {
        SymbolTable::discrete()
    }

    #[test]
    fn distributivity_example() {
        let tau = Form::sym("a");
        let p1 = Form::set(vec![Form::sym("b")]);
        let p2 = Form::set(vec![Form::sym("c")]);
        let lhs = Form::arrow(tau.clone(), form_join(&p1, &p2, &t()));
        let rhs = form_join(&Form::arrow(tau.clone(), p1), &Form::arrow(tau, p2), &t());
        assert!(form_leq(&lhs, &rhs, &t()));
    }

    #[test]
    fn arrow_order_specializes() {
        let t = t();
        let small = Form::BotV;
        let big = Form::sym("a");
        // τ' ⊑ τ and φ ⊑ φ' give τ → φ ⊑ τ' → φ'
        assert!(form_leq(&Form::arrow(big.clone(), Form::BotV), &Form::arrow(small.clone(), big.clone()), &t));
        assert!(!form_leq(&Form::arrow(small, big.clone()), &Form::arrow(big, Form::BotV), &t));
    }

    #[test]
    fn set_growth() {
        let t = t();
        let s0 = Form::set(vec![Form::sym("0")]);
        let s02 = Form::set(vec![Form::sym("0"), Form::sym("2")]);
        assert!(form_leq(&s0, &s02, &t));
        assert!(!form_leq(&s02, &s0, &t));
    }

    #[test]
    fn lifts() {
        assert_eq!(lift_pair(Form::Bot, Form::BotV), Form::Bot);
        assert_eq!(lift_set(Form::Top), Form::Top);
        assert_eq!(lift_set(Form::sym("1")), Form::Set(vec![Form::sym("1")]));
    }

    #[test]
    fn sizes() {
        assert_eq!(Form::Bot.size(), 1);
        assert_eq!(Form::pair(Form::sym("s"), Form::sym("t")).size(), 2);
        assert_eq!(Form::Set(vec![]).size(), 2);
    }

    #[test]
    fn enumeration_examples() {
        assert_eq!(enumerate_forms(1, &[]), vec![Form::Bot, Form::Top, Form::BotV]);
        let d2 = enumerate_forms(2, &[Symbol::name("a")]);
        assert!(d2.contains(&Form::sym("a")));
        assert!(d2.contains(&Form::Set(vec![])));
        assert!(d2.contains(&Form::pair(Form::BotV, Form::BotV)));
        assert!(d2.iter().all(|f| f.size() <= 2));
    }

    #[test]
    fn enumeration_counts() {
        let syms = [Symbol::name("a"), Symbol::name("b")];
        let counts: Vec<usize> = (1..=3).map(|d| enumerate_forms(d, &syms).len()).collect();
        assert_eq!(counts, vec![5, 37, 3157]);
    }

    #[test]
    fn text_roundtrip() {
        for src in [
            "bot",
            "top",
            "botv",
            "'a",
            "(true, \"ok\")",
            "{'a, ()}",
            "\\/ ['a -> 'b, botv -> top]",
            "\\/ []",
            "0 :: 1 :: botv",
            "{0, 2}",
        ] {
            let f = parse_form(src).unwrap();
            let printed = f.to_string();
            assert_eq!(parse_form(&printed).unwrap(), f, "{src}");
        }
        assert!(parse_form("\\/ [top -> 'a]").is_err());
        assert!(parse_form("(bot, 'a)").is_err());
    }

    #[test]
    fn truncate_is_below() {
        let syms = [Symbol::name("a")];
        for f in enumerate_forms(3, &syms) {
            for h in 1..=3 {
                let g = f.truncate(h);
                assert!(g.size() <= h.max(1), "{f} at {h}: {g}");
                assert!(form_leq(&g, &f, &t()), "{g} not below {f}");
            }
        }
    }
}
