//! Concrete syntax: lexer, parser and desugaring into core terms.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::Error;
use crate::syntax::{Expr, Name, Symbol};

const KEYWORDS: &[&str] = &[
    "def", "let", "in", "if", "then", "else", "case", "of", "for", "join", "bot", "top", "botv",
    "true", "false",
];

const PUNCT: &[&str] = &[
    "\\/", "::", "->", "||", "&&", "==", "<=", ">=", "(", ")", "{", "}", "[", "]", ",", "=", "|",
    "\\", ".", "<", ">", "+", "-", "*", ";", "λ", "∨",
];

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Upper(String),
    Sym(String),
    Str(String),
    Num(u64),
    Kw(&'static str),
    P(&'static str),
    Sep,
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn perr(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        col,
        msg: msg.into(),
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

fn lex(src: &str) -> Result<Vec<Token>, Error> {
    let chars: Vec<char> = src.chars().collect();
    let mut out: Vec<Token> = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (tl, tc) = (line, col);
        if col == 1 && !out.is_empty() {
            out.push(Token {
                tok: Tok::Sep,
                line,
                col,
            });
        }
        let start = i;
        let tok = if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(perr(tl, tc, "unterminated string")),
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\\') if i + 1 < chars.len() => {
                        s.push(chars[i + 1]);
                        i += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            Tok::Str(s)
        } else if c == '\'' {
            i += 1;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            if i == start + 1 {
                return Err(perr(tl, tc, "expected a symbol name after `'`"));
            }
            Tok::Sym(chars[start + 1..i].iter().collect())
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            Tok::Num(s.parse().map_err(|_| perr(tl, tc, "numeral too large"))?)
        } else if c.is_alphabetic() && c != 'λ' || c == '_' {
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            if s == "_" {
                Tok::P("_")
            } else if let Some(k) = KEYWORDS.iter().find(|k| **k == s) {
                Tok::Kw(k)
            } else if c.is_uppercase() {
                Tok::Upper(s)
            } else {
                Tok::Ident(s)
            }
        } else {
            let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
            let p = PUNCT
                .iter()
                .find(|p| rest.starts_with(**p))
                .ok_or_else(|| perr(tl, tc, format!("unexpected character `{c}`")))?;
            i += p.chars().count();
            if *p == ";" {
                Tok::Sep
            } else {
                Tok::P(p)
            }
        };
        col += i - start;
        out.push(Token {
            tok,
            line: tl,
            col: tc,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Pat {
    Var(String),
    Wild,
    Sym(Symbol),
    Num(u64),
    Pair(Box<Pat>, Box<Pat>),
    Cons(Box<Pat>, Box<Pat>),
    Nil,
    Con(String, Box<Pat>),
    Record(Vec<String>),
}

/// Surface expressions, before desugaring.
#[derive(Clone, Debug, PartialEq)]
pub enum SExpr {
    Var(String),
    Con(String, Option<Box<SExpr>>),
    Sym(Symbol),
    Num(u64),
    Bot,
    Top,
    BotV,
    Lam(Vec<Pat>, Box<SExpr>),
    App(Box<SExpr>, Box<SExpr>),
    Pair(Box<SExpr>, Box<SExpr>),
    Set(Vec<SExpr>),
    Record(Vec<(String, SExpr)>),
    EmptyRecord,
    List(Vec<SExpr>),
    Cons(Box<SExpr>, Box<SExpr>),
    Proj(Box<SExpr>, String),
    Let(Pat, Box<SExpr>, Box<SExpr>),
    If(Box<SExpr>, Box<SExpr>, Box<SExpr>),
    Case(Box<SExpr>, Vec<(Pat, SExpr)>),
    For(Pat, Box<SExpr>, Box<SExpr>),
    Join(Box<SExpr>, Box<SExpr>),
    Op(&'static str, Box<SExpr>, Box<SExpr>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Def {
    pub name: String,
    pub params: Vec<Pat>,
    pub body: SExpr,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub defs: Vec<Def>,
    pub main: Option<SExpr>,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

fn b<T>(x: T) -> Box<T> {
    Box::new(x)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        let t = &self.toks[self.pos];
        perr(t.line, t.col, msg)
    }

    fn is_p(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::P(q) if *q == p)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Kw(q) if *q == k)
    }

    fn eat_p(&mut self, p: &str) -> bool {
        if self.is_p(p) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_p(&mut self, p: &str) -> Result<(), Error> {
        if self.eat_p(p) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{p}`, found {}", describe(self.peek()))))
        }
    }

    fn expect_kw(&mut self, k: &str) -> Result<(), Error> {
        if self.is_kw(k) {
            self.next();
            Ok(())
        } else {
            Err(self.err(format!("expected `{k}`, found {}", describe(self.peek()))))
        }
    }

    fn ident(&mut self) -> Result<String, Error> {
        match self.next() {
            Tok::Ident(s) => Ok(s),
            t => {
                self.pos -= 1;
                Err(self.err(format!("expected identifier, found {}", describe(&t))))
            }
        }
    }

    fn skip_seps(&mut self) {
        while matches!(self.peek(), Tok::Sep) {
            self.next();
        }
    }

    fn program(&mut self) -> Result<Program, Error> {
        let mut defs = Vec::new();
        let mut main = None;
        self.skip_seps();
        while !matches!(self.peek(), Tok::Eof) {
            if main.is_some() {
                return Err(self.err("only one main expression is allowed, after all definitions"));
            }
            if self.is_kw("def") {
                let line = self.toks[self.pos].line;
                self.next();
                let name = self.ident()?;
                let mut params = Vec::new();
                while !self.is_p("=") {
                    params.push(self.pat_atom()?);
                }
                self.expect_p("=")?;
                let body = self.expr()?;
                defs.push(Def {
                    name,
                    params,
                    body,
                    line,
                });
            } else {
                main = Some(self.expr()?);
            }
            if !matches!(self.peek(), Tok::Sep | Tok::Eof) {
                return Err(self.err(format!("unexpected {}", describe(self.peek()))));
            }
            self.skip_seps();
        }
        Ok(Program { defs, main })
    }

    fn starts_block(&self) -> bool {
        self.is_p("\\") || self.is_p("λ") || ["let", "if", "case", "for"].iter().any(|k| self.is_kw(k))
    }

    fn expr(&mut self) -> Result<SExpr, Error> {
        if self.is_p("\\") || self.is_p("λ") {
            self.next();
            let mut params = Vec::new();
            while !self.is_p(".") {
                params.push(self.pat_atom()?);
            }
            if params.is_empty() {
                return Err(self.err("lambda needs at least one parameter"));
            }
            self.expect_p(".")?;
            let body = self.expr()?;
            return Ok(SExpr::Lam(params, b(body)));
        }
        if self.is_kw("let") {
            self.next();
            let p = self.pat()?;
            self.expect_p("=")?;
            let e = self.expr()?;
            self.expect_kw("in")?;
            let body = self.expr()?;
            return Ok(SExpr::Let(p, b(e), b(body)));
        }
        if self.is_kw("if") {
            self.next();
            let c = self.expr()?;
            self.expect_kw("then")?;
            let t = self.expr()?;
            self.expect_kw("else")?;
            let e = self.expr()?;
            return Ok(SExpr::If(b(c), b(t), b(e)));
        }
        if self.is_kw("case") {
            self.next();
            let scrut = self.expr()?;
            self.expect_kw("of")?;
            self.eat_p("|");
            let mut arms = Vec::new();
            loop {
                let p = self.pat()?;
                self.expect_p("->")?;
                let e = self.expr()?;
                arms.push((p, e));
                if !self.eat_p("|") {
                    break;
                }
            }
            return Ok(SExpr::Case(b(scrut), arms));
        }
        if self.is_kw("for") {
            self.next();
            let p = self.pat()?;
            self.expect_kw("in")?;
            let src = self.expr()?;
            self.expect_kw("join")?;
            let body = self.expr()?;
            return Ok(SExpr::For(p, b(src), b(body)));
        }
        self.binary(1)
    }

    fn binop(&self) -> Option<(&'static str, u8, bool)> {
        // (operator, precedence, right-associative)
        let Tok::P(p) = self.peek() else { return None };
        Some(match *p {
            "\\/" | "∨" => ("\\/", 1, false),
            "||" => ("||", 2, false),
            "&&" => ("&&", 3, false),
            "==" | "<=" | ">=" | "<" | ">" => (p, 4, false),
            "::" => ("::", 5, true),
            "+" | "-" => (p, 6, false),
            "*" => ("*", 7, false),
            _ => return None,
        })
    }

    fn binary(&mut self, min: u8) -> Result<SExpr, Error> {
        let mut lhs = self.app()?;
        while let Some((op, prec, right)) = self.binop() {
            if prec < min {
                break;
            }
            self.next();
            let rhs = if self.starts_block() {
                self.expr()?
            } else {
                self.binary(if right { prec } else { prec + 1 })?
            };
            lhs = match op {
                "\\/" => SExpr::Join(b(lhs), b(rhs)),
                "::" => SExpr::Cons(b(lhs), b(rhs)),
                _ => SExpr::Op(op, b(lhs), b(rhs)),
            };
            if prec == 4 && matches!(self.binop(), Some((_, 4, _))) {
                return Err(self.err("comparison operators do not chain"));
            }
        }
        Ok(lhs)
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Tok::Ident(_) | Tok::Upper(_) | Tok::Sym(_) | Tok::Str(_) | Tok::Num(_) => true,
            Tok::Kw(k) => matches!(*k, "bot" | "top" | "botv" | "true" | "false"),
            Tok::P(p) => matches!(*p, "(" | "{" | "["),
            _ => false,
        }
    }

    fn app(&mut self) -> Result<SExpr, Error> {
        let mut f = self.postfix()?;
        if let SExpr::Con(c, None) = &f {
            if self.starts_atom() {
                let arg = self.postfix()?;
                f = SExpr::Con(c.clone(), Some(b(arg)));
            }
        }
        while self.starts_atom() {
            let a = self.postfix()?;
            f = SExpr::App(b(f), b(a));
        }
        Ok(f)
    }

    fn postfix(&mut self) -> Result<SExpr, Error> {
        let mut e = self.atom()?;
        while self.is_p(".") && matches!(self.peek_at(1), Tok::Ident(_)) {
            self.next();
            let f = self.ident()?;
            e = SExpr::Proj(b(e), f);
        }
        Ok(e)
    }

    fn atom(&mut self) -> Result<SExpr, Error> {
        let t = self.next();
        Ok(match t {
            Tok::Ident(s) => SExpr::Var(s),
            Tok::Upper(s) => SExpr::Con(s, None),
            Tok::Sym(s) => SExpr::Sym(Symbol::name(&s)),
            Tok::Str(s) => SExpr::Sym(Symbol::string_lit(&s)),
            Tok::Num(k) => SExpr::Num(k),
            Tok::Kw("bot") => SExpr::Bot,
            Tok::Kw("top") => SExpr::Top,
            Tok::Kw("botv") => SExpr::BotV,
            Tok::Kw("true") => SExpr::Sym(Symbol::tt()),
            Tok::Kw("false") => SExpr::Sym(Symbol::ff()),
            Tok::P("(") => {
                if self.eat_p(")") {
                    return Ok(SExpr::Sym(Symbol::unit()));
                }
                let mut items = vec![self.expr()?];
                while self.eat_p(",") {
                    items.push(self.expr()?);
                }
                self.expect_p(")")?;
                let last = items.pop().unwrap();
                items
                    .into_iter()
                    .rev()
                    .fold(last, |acc, x| SExpr::Pair(b(x), b(acc)))
            }
            Tok::P("{") => {
                if self.eat_p("}") {
                    return Ok(SExpr::Set(Vec::new()));
                }
                if self.is_p("=") && matches!(self.peek_at(1), Tok::P("}")) {
                    self.next();
                    self.next();
                    return Ok(SExpr::EmptyRecord);
                }
                if matches!(self.peek(), Tok::Ident(_)) && matches!(self.peek_at(1), Tok::P("=")) {
                    let mut fields = Vec::new();
                    loop {
                        let f = self.ident()?;
                        self.expect_p("=")?;
                        fields.push((f, self.expr()?));
                        if !self.eat_p(",") {
                            break;
                        }
                    }
                    self.expect_p("}")?;
                    return Ok(SExpr::Record(fields));
                }
                let mut items = vec![self.expr()?];
                while self.eat_p(",") {
                    items.push(self.expr()?);
                }
                self.expect_p("}")?;
                SExpr::Set(items)
            }
            Tok::P("[") => {
                let mut items = Vec::new();
                if !self.eat_p("]") {
                    items.push(self.expr()?);
                    while self.eat_p(",") {
                        items.push(self.expr()?);
                    }
                    self.expect_p("]")?;
                }
                SExpr::List(items)
            }
            other => {
                self.pos -= 1;
                return Err(self.err(format!("expected an expression, found {}", describe(&other))));
            }
        })
    }

    fn pat(&mut self) -> Result<Pat, Error> {
        let head = if let Tok::Upper(c) = self.peek().clone() {
            self.next();
            let arg = if self.starts_pat_atom() {
                self.pat_atom()?
            } else {
                Pat::Wild
            };
            Pat::Con(c, b(arg))
        } else {
            self.pat_atom()?
        };
        if self.eat_p("::") {
            let tail = self.pat()?;
            return Ok(Pat::Cons(b(head), b(tail)));
        }
        Ok(head)
    }

    fn starts_pat_atom(&self) -> bool {
        match self.peek() {
            Tok::Ident(_) | Tok::Sym(_) | Tok::Str(_) | Tok::Num(_) => true,
            Tok::Kw(k) => matches!(*k, "true" | "false"),
            Tok::P(p) => matches!(*p, "(" | "{" | "[" | "_"),
            _ => false,
        }
    }

    fn pat_atom(&mut self) -> Result<Pat, Error> {
        let t = self.next();
        Ok(match t {
            Tok::Ident(s) => Pat::Var(s),
            Tok::P("_") => Pat::Wild,
            Tok::Sym(s) => Pat::Sym(Symbol::name(&s)),
            Tok::Str(s) => Pat::Sym(Symbol::string_lit(&s)),
            Tok::Num(k) => Pat::Num(k),
            Tok::Kw("true") => Pat::Sym(Symbol::tt()),
            Tok::Kw("false") => Pat::Sym(Symbol::ff()),
            Tok::Upper(c) => Pat::Con(c, b(Pat::Wild)),
            Tok::P("(") => {
                if self.eat_p(")") {
                    return Ok(Pat::Sym(Symbol::unit()));
                }
                let mut items = vec![self.pat()?];
                while self.eat_p(",") {
                    items.push(self.pat()?);
                }
                self.expect_p(")")?;
                let last = items.pop().unwrap();
                items
                    .into_iter()
                    .rev()
                    .fold(last, |acc, x| Pat::Pair(b(x), b(acc)))
            }
            Tok::P("[") => {
                let mut items = Vec::new();
                if !self.eat_p("]") {
                    items.push(self.pat()?);
                    while self.eat_p(",") {
                        items.push(self.pat()?);
                    }
                    self.expect_p("]")?;
                }
                items
                    .into_iter()
                    .rev()
                    .fold(Pat::Nil, |acc, x| Pat::Cons(b(x), b(acc)))
            }
            Tok::P("{") => {
                let mut fields = vec![self.ident()?];
                while self.eat_p(",") {
                    fields.push(self.ident()?);
                }
                self.expect_p("}")?;
                Pat::Record(fields)
            }
            other => {
                self.pos -= 1;
                return Err(self.err(format!("expected a pattern, found {}", describe(&other))));
            }
        })
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) | Tok::Upper(s) => format!("`{s}`"),
        Tok::Sym(s) => format!("`'{s}`"),
        Tok::Str(s) => format!("\"{s}\""),
        Tok::Num(k) => format!("`{k}`"),
        Tok::Kw(k) | Tok::P(k) => format!("`{k}`"),
        Tok::Sep => "end of item".into(),
        Tok::Eof => "end of input".into(),
    }
}

pub fn parse_program(src: &str) -> Result<Program, Error> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    p.program()
}

/// Library of arithmetic, comparison and boolean definitions over the Peano
/// numerals. Only the definitions a program references are linked in.
pub const PRELUDE: &str = r#"
def plus a b = case b of ('zero, _) -> a | ('succ, b1) -> plus a b1 + 1
def minus a b = case b of
  ('zero, _) -> a
  | ('succ, b1) -> (case a of ('zero, _) -> 0 | ('succ, a1) -> minus a1 b1)
def times a b = case b of ('zero, _) -> 0 | ('succ, b1) -> plus (times a b1) a
def lte a b = case a of
  ('zero, _) -> true
  | ('succ, a1) -> (case b of ('zero, _) -> false | ('succ, b1) -> lte a1 b1)
def lt a b = lte (a + 1) b
def gt a b = lt b a
def gte a b = lte b a
def eq a b = case a of
  ('zero, _) -> (case b of ('zero, _) -> true | ('succ, _) -> false)
  | ('succ, a1) -> (case b of ('zero, _) -> false | ('succ, b1) -> eq a1 b1)
def and a b = if a then b else false
def or a b = if a then true else b
def not a = if a then false else true
"#;

fn op_name(op: &str) -> &'static str {
    match op {
        "+" => "plus",
        "-" => "minus",
        "*" => "times",
        "<=" => "lte",
        "==" => "eq",
        "&&" => "and",
        _ => "or",
    }
}

pub fn numeral(k: u64) -> Expr {
    (0..k).fold(Expr::pair(Expr::sym("zero"), Expr::BotV), |acc, _| {
        Expr::pair(Expr::sym("succ"), acc)
    })
}

pub fn list(items: Vec<Expr>) -> Expr {
    items
        .into_iter()
        .rev()
        .fold(Expr::pair(Expr::sym("nil"), Expr::BotV), |acc, x| {
            Expr::pair(Expr::sym("cons"), Expr::pair(x, acc))
        })
}

#[derive(Default)]
struct Desugarer {
    counter: usize,
}

impl Desugarer {
    fn fresh(&mut self, base: &str) -> String {
        self.counter += 1;
        format!("_{base}{}", self.counter)
    }

    fn expr(&mut self, s: &SExpr) -> Expr {
        match s {
            SExpr::Var(x) => Expr::var(x),
            SExpr::Con(c, arg) => Expr::pair(
                Expr::Sym(Symbol::name(c)),
                arg.as_ref().map(|a| self.expr(a)).unwrap_or(Expr::BotV),
            ),
            SExpr::Sym(sym) => Expr::Sym(sym.clone()),
            SExpr::Num(k) => numeral(*k),
            SExpr::Bot => Expr::Bot,
            SExpr::Top => Expr::Top,
            SExpr::BotV => Expr::BotV,
            SExpr::Lam(params, body) => {
                let body = self.expr(body);
                self.lambda(params, body)
            }
            SExpr::App(f, a) => Expr::app(self.expr(f), self.expr(a)),
            SExpr::Pair(a, c) => Expr::pair(self.expr(a), self.expr(c)),
            SExpr::Set(es) => Expr::Set(es.iter().map(|e| self.expr(e)).collect()),
            SExpr::Record(fields) => {
                let x = self.fresh("r");
                let arms: Vec<Expr> = fields
                    .iter()
                    .map(|(f, e)| Expr::let_sym(Symbol::name(f), Expr::var(&x), self.expr(e)))
                    .collect();
                let body = arms.into_iter().reduce(Expr::join).unwrap_or(Expr::Bot);
                Expr::lam(&x, body)
            }
            SExpr::EmptyRecord => Expr::lam(&self.fresh("r"), Expr::Bot),
            SExpr::List(items) => list(items.iter().map(|e| self.expr(e)).collect()),
            SExpr::Cons(h, t) => {
                Expr::pair(Expr::sym("cons"), Expr::pair(self.expr(h), self.expr(t)))
            }
            SExpr::Proj(e, f) => Expr::app(self.expr(e), Expr::Sym(Symbol::name(f))),
            SExpr::Let(p, e, body) => {
                let e = self.expr(e);
                let body = self.expr(body);
                self.bind(p, e, body)
            }
            SExpr::If(c, t, e) => {
                let c = self.expr(c);
                let t = self.expr(t);
                let e = self.expr(e);
                self.with_var(c, |_, x| {
                    Expr::join(
                        Expr::let_sym(Symbol::tt(), Expr::var(&x), t),
                        Expr::let_sym(Symbol::ff(), Expr::var(&x), e),
                    )
                })
            }
            SExpr::Case(scrut, arms) => {
                let scrut = self.expr(scrut);
                let arms: Vec<(Pat, Expr)> =
                    arms.iter().map(|(p, e)| (p.clone(), self.expr(e))).collect();
                self.with_var(scrut, |d, x| {
                    arms.into_iter()
                        .map(|(p, e)| d.bind(&p, Expr::var(&x), e))
                        .reduce(Expr::join)
                        .unwrap_or(Expr::Bot)
                })
            }
            SExpr::For(p, src, body) => {
                let src = self.expr(src);
                let body = self.expr(body);
                match p {
                    Pat::Var(x) => Expr::big_join(x, src, body),
                    _ => {
                        let z = self.fresh("x");
                        let inner = self.bind(p, Expr::var(&z), body);
                        Expr::big_join(&z, src, inner)
                    }
                }
            }
            SExpr::Join(a, c) => Expr::join(self.expr(a), self.expr(c)),
            SExpr::Op("+", a, c) if matches!(**c, SExpr::Num(_)) => {
                let SExpr::Num(k) = **c else { unreachable!() };
                (0..k).fold(self.expr(a), |acc, _| Expr::pair(Expr::sym("succ"), acc))
            }
            SExpr::Op(op @ (">" | "<" | ">="), a, c) => {
                // comparisons share the cost of a single `lte` call
                let (a, c) = (self.expr(a), self.expr(c));
                let (lo, hi) = match *op {
                    ">" => (Expr::pair(Expr::sym("succ"), c), a),
                    "<" => (Expr::pair(Expr::sym("succ"), a), c),
                    _ => (c, a),
                };
                Expr::app(Expr::app(Expr::var("lte"), lo), hi)
            }
            SExpr::Op(op, a, c) => Expr::app(
                Expr::app(Expr::var(op_name(op)), self.expr(a)),
                self.expr(c),
            ),
        }
    }

    fn lambda(&mut self, params: &[Pat], body: Expr) -> Expr {
        params.iter().rev().fold(body, |acc, p| match p {
            Pat::Var(x) => Expr::lam(x, acc),
            _ => {
                let z = self.fresh("a");
                let inner = self.bind(p, Expr::var(&z), acc);
                Expr::lam(&z, inner)
            }
        })
    }

    /// Names `e` with a variable (binding it by application unless it
    /// already is one) and builds the body from that name.
    fn with_var(&mut self, e: Expr, k: impl FnOnce(&mut Self, String) -> Expr) -> Expr {
        match e {
            Expr::Var(x) => k(self, x.to_string()),
            e => {
                let x = self.fresh("x");
                let body = k(self, x.clone());
                Expr::app(Expr::lam(&x, body), e)
            }
        }
    }

    /// `let p = e in body`.
    fn bind(&mut self, p: &Pat, e: Expr, body: Expr) -> Expr {
        match p {
            Pat::Var(x) => match e {
                Expr::Var(y) => body.substitute(x, &Expr::Var(y)),
                e => Expr::app(Expr::lam(x, body), e),
            },
            Pat::Wild => match e {
                Expr::Var(_) => body,
                e => Expr::app(Expr::lam(&self.fresh("w"), body), e),
            },
            Pat::Sym(s) => Expr::let_sym(s.clone(), e, body),
            Pat::Num(k) => {
                let p = numeral_pat(*k);
                self.bind(&p, e, body)
            }
            Pat::Nil => self.bind(
                &Pat::Pair(b(Pat::Sym(Symbol::name("nil"))), b(Pat::Wild)),
                e,
                body,
            ),
            Pat::Cons(h, t) => self.bind(
                &Pat::Pair(
                    b(Pat::Sym(Symbol::name("cons"))),
                    b(Pat::Pair(h.clone(), t.clone())),
                ),
                e,
                body,
            ),
            Pat::Con(c, arg) => self.bind(
                &Pat::Pair(b(Pat::Sym(Symbol::name(c))), arg.clone()),
                e,
                body,
            ),
            Pat::Pair(p1, p2) => {
                let name_for = |d: &mut Self, p: &Pat| match p {
                    Pat::Var(x) => x.clone(),
                    _ => d.fresh("p"),
                };
                let x1 = name_for(self, p1);
                let x2 = name_for(self, p2);
                let inner = self.bind(p2, Expr::var(&x2), body);
                let inner = self.bind(p1, Expr::var(&x1), inner);
                Expr::let_pair(&x1, &x2, e, inner)
            }
            Pat::Record(fields) => self.with_var(e, |_, z| {
                fields.iter().rev().fold(body, |acc, f| {
                    Expr::app(
                        Expr::lam(f, acc),
                        Expr::app(Expr::var(&z), Expr::Sym(Symbol::name(f))),
                    )
                })
            }),
        }
    }
}

fn numeral_pat(k: u64) -> Pat {
    let zero = Pat::Pair(b(Pat::Sym(Symbol::name("zero"))), b(Pat::Wild));
    (0..k).fold(zero, |acc, _| {
        Pat::Pair(b(Pat::Sym(Symbol::name("succ"))), b(acc))
    })
}

/// Desugars a single expression without resolving free identifiers.
pub fn desugar_expr(s: &SExpr) -> Expr {
    Desugarer::default().expr(s)
}

/// Parses a lone expression into a core term; free identifiers stay free.
pub fn parse_expr(src: &str) -> Result<Expr, Error> {
    let prog = parse_program(src)?;
    if !prog.defs.is_empty() {
        return Err(Error::Desugar("expected an expression, found definitions".into()));
    }
    let main = prog
        .main
        .ok_or_else(|| Error::Desugar("empty input".into()))?;
    Ok(desugar_expr(&main))
}

struct CoreDef {
    params: bool,
    body: Expr,
    line: usize,
}

fn core_defs(prog: &Program, d: &mut Desugarer) -> Result<BTreeMap<String, CoreDef>, Error> {
    let mut out = BTreeMap::new();
    for def in &prog.defs {
        let body = d.expr(&def.body);
        let body = d.lambda(&def.params, body);
        let cd = CoreDef {
            params: !def.params.is_empty(),
            body,
            line: def.line,
        };
        if out.insert(def.name.clone(), cd).is_some() {
            return Err(Error::Parse {
                line: def.line,
                col: 1,
                msg: format!("duplicate definition of `{}`", def.name),
            });
        }
    }
    Ok(out)
}

/// The value `Z F` unrolls to: `F (\y. X X y)` with `X = \x. F (\y. x x y)`,
/// contracted once more so that the result is `body[f := \y. X X y]`.
fn unroll_fix(f: &str, body: &Expr) -> Expr {
    let fun = Expr::lam(f, body.clone());
    let xx = |x: &str| {
        Expr::lam(
            "_zy",
            Expr::app(Expr::app(Expr::var(x), Expr::var(x)), Expr::var("_zy")),
        )
    };
    let big_x = Expr::lam("_zx", Expr::app(fun, xx("_zx")));
    let knot = Expr::lam(
        "_zy",
        Expr::app(Expr::app(big_x.clone(), big_x), Expr::var("_zy")),
    );
    body.substitute(f, &knot)
}

/// The fixed-point combinator `Z = \f. (\x. f (\y. x x y)) (\x. f (\y. x x y))`.
pub fn z_combinator() -> Expr {
    let half = Expr::lam(
        "x",
        Expr::app(
            Expr::var("f"),
            Expr::lam("y", Expr::app(Expr::app(Expr::var("x"), Expr::var("x")), Expr::var("y"))),
        ),
    );
    Expr::lam("f", Expr::app(half.clone(), half))
}

/// Parses and desugars a whole program into one closed core term.
pub fn compile(src: &str) -> Result<Expr, Error> {
    let prog = parse_program(src)?;
    desugar_program(&prog)
}

pub fn desugar_program(prog: &Program) -> Result<Expr, Error> {
    let mut d = Desugarer::default();
    let main = prog
        .main
        .as_ref()
        .ok_or_else(|| Error::Desugar("program has no main expression".into()))?;
    let main = d.expr(main);
    let mut defs = core_defs(prog, &mut d)?;
    let prelude = core_defs(&parse_program(PRELUDE)?, &mut d)?;

    // link in every referenced prelude definition not shadowed by the program
    let mut pending: Vec<Name> = main.free_vars().into_iter().collect();
    for cd in defs.values() {
        pending.extend(cd.body.free_vars());
    }
    let mut prelude = prelude;
    while let Some(x) = pending.pop() {
        if defs.contains_key(&*x) {
            continue;
        }
        match prelude.remove(&*x) {
            Some(cd) => {
                pending.extend(cd.body.free_vars());
                defs.insert(x.to_string(), cd);
            }
            None => return Err(Error::Unbound(x.to_string())),
        }
    }

    let order = topo_order(&defs)?;
    let mut resolved: HashMap<String, Expr> = HashMap::new();
    for name in &order {
        let cd = &defs[name];
        let mut body = cd.body.clone();
        let recursive = body.free_vars().iter().any(|v| &**v == name);
        for dep in body.free_vars() {
            if &*dep == name {
                continue;
            }
            body = link(body, &dep, &resolved[&*dep]);
        }
        if recursive {
            if !cd.params || !matches!(body, Expr::Lam(..)) {
                return Err(Error::Desugar(format!(
                    "line {}: recursive definition `{name}` must take parameters",
                    cd.line
                )));
            }
            body = unroll_fix(name, &body);
        }
        resolved.insert(name.clone(), body);
    }
    let mut out = main;
    for dep in out.free_vars() {
        out = link(out, &dep, &resolved[&*dep]);
    }
    Ok(out)
}

/// Makes `def` available in `e`: substitution for values, a call-by-value
/// `let` otherwise.
fn link(e: Expr, x: &str, def: &Expr) -> Expr {
    if def.is_value() {
        e.substitute(x, def)
    } else {
        Expr::app(Expr::lam(x, e), def.clone())
    }
}

fn topo_order(defs: &BTreeMap<String, CoreDef>) -> Result<Vec<String>, Error> {
    let mut order = Vec::new();
    let mut state: HashMap<&str, u8> = HashMap::new();
    fn visit<'a>(
        n: &'a str,
        defs: &'a BTreeMap<String, CoreDef>,
        state: &mut HashMap<&'a str, u8>,
        order: &mut Vec<String>,
        stack: &mut Vec<&'a str>,
    ) -> Result<(), Error> {
        match state.get(n) {
            Some(2) => return Ok(()),
            Some(1) => {
                stack.push(n);
                return Err(Error::Desugar(format!(
                    "mutually recursive definitions are not supported: {}",
                    stack.join(" -> ")
                )));
            }
            _ => {}
        }
        state.insert(n, 1);
        stack.push(n);
        let deps: BTreeSet<Name> = defs[n].body.free_vars();
        for dep in &deps {
            if &**dep == n {
                continue;
            }
            let (k, _) = defs.get_key_value(&**dep).expect("linked");
            visit(k, defs, state, order, stack)?;
        }
        stack.pop();
        state.insert(n, 2);
        order.push(n.to_string());
        Ok(())
    }
    for n in defs.keys() {
        visit(n, defs, &mut state, &mut order, &mut Vec::new())?;
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pretty::pretty;
    use crate::stream::stream_eval;
    use crate::syntax::SymbolTable;

    fn eval(src: &str, fuel: u32) -> Expr {
        stream_eval(&compile(src).unwrap(), fuel, &SymbolTable::discrete())
    }

    #[test]
    fn id_program() {
        let e = compile("def id x = x\nid 3").unwrap();
        assert!(e.is_closed());
        assert_eq!(stream_eval(&e, 2, &SymbolTable::discrete()), numeral(3));
    }

    #[test]
    fn evens_parses_into_two_defs() {
        let src = "def plus2all s = for x in s join {x + 2}\ndef evens _ = {0} \\/ plus2all (evens ())\nevens ()";
        let p = parse_program(src).unwrap();
        assert_eq!(p.defs.len(), 2);
        assert!(compile(src).unwrap().is_closed());
    }

    #[test]
    fn unbound_identifier() {
        assert_eq!(compile("foo 1"), Err(Error::Unbound("foo".into())));
    }

    #[test]
    fn duplicate_definition() {
        assert!(matches!(
            compile("def f x = x\ndef f y = y\nf 1"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn syntax_error_position() {
        match compile("let x = in x") {
            Err(Error::Parse { line, col, .. }) => assert_eq!((line, col), (1, 9)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn if_encoding() {
        let e = parse_expr("if c then a else b").unwrap();
        assert_eq!(pretty(&e), "(let true = c in a) \\/ (let false = c in b)");
        let e = parse_expr("if f c then a else b").unwrap();
        let want = parse_expr("(\\x. (let true = x in a) \\/ (let false = x in b)) (f c)").unwrap();
        assert_eq!(e, want);
    }

    #[test]
    fn record_projection() {
        assert_eq!(eval("{fld1 = 'v1}.fld1", 2), Expr::sym("v1"));
        assert_eq!(eval("{fld1 = 'v1}.fld2", 2), Expr::Bot);
    }

    #[test]
    fn numerals_and_lists() {
        assert_eq!(compile("0").unwrap(), Expr::pair(Expr::sym("zero"), Expr::BotV));
        assert_eq!(
            compile("[]").unwrap(),
            Expr::pair(Expr::sym("nil"), Expr::BotV)
        );
        assert_eq!(compile("[1]").unwrap(), compile("1 :: []").unwrap());
        assert_eq!(
            compile("Just 'a").unwrap(),
            Expr::pair(Expr::sym("Just"), Expr::sym("a"))
        );
    }

    #[test]
    fn arithmetic_small() {
        assert_eq!(eval("1 + 1", 1), numeral(2));
        assert_eq!(eval("plus 2 3", 40), numeral(5));
        assert_eq!(eval("times 2 3", 80), numeral(6));
        assert_eq!(eval("minus 5 2", 40), numeral(3));
        assert_eq!(eval("5 > 4", 60), Expr::Sym(Symbol::tt()));
        assert_eq!(eval("5 <= 6", 60), Expr::Sym(Symbol::tt()));
        assert_eq!(eval("3 == 4", 60), Expr::Sym(Symbol::ff()));
        assert_eq!(eval("true && false", 10), Expr::Sym(Symbol::ff()));
        assert_eq!(eval("not false", 10), Expr::Sym(Symbol::tt()));
    }

    #[test]
    fn patterns() {
        assert_eq!(eval("let h :: _ = [7, 8] in h", 2), numeral(7));
        assert_eq!(eval("case [] of [] -> 'empty | _ :: _ -> 'cons", 2), Expr::sym("empty"));
        assert_eq!(eval("let {a, b} = {a = 1, b = 2} in (b, a)", 8), compile("(2, 1)").unwrap());
        assert_eq!(eval("case 2 of 1 -> 'one | 2 -> 'two", 2), Expr::sym("two"));
        assert_eq!(eval("(\\(x, y). y) ('a, 'b)", 2), Expr::sym("b"));
    }

    #[test]
    fn layout_separates_items() {
        let src = "def f x =\n  x\n\ndef g y = f y\n\ng 'k\n";
        assert_eq!(eval(src, 4), Expr::sym("k"));
        assert_eq!(eval("def f x = x; f 'k", 2), Expr::sym("k"));
    }

    #[test]
    fn mutual_recursion_rejected() {
        let r = compile("def f x = g x\ndef g x = f x\nf 1");
        assert!(matches!(r, Err(Error::Desugar(_))));
    }

    #[test]
    fn roundtrip_core_forms() {
        for src in [
            "\\x. (x, 'a) \\/ {x, botv}",
            "for x in {1, 2} join {x}",
            "let (a, b) = (1, 2) in b",
            "let 'tag = s in top",
            "f (g x) y :: bot",
            "(\\x. x) \\/ (\\y. y)",
        ] {
            let e = parse_expr(src).unwrap();
            let p1 = pretty(&e);
            let e2 = parse_expr(&p1).unwrap();
            assert_eq!(e, e2, "{src} -> {p1}");
            assert_eq!(pretty(&e2), p1);
        }
    }
}
