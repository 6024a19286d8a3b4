//! Printing of core terms in the concrete syntax, and rendering of
//! observations (records shown by projecting their fields).

use crate::stream::{observe, stream_eval, Observation};
use crate::syntax::{Expr, Symbol, SymbolTable};

const TOP: u8 = 0;
const JOIN_L: u8 = 1;
const JOIN_R: u8 = 2;
const CONS_L: u8 = 3;
const APP_F: u8 = 4;
const ATOM: u8 = 5;

fn is_tag(e: &Expr, tag: &str) -> bool {
    matches!(e, Expr::Sym(s) if s.text() == tag)
}

/// Value of a Peano numeral `(zero, botv)` / `(succ, n)`.
pub fn as_numeral(e: &Expr) -> Option<u64> {
    let mut k = 0u64;
    let mut cur = e;
    loop {
        match cur {
            Expr::Pair(t, rest) if is_tag(t, "succ") => {
                k += 1;
                cur = rest;
            }
            Expr::Pair(t, rest) if is_tag(t, "zero") && matches!(**rest, Expr::BotV) => {
                return Some(k)
            }
            _ => return None,
        }
    }
}

fn as_cons(e: &Expr) -> Option<(&Expr, &Expr)> {
    match e {
        Expr::Pair(t, rest) if is_tag(t, "cons") => match &**rest {
            Expr::Pair(h, tl) => Some((h, tl)),
            _ => None,
        },
        _ => None,
    }
}

fn is_nil(e: &Expr) -> bool {
    matches!(e, Expr::Pair(t, rest) if is_tag(t, "nil") && matches!(**rest, Expr::BotV))
}

fn wrap(s: String, cond: bool) -> String {
    if cond {
        format!("({s})")
    } else {
        s
    }
}

/// Prints a core term; the output parses back to an alpha-equivalent term.
pub fn pretty(e: &Expr) -> String {
    pp(e, TOP)
}

fn pp(e: &Expr, prec: u8) -> String {
    if let Some(k) = as_numeral(e) {
        return k.to_string();
    }
    if is_nil(e) {
        return "[]".into();
    }
    if let Some((h, t)) = as_cons(e) {
        return wrap(format!("{} :: {}", pp(h, APP_F), pp(t, CONS_L)), prec > CONS_L);
    }
    match e {
        Expr::Bot => "bot".into(),
        Expr::Top => "top".into(),
        Expr::BotV => "botv".into(),
        Expr::Var(x) => x.to_string(),
        Expr::Sym(s) => s.to_string(),
        Expr::Pair(a, b) => format!("({}, {})", pp(a, TOP), pp(b, TOP)),
        Expr::Set(es) => {
            let items: Vec<String> = es.iter().map(|x| pp(x, TOP)).collect();
            format!("{{{}}}", items.join(", "))
        }
        Expr::Lam(x, b) => wrap(format!("\\{x}. {}", pp(b, TOP)), prec > TOP),
        Expr::App(f, a) => wrap(format!("{} {}", pp(f, APP_F), pp(a, ATOM)), prec > APP_F),
        Expr::LetPair(x1, x2, s, b) => wrap(
            format!("let ({x1}, {x2}) = {} in {}", pp(s, TOP), pp(b, TOP)),
            prec > TOP,
        ),
        Expr::LetSym(sym, s, b) => wrap(
            format!("let {sym} = {} in {}", pp(s, TOP), pp(b, TOP)),
            prec > TOP,
        ),
        Expr::BigJoin(x, s, b) => wrap(
            format!("for {x} in {} join {}", pp(s, TOP), pp(b, TOP)),
            prec > TOP,
        ),
        Expr::Join(a, b) => wrap(
            format!("{} \\/ {}", pp(a, JOIN_L), pp(b, JOIN_R)),
            prec > JOIN_L,
        ),
    }
}

fn join_arms<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
    match e {
        Expr::Join(a, b) => {
            join_arms(a, out);
            join_arms(b, out);
        }
        _ => out.push(e),
    }
}

/// Field names of a record-shaped lambda `\x. (let 'f = x in e) \/ ..`.
/// The empty record `\x. bot` has no fields.
pub fn record_fields(e: &Expr) -> Option<Vec<Symbol>> {
    let Expr::Lam(x, body) = e else { return None };
    let mut arms = Vec::new();
    join_arms(body, &mut arms);
    let mut fields = Vec::new();
    for arm in arms {
        match arm {
            Expr::Bot => {}
            Expr::LetSym(f, s, v) => {
                if !matches!(&**s, Expr::Var(y) if y == x) || v.free_vars().contains(x) {
                    return None;
                }
                if !fields.contains(f) {
                    fields.push(f.clone());
                }
            }
            _ => return None,
        }
    }
    fields.sort();
    Some(fields)
}

/// Renders a result for display. Records are shown as `{f = r, ..}` with
/// each field projected at `fuel`; fields projecting to ⊥ are omitted and the
/// empty record is `{=}`. Set elements are sorted.
pub fn render(r: &Expr, fuel: u32, table: &SymbolTable) -> String {
    rd(r, fuel, table, TOP)
}

/// Observations up to `max_fuel` whose rendering differs from the previous
/// one. Records are compared by their rendering, since a field can grow
/// while the record term stays the same.
pub fn rendered_change_points(e: &Expr, max_fuel: u32, table: &SymbolTable) -> Vec<(Observation, String)> {
    let mut out: Vec<(Observation, String)> = Vec::new();
    for o in observe(e, max_fuel, table) {
        let shown = render(&o.result, o.fuel, table);
        if out.last().is_none_or(|(_, prev)| *prev != shown) {
            out.push((o, shown));
        }
    }
    out
}

fn rd(e: &Expr, fuel: u32, t: &SymbolTable, prec: u8) -> String {
    if as_numeral(e).is_some() || is_nil(e) {
        return pp(e, prec);
    }
    if let Some((h, tl)) = as_cons(e) {
        return wrap(
            format!("{} :: {}", rd(h, fuel, t, APP_F), rd(tl, fuel, t, CONS_L)),
            prec > CONS_L,
        );
    }
    match e {
        Expr::Pair(a, b) => format!("({}, {})", rd(a, fuel, t, TOP), rd(b, fuel, t, TOP)),
        Expr::Set(es) => {
            let mut items: Vec<String> = es.iter().map(|x| rd(x, fuel, t, TOP)).collect();
            items.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
            items.dedup();
            format!("{{{}}}", items.join(", "))
        }
        Expr::Lam(..) => match record_fields(e) {
            Some(fields) => {
                let mut parts = Vec::new();
                for f in fields {
                    let v = stream_eval(&Expr::app(e.clone(), Expr::Sym(f.clone())), fuel, t);
                    if !matches!(v, Expr::Bot) {
                        parts.push(format!("{} = {}", f.text(), rd(&v, fuel, t, TOP)));
                    }
                }
                if parts.is_empty() {
                    "{=}".into()
                } else {
                    format!("{{{}}}", parts.join(", "))
                }
            }
            None => pp(e, prec),
        },
        _ => pp(e, prec),
    }
}

impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&pretty(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(k: u64) -> Expr {
        (0..k).fold(Expr::pair(Expr::sym("zero"), Expr::BotV), |acc, _| {
            Expr::pair(Expr::sym("succ"), acc)
        })
    }

    #[test]
    fn numerals_and_lists() {
        assert_eq!(pretty(&num(0)), "0");
        assert_eq!(pretty(&num(3)), "3");
        let l = Expr::pair(
            Expr::sym("cons"),
            Expr::pair(
                num(0),
                Expr::pair(Expr::sym("cons"), Expr::pair(num(1), Expr::BotV)),
            ),
        );
        assert_eq!(pretty(&l), "0 :: 1 :: botv");
    }

    #[test]
    fn core_forms() {
        let e = Expr::join(
            Expr::app(Expr::lam("x", Expr::var("x")), Expr::sym("a")),
            Expr::let_sym(Symbol::tt(), Expr::var("y"), Expr::Bot),
        );
        assert_eq!(pretty(&e), "(\\x. x) 'a \\/ (let true = y in bot)");
    }

    #[test]
    fn records_render_by_projection() {
        let rec = Expr::lam(
            "x",
            Expr::join(
                Expr::let_sym(Symbol::name("b"), Expr::var("x"), Expr::Sym(Symbol::tt())),
                Expr::let_sym(Symbol::name("a"), Expr::var("x"), num(5)),
            ),
        );
        let t = SymbolTable::discrete();
        assert_eq!(render(&rec, 4, &t), "{a = 5, b = true}");
        assert_eq!(render(&Expr::lam("x", Expr::Bot), 4, &t), "{=}");
    }
}
