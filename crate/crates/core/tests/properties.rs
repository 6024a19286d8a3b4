use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lambdav::assign::{check_assign, evident_forms};
use lambdav::formula::{enumerate_forms, form_join, form_leq, parse_form, Form, FormEnv};
use lambdav::pretty::pretty;
use lambdav::props::{random_open_term, random_term};
use lambdav::reduce::{replay, result_join};
use lambdav::stream::{drive, obs_leq, stream_eval};
use lambdav::surface::parse_expr;
use lambdav::syntax::decompose;
use lambdav::{Expr, Symbol, SymbolTable};

fn t() -> SymbolTable {
    SymbolTable::discrete()
}

fn term(seed: u64, size: usize) -> Expr {
    random_term(&mut ChaCha8Rng::seed_from_u64(seed), size)
}

fn result() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        Just(Expr::Bot),
        Just(Expr::Top),
        Just(Expr::BotV),
        prop::sample::select(vec!["a", "b", "c"]).prop_map(Expr::sym),
        Just(Expr::lam("x", Expr::sym("a"))),
        Just(Expr::lam("y", Expr::var("y"))),
    ];
    leaf.prop_recursive(3, 16, 3, |inner| {
        let value = inner.clone().prop_filter("value", Expr::is_value);
        prop_oneof![
            (value.clone(), value.clone()).prop_map(|(a, b)| Expr::pair(a, b)),
            prop::collection::vec(value, 0..3).prop_map(Expr::Set),
        ]
    })
}

fn same(a: &Expr, b: &Expr) -> bool {
    a.same_result(b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn result_join_is_a_semilattice(a in result(), b in result(), c in result()) {
        let t = t();
        let j = |x: &Expr, y: &Expr| result_join(x, y, &t);
        prop_assert!(same(&j(&a, &b), &j(&b, &a)));
        prop_assert!(same(&j(&j(&a, &b), &c), &j(&a, &j(&b, &c))));
        prop_assert!(same(&j(&a, &a), &a));
        prop_assert!(same(&j(&Expr::Bot, &a), &a));
        prop_assert!(matches!(j(&Expr::Top, &a), Expr::Top));
    }

    #[test]
    fn first_order_join_is_an_upper_bound(a in result(), b in result()) {
        let t = t();
        let ab = result_join(&a, &b, &t);
        prop_assert_ne!(obs_leq(&a, &ab, &t), Some(false));
        prop_assert_ne!(obs_leq(&b, &ab, &t), Some(false));
    }

    #[test]
    fn decompositions_plug_back(seed in any::<u64>()) {
        let e = term(seed, 9);
        for (ctx, redex) in decompose(&e, &t()) {
            prop_assert_eq!(ctx.plug(redex), e.clone());
        }
    }

    #[test]
    fn substitution_removes_the_variable(seed in any::<u64>(), v in result().prop_filter("closed value", |v| v.is_value())) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_open_term(&mut rng, 8, &["x", "y"]);
        let s = e.substitute("x", &v);
        let mut want = e.free_vars();
        want.remove("x");
        prop_assert_eq!(s.free_vars(), want);
    }

    #[test]
    fn printing_round_trips(seed in any::<u64>()) {
        let e = term(seed, 10);
        let back = parse_expr(&pretty(&e)).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn observations_grow_with_fuel(seed in any::<u64>()) {
        let e = term(seed, 10);
        let t = t();
        let mut prev = Expr::Bot;
        for n in 0..10 {
            let cur = stream_eval(&e, n, &t);
            prop_assert_ne!(obs_leq(&prev, &cur, &t), Some(false), "fuel {}", n);
            prev = cur;
        }
    }

    #[test]
    fn drive_replays_to_stream_eval(seed in any::<u64>(), n in 0u32..6) {
        let e = term(seed, 9);
        let t = t();
        if let Ok((r, trace)) = drive(&e, n, &t) {
            prop_assert!(same(&r, &stream_eval(&e, n, &t)));
            prop_assert!(same(&replay(&e, &trace, &t).unwrap(), &r));
        }
    }

    #[test]
    fn derivations_verify(seed in any::<u64>()) {
        let e = term(seed, 8);
        let t = t();
        for f in evident_forms(&e, 6, 3, &t) {
            if let Some(d) = check_assign(&FormEnv::new(), &e, &f, 3, &t) {
                prop_assert!(d.verify(&t).is_ok(), "{}", d);
                prop_assert_eq!(&d.form, &f);
            }
        }
    }
}

fn forms() -> Vec<Form> {
    enumerate_forms(3, &[Symbol::name("a"), Symbol::name("b")])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn formula_text_round_trips(i in 0usize..3157) {
        let f = &forms()[i];
        prop_assert_eq!(&parse_form(&f.to_string()).unwrap(), f);
    }

    #[test]
    fn formula_join_is_least(i in 0usize..3157, j in 0usize..3157, k in 0usize..3157) {
        let fs = forms();
        let (a, b, c) = (&fs[i], &fs[j], &fs[k]);
        let t = t();
        let ab = form_join(a, b, &t);
        prop_assert!(form_leq(a, &ab, &t) && form_leq(b, &ab, &t));
        if form_leq(a, c, &t) && form_leq(b, c, &t) {
            prop_assert!(form_leq(&ab, c, &t));
        }
    }
}
