//! Program fixtures with expected domains and plans computed by an independent
//! evaluator, plus print/parse round-trips over generated syntax trees.

mod common;

use proptest::prelude::*;

use common::*;
use sketchplan::lmp::ast::{BinOp, CmpOp, Expr, UnaryOp};
use sketchplan::lmp::{self, printer, LmpError};
use sketchplan::orchestrator::Method;
use sketchplan::scene::EnvKind;
use sketchplan::tasks;
use sketchplan::Config;

const TOL: f64 = 1e-9;

fn check(name: &str) {
    let cfg = Config::default();
    let (src, fx) = dsl_fixture(name);
    let p = lmp::extract_program(&fence(&src)).unwrap();
    let task = tasks::find_task(&fx.task).unwrap();
    let s0 = tasks::make_initial_state(&task, fx.seed, &cfg).unwrap();
    close(&s0, &fx.scene, TOL).unwrap_or_else(|e| panic!("scene: {e}"));
    let domain = lmp::eval_domain(&p, &s0, &cfg).unwrap();
    close(&domain, &fx.domain, TOL).unwrap_or_else(|e| panic!("domain: {e}"));
    let env = EnvKind::parse(&fx.env).unwrap();
    let plan = lmp::eval_plan(&p, &s0, &cfg, &fx.params, &env.skills()).unwrap();
    close(&plan, &fx.plan, TOL).unwrap_or_else(|e| panic!("plan: {e}"));
}

#[test]
fn place_in_bowl() {
    check("place_in_bowl");
}

#[test]
fn clear_then_place() {
    check("clear_then_place");
}

#[test]
fn five_block_line() {
    check("five_block_line");
}

#[test]
fn star() {
    check("star");
}

#[test]
fn arrow() {
    check("arrow");
}

#[test]
fn enclosed() {
    check("enclosed");
}

#[test]
fn pyramid() {
    check("pyramid");
}

#[test]
fn packing() {
    check("packing");
}

#[test]
fn ycb_packing() {
    check("ycb_packing");
}

#[test]
fn ycb_stack() {
    check("ycb_stack");
}

#[test]
fn fixtures_reprint_to_the_same_tree() {
    for name in DSL_FIXTURES {
        let (src, _) = dsl_fixture(name);
        let m = lmp::parse(&src).unwrap();
        let printed = printer::print_module(&m);
        assert_eq!(lmp::parse(&printed).unwrap(), m, "{name}");
        // printing is a fixed point after one pass
        assert_eq!(printer::print_module(&lmp::parse(&printed).unwrap()), printed, "{name}");
    }
}

#[test]
fn evaluation_leaves_the_scene_alone() {
    let cfg = Config::default();
    for name in DSL_FIXTURES {
        let (src, fx) = dsl_fixture(name);
        let p = lmp::extract_program(&fence(&src)).unwrap();
        let env = EnvKind::parse(&fx.env).unwrap();
        let before = fx.scene.clone();
        let a = lmp::eval_plan(&p, &fx.scene, &cfg, &fx.params, &env.skills()).unwrap();
        let b = lmp::eval_plan(&p, &fx.scene, &cfg, &fx.params, &env.skills()).unwrap();
        assert_eq!(a, b, "{name}");
        assert_eq!(fx.scene, before, "{name}");
    }
}

#[test]
fn sampled_values_stay_in_support() {
    use rand::SeedableRng;
    let cfg = Config::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for name in DSL_FIXTURES {
        let (src, fx) = dsl_fixture(name);
        let p = lmp::extract_program(&fence(&src)).unwrap();
        let d = lmp::eval_domain(&p, &fx.scene, &cfg).unwrap();
        for _ in 0..200 {
            let v = lmp::sample_vector(&d, &mut rng);
            for ((n, spec), (m, x)) in d.0.iter().zip(&v.0) {
                assert_eq!(n, m);
                match (spec, x) {
                    (lmp::SamplerSpec::Continuous { min, max }, lmp::ParamValue::Scalar(x)) => {
                        assert!(x >= min && x <= max, "{name}.{n}")
                    }
                    (lmp::SamplerSpec::Discrete { values }, x) => assert!(values.contains(x), "{name}.{n}"),
                    (lmp::SamplerSpec::Grasp, lmp::ParamValue::Pose(g)) => {
                        assert!(g.x.abs() <= 0.02 && g.y.abs() <= 0.02 && g.pitch == std::f64::consts::PI)
                    }
                    other => panic!("{name}.{n}: {other:?}"),
                }
            }
        }
    }
}

#[test]
fn replay_fixtures_parse_and_evaluate_on_seed_zero() {
    let cfg = Config::default();
    for task in tasks::catalog() {
        let s0 = tasks::make_initial_state(&task, 0, &cfg).unwrap();
        let skills = task.env.skills();
        for method in [Method::Proc3s, Method::Cap, Method::Llm3] {
            let rel = format!("replay/{}/{}.json", task.id, method.as_str());
            let responses: Vec<String> = serde_json::from_str(&read(&rel)).unwrap();
            assert_eq!(responses.len(), 6, "{rel}");
            for (i, r) in responses.iter().enumerate() {
                match method {
                    Method::Llm3 => {
                        let e = lmp::extract_literal_plan(r).unwrap_or_else(|e| panic!("{rel}[{i}]: {e}"));
                        let plan = lmp::eval_literal_plan(&e, &s0, &cfg, &skills).unwrap();
                        assert!(!plan.is_empty(), "{rel}[{i}]");
                    }
                    _ => {
                        let p = lmp::extract_program(r).unwrap_or_else(|e| panic!("{rel}[{i}]: {e}"));
                        let again = lmp::extract_program(&fence(&p.to_source())).unwrap();
                        assert_eq!(again.plan_fn, p.plan_fn, "{rel}[{i}]");
                        let d = lmp::eval_domain(&p, &s0, &cfg).unwrap_or_else(|e| panic!("{rel}[{i}]: {e}"));
                        if method == Method::Cap {
                            assert!(d.is_empty(), "{rel}[{i}] has free parameters");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn literal_plans_reject_computation() {
    let e = lmp::parse_expr("[Action(\"pick\", [x, 0.1, 0.2])]").unwrap();
    let cfg = Config::default();
    let r = lmp::eval_literal_plan(&e, &Default::default(), &cfg, &EnvKind::ArrangeBlocks.skills());
    assert!(matches!(r, Err(LmpError::NonLiteral(_))), "{r:?}");
}

const NAMES: [&str; 6] = ["a", "b", "block", "TABLE_BOUNDS", "x_1", "plan"];

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0i64..1_000_000).prop_map(Expr::Int),
        (0.0f64..1e6).prop_map(Expr::Float),
        (1e-9f64..1e-3).prop_map(Expr::Float),
        "[a-z \\\\\"']{0,6}".prop_map(Expr::Str),
        any::<bool>().prop_map(Expr::Bool),
        Just(Expr::None),
        prop::sample::select(NAMES.to_vec()).prop_map(|n| Expr::Name(n.into())),
    ]
}

fn binop() -> impl Strategy<Value = BinOp> {
    prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::FloorDiv, BinOp::Mod, BinOp::Pow])
}

fn cmpop() -> impl Strategy<Value = CmpOp> {
    prop::sample::select(vec![CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::In, CmpOp::NotIn])
}

fn expr_tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 48, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Expr::List),
            prop::collection::vec(inner.clone(), 0..4).prop_map(Expr::Tuple),
            prop::collection::vec((inner.clone(), inner.clone()), 0..3).prop_map(Expr::Dict),
            (prop::sample::select(vec![UnaryOp::Neg, UnaryOp::Pos, UnaryOp::Not]), inner.clone())
                .prop_map(|(op, e)| Expr::Unary(op, Box::new(e))),
            (binop(), inner.clone(), inner.clone()).prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
            (inner.clone(), prop::collection::vec((cmpop(), inner.clone()), 1..3))
                .prop_map(|(a, rest)| Expr::Cmp(Box::new(a), rest)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Or(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone(), inner.clone())
                .prop_map(|(a, b, c)| Expr::IfExp(Box::new(a), Box::new(b), Box::new(c))),
            (inner.clone(), prop::sample::select(vec!["pose", "point", "x"]))
                .prop_map(|(a, n)| Expr::Attr(Box::new(a), n.into())),
            (inner.clone(), inner.clone()).prop_map(|(a, i)| Expr::Index(Box::new(a), Box::new(i))),
            (
                inner.clone(),
                prop::collection::vec(inner.clone(), 0..3),
                prop::collection::vec((prop::sample::select(vec!["k", "z"]), inner), 0..2)
            )
                .prop_map(|(f, args, kw)| {
                    let mut kw: Vec<(String, Expr)> = kw.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
                    kw.dedup_by(|a, b| a.0 == b.0);
                    Expr::Call(Box::new(f), args, kw)
                }),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 512, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn printed_expressions_reparse_identically(e in expr_tree()) {
        let s = printer::expr(&e);
        let back = lmp::parse_expr(&s).map_err(|err| TestCaseError::fail(format!("{s}: {err}")))?;
        prop_assert_eq!(back, e, "{}", s);
    }
}
