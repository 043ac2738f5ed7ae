use nisakns_cli::config::{format_complex, parse_complex, PotentialKind, Seeding};
use nisakns_cli::{emit, parse_config, ScenarioConfig};
use nisakns_core::C64;
use proptest::prelude::*;

const MKDV: &str = include_str!("../scenarios/mkdv.conf");

fn messages(text: &str) -> Vec<String> {
    parse_config(text)
        .expect_err("config should be rejected")
        .0
        .iter()
        .map(|d| d.to_string())
        .collect()
}

#[test]
fn shipped_scenario_is_the_unit_soliton() {
    let cfg = parse_config(MKDV).unwrap();
    let spec = cfg.soliton_spec(cfg.grid()).expect("mkdv seeding");
    assert_eq!(spec.kappa0, 1.0);
    assert_eq!(spec.c0, -4.0);
    assert_eq!(spec.grid.nx, 2001);
    assert_eq!(spec.grid.t_samples, vec![0.0, 0.05, 0.1]);
    assert_eq!(spec.second_lambda, None);
    spec.validate().unwrap();
}

#[test]
fn every_shipped_scenario_round_trips() {
    for text in [
        MKDV,
        include_str!("../scenarios/mkdv_two.conf"),
        include_str!("../scenarios/gaussian_dressing.conf"),
    ] {
        let cfg = parse_config(text).unwrap();
        let canonical = emit(&cfg);
        assert_eq!(parse_config(&canonical).unwrap(), cfg);
        assert_eq!(emit(&parse_config(&canonical).unwrap()), canonical);
    }
}

#[test]
fn empty_text_is_missing_system() {
    assert_eq!(messages(""), vec!["missing section: system".to_string()]);
    assert_eq!(
        messages("# only a comment\n\n")[0],
        "missing section: system"
    );
}

#[test]
fn equal_j_entries_cite_distinctness() {
    let text = MKDV.replace("j = 1, -1", "j = 1, 1");
    let msgs = messages(&text);
    assert!(
        msgs.iter()
            .any(|m| m.starts_with("line 5:") && m.contains("distinct")),
        "{msgs:?}"
    );
}

#[test]
fn unknown_key_names_nearest_valid_key() {
    let text = MKDV.replace("nx = 2001", "nxx = 2001");
    let msgs = messages(&text);
    assert!(
        msgs.iter()
            .any(|m| m.contains("unknown key `nxx` in [grid]; did you mean `nx`?")),
        "{msgs:?}"
    );
    let text = MKDV.replace("[darboux]", "[darbox]");
    let msgs = messages(&text);
    assert!(
        msgs.iter().any(|m| m.contains("did you mean `darboux`")),
        "{msgs:?}"
    );
    let text = MKDV.replace("kappa0 = 1", "kapa0 = 1");
    let msgs = messages(&text);
    assert!(
        msgs.iter().any(|m| m.contains("did you mean `kappa0`")),
        "{msgs:?}"
    );
}

#[test]
fn diagnostics_carry_line_numbers() {
    let text = "[system]\nn = 2\nj = 1, -1\n[flow]\norder = three\nf = 0, 1\n[grid]\nx_min = -1\nx_max = 1\nnx = 101\nt = 0\n";
    let msgs = messages(text);
    assert!(
        msgs.iter()
            .any(|m| m.starts_with("line 5:") && m.contains("integer")),
        "{msgs:?}"
    );
}

#[test]
fn invariant_violations_are_reported() {
    let cases = [
        (
            MKDV.replace("f = 0, 0, 0, 1", "f = 0, 0, 0, 0, 1"),
            "exceeds the hierarchy order",
        ),
        (
            MKDV.replace("alpha_3 = -4, 4", "alpha_3 = -4, 3"),
            "trace-free",
        ),
        (MKDV.replace("nx = 2001", "nx = 3"), "nx"),
        (
            MKDV.replace("t = 0, 0.05, 0.1", "t = 0.1, 0.05"),
            "strictly increasing",
        ),
        (
            MKDV.replace("kappa0 = 1", "kappa0 = 0.3"),
            "invalid soliton parameters",
        ),
        (
            MKDV.replace("alpha_3 = -4, 4", "alpha_3 = -2, 2"),
            "selects the MKdV seed",
        ),
        (
            MKDV.replace("c0 = -4", "c0 = -4\nlambda = -1, 1"),
            "mutually exclusive",
        ),
        (
            MKDV.replace("[system]", "[grid]\nx_min = 0\n[system]"),
            "appears twice",
        ),
        (
            MKDV.replace("j = 1, -1", "j = 1, -1\nj = 2, -2"),
            "duplicate key",
        ),
        (
            MKDV.replace("formats = csv, json", "formats = csv, xml"),
            "unknown format",
        ),
    ];
    for (text, needle) in cases {
        let msgs = messages(&text);
        assert!(
            msgs.iter().any(|m| m.contains(needle)),
            "expected `{needle}` in {msgs:?}"
        );
    }
}

#[test]
fn generic_dressing_needs_off_gamma_spectrum() {
    let text = include_str!("../scenarios/gaussian_dressing.conf")
        .replace("lambda = -0.8, 0.8", "lambda = 0.3i, 0.8");
    let msgs = messages(&text);
    assert!(msgs.iter().any(|m| m.contains("Gamma_J")), "{msgs:?}");
}

fn complex() -> impl Strategy<Value = C64> {
    let part = prop_oneof![
        Just(0.0),
        -10.0..10.0f64,
        (-300i32..300).prop_map(|e| 1.5 * 10f64.powi(e))
    ];
    (part.clone(), part).prop_map(|(re, im)| C64::new(re, im))
}

fn scenario() -> impl Strategy<Value = ScenarioConfig> {
    (2usize..5, 0usize..5)
        .prop_flat_map(|(n, order)| {
            (
                Just(n),
                Just(order),
                prop::collection::vec(complex(), order + 1),
                prop::collection::vec(prop::collection::vec(complex(), n - 1), order + 1),
                (-20.0..-1.0f64, 1.0..20.0f64, 11usize..5000),
                prop::collection::vec(0.0..1.0f64, 1..5),
                prop::collection::vec(0.1..3.0f64, n),
                prop::collection::vec(prop::collection::vec(complex(), n), n),
                prop::collection::vec(1e-14..1.0f64, 13),
                any::<bool>(),
            )
        })
        .prop_map(
            |(n, order, f, partial, (x_min, x_max, nx), mut t, lam, mixing, tols, gaussian)| {
                let j: Vec<C64> = (0..n)
                    .map(|k| C64::new(n as f64 - 1.0 - 2.0 * k as f64, 0.0))
                    .collect();
                let alphas = partial
                    .into_iter()
                    .map(|mut d| {
                        let s: C64 = d.iter().sum();
                        d.push(-s);
                        d
                    })
                    .collect::<Vec<_>>();
                t.sort_by(f64::total_cmp);
                t.dedup();
                let lambda = lam.iter().map(|&l| C64::new(l, 0.25)).collect();
                let potential = if gaussian {
                    let amplitude = (0..n * n)
                        .map(|k| {
                            if k % (n + 1) == 0 {
                                C64::new(0.0, 0.0)
                            } else {
                                C64::new(k as f64 * 0.1, -0.5)
                            }
                        })
                        .collect();
                    PotentialKind::Gaussian {
                        amplitude,
                        centre: 0.25,
                        width: 1.5,
                    }
                } else {
                    PotentialKind::Zero
                };
                let mut cfg = ScenarioConfig {
                    j,
                    order,
                    f,
                    alphas,
                    x_min,
                    x_max,
                    nx,
                    t,
                    potential,
                    seeding: Some(Seeding::Generic { lambda, mixing }),
                    tolerances: Default::default(),
                    directory: "out/random".into(),
                    formats: vec![nisakns_cli::config::Format::Json],
                };
                let tol = &mut cfg.tolerances;
                for (slot, v) in [
                    &mut tol.algebraic,
                    &mut tol.recurrence,
                    &mut tol.constants,
                    &mut tol.similarity,
                    &mut tol.zero_curvature,
                    &mut tol.governing,
                    &mut tol.edge,
                    &mut tol.rate_relative,
                    &mut tol.dual_route,
                    &mut tol.mkdv_recurrence,
                    &mut tol.reduction,
                ]
                .into_iter()
                .zip(&tols)
                {
                    *slot = *v;
                }
                tol.order_min = tols[11];
                tol.order_max = tols[11] + tols[12];
                cfg
            },
        )
}

proptest! {
    #[test]
    fn complex_literals_round_trip(z in complex()) {
        prop_assert_eq!(parse_complex(&format_complex(z)), Some(z));
    }

    #[test]
    fn emit_then_parse_is_identity(cfg in scenario()) {
        let text = emit(&cfg);
        let parsed = parse_config(&text);
        prop_assert!(parsed.is_ok(), "{}\n{}", text, parsed.unwrap_err());
        let parsed = parsed.unwrap();
        prop_assert_eq!(&parsed, &cfg);
        prop_assert_eq!(emit(&parsed), text);
    }
}
