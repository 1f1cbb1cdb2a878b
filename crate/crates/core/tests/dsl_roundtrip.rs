use causal_kit::dsl::{parse_scm, serialize_scm};
use causal_kit::fixtures;
use causal_kit::sampling::RngSpec;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn random_models_round_trip(seed in any::<u64>(), size in 1usize..8) {
        let mut rng = RngSpec::new(seed).stream(0, "model");
        let scm = fixtures::random_scm(&mut rng, size);
        let text = serialize_scm(&scm);
        let back = parse_scm(&text).map_err(|e| TestCaseError::fail(format!("{e:?}\n{text}")))?;
        prop_assert_eq!(&back, &scm);
        // serializing again is a fixed point
        prop_assert_eq!(serialize_scm(&back), text);
    }

    #[test]
    fn arbitrary_text_never_panics(src in "\\PC{0,200}") {
        let _ = parse_scm(&src);
    }

    #[test]
    fn token_soup_never_panics(tokens in prop::collection::vec(
        prop::sample::select(vec![
            "var", "x", "y", ":", "{", "}", "0", "1", "-", ",", ";", "~", ":=", "cpt", "|", "->",
            "normal", "bernoulli", "uniform", "point", "(", ")", "+", "*", "/", "ind", "max", "real", "1e999",
        ]),
        0..40,
    )) {
        let _ = parse_scm(&tokens.join(" "));
    }

    #[test]
    fn errors_point_inside_the_source(src in "[a-z0-9 :;{},~=()+*|>-]{0,80}") {
        if let Err(errs) = parse_scm(&src) {
            prop_assert!(!errs.is_empty());
            let lines = src.lines().count().max(1);
            for e in errs {
                prop_assert!(e.span.line >= 1 && e.span.line <= lines + 1, "{e}");
            }
        }
    }
}

#[test]
fn every_fixture_round_trips() {
    for src in [
        fixtures::VACCINE_TOY,
        fixtures::CONFOUNDED_ASSIGNMENT,
        fixtures::MARKER_EFFECT,
        fixtures::TWO_HABITS,
        fixtures::SEASONING,
    ] {
        let scm = parse_scm(src).unwrap();
        assert_eq!(parse_scm(&serialize_scm(&scm)).unwrap(), scm);
    }
    for scm in [
        fixtures::two_path_model(1.0, 2.0),
        fixtures::covariance_example(),
        fixtures::iv_linear(),
        fixtures::did_model(),
        fixtures::rdd_model(),
    ] {
        assert_eq!(parse_scm(&serialize_scm(&scm)).unwrap(), scm);
    }
}
