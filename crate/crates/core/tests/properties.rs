mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sqc_core::dirac::analyze;
use sqc_core::error::Error;
use sqc_core::expr::{bracket_affine, AffineForm, PhaseFunction};
use sqc_core::matrix::RatMatrix;
use sqc_core::parser::parse_model;
use sqc_core::scalar::{rat, Scalar};

fn scalar() -> impl Strategy<Value = Scalar> {
    (-20i64..=20, 1i64..=9).prop_map(|(n, d)| rat(n, d))
}

fn form(dim: usize) -> impl Strategy<Value = AffineForm> {
    (prop::collection::vec(scalar(), dim), scalar()).prop_map(|(c, k)| AffineForm::new(c, k))
}

/// A random antisymmetric matrix.
fn structure(dim: usize) -> impl Strategy<Value = RatMatrix> {
    prop::collection::vec(scalar(), dim * dim).prop_map(move |v| {
        let mut m = RatMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i + 1..dim {
                m[(i, j)] = v[i * dim + j].clone();
                m[(j, i)] = -v[i * dim + j].clone();
            }
        }
        m
    })
}

fn bracket(s: &RatMatrix, f: &AffineForm, g: &AffineForm) -> Scalar {
    bracket_affine(f, &PhaseFunction::from_affine(g.clone()), s).unwrap().as_affine().unwrap().constant().clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn bracket_is_antisymmetric_and_bilinear(
        (s, f, g, h) in (2usize..=6).prop_flat_map(|d| (structure(d), form(d), form(d), form(d))),
        a in scalar(),
        b in scalar(),
    ) {
        prop_assert_eq!(bracket(&s, &f, &g), -bracket(&s, &g, &f));
        let lhs = bracket(&s, &f.scale(&a).add(&g.scale(&b)), &h);
        prop_assert_eq!(lhs, &a * bracket(&s, &f, &h) + &b * bracket(&s, &g, &h));
    }

    #[test]
    fn bracket_obeys_leibniz(
        (s, f, g, h) in (2usize..=6).prop_flat_map(|d| (structure(d), form(d), form(d), form(d))),
    ) {
        let lhs = bracket_affine(&f, &PhaseFunction::product(&g, &h), &s).unwrap();
        let rhs = PhaseFunction::from_affine(g.clone())
            .scale(&bracket(&s, &f, &h))
            .add(&PhaseFunction::from_affine(h.clone()).scale(&bracket(&s, &f, &g)));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn inverse_is_exact(v in prop::collection::vec(scalar(), 16)) {
        let m = RatMatrix::from_rows(v.chunks(4).map(<[Scalar]>::to_vec).collect());
        match m.inverse() {
            Some(inv) => prop_assert_eq!(m.mul(&inv), RatMatrix::identity(4)),
            None => prop_assert!(m.rank() < 4),
        }
    }

    #[test]
    fn parser_round_trips(seed in any::<u64>()) {
        let src = common::random_model_source(&mut ChaCha8Rng::seed_from_u64(seed));
        let model = parse_model(&src).unwrap();
        let again = parse_model(&model.to_source()).unwrap();
        prop_assert_eq!(&again.lagrangian, &model.lagrangian);
        prop_assert_eq!(again.to_source(), model.to_source());
    }

    #[test]
    fn structured_form_evaluates_like_the_expression(
        seed in any::<u64>(),
        q in prop::collection::vec(-2.0f64..2.0, 4),
        qdot in prop::collection::vec(-2.0f64..2.0, 4),
    ) {
        let src = common::random_model_source(&mut ChaCha8Rng::seed_from_u64(seed));
        let model = parse_model(&src).unwrap();
        let n = model.space.n();
        let direct = model.eval_lagrangian_expr(&q[..n], &qdot[..n]).unwrap();
        let structured = model.lagrangian.eval(&q[..n], &qdot[..n]);
        prop_assert!((direct - structured).abs() <= 1e-9 * direct.abs().max(1.0), "{} vs {}", direct, structured);
    }

    #[test]
    fn second_class_count_is_even(seed in any::<u64>()) {
        let src = common::random_model_source(&mut ChaCha8Rng::seed_from_u64(seed));
        let model = parse_model(&src).unwrap();
        match analyze(&model.lagrangian) {
            Ok(a) => {
                prop_assert_eq!(a.scc_selection.len() % 2, 0);
                let dof = a.dof();
                prop_assert_eq!(dof.phase + 2 * dof.fcc + dof.scc, dof.dimension);
            }
            Err(Error::Inconsistent { .. } | Error::UnsupportedNonAffineConstraint { .. }) => {}
            Err(e) => prop_assert!(false, "{}", e),
        }
    }
}
