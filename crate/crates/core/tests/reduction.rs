use nalgebra::DVector;
use proptest::prelude::*;
use sparsegap_core::hard_design::quantize;
use sparsegap_core::seed::rng;
use sparsegap_core::x3c::{
    build_cover_matrix, build_response, decode_cover, encode_cover, solve_x3c_bruteforce, ExactCover, X3CInstance,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cover_matrix_energy_bound(m in prop::sample::select(vec![3usize, 6, 9]), seed in any::<u64>()) {
        let cm = build_cover_matrix(m).unwrap();
        let p = cm.p();
        let mut r = rng(seed);
        let u = DVector::from_fn(4 * p, |_, _| rand::Rng::gen_range(&mut r, -1.0..1.0));
        let lhs = (cm.matrix() * &u).norm_squared();
        prop_assert!(lhs <= 8.0 * p as f64 * u.norm_squared() * (1.0 + 1e-12));
    }

    #[test]
    fn planted_round_trip(seed in any::<u64>(), density in 0.0f64..0.6) {
        let inst = X3CInstance::random(6, density, true, &mut rng(seed)).unwrap();
        let cover = solve_x3c_bruteforce(&inst).unwrap().expect("planted instance has a cover");
        let u = encode_cover(&inst, &cover).unwrap();
        let cm = build_cover_matrix(6).unwrap();
        prop_assert_eq!(u.nnz, 2 + cm.p());
        prop_assert_eq!(cm.residual(&u.to_vector(), &build_response(&inst)), 0.0);
        prop_assert_eq!(decode_cover(&inst, &u.to_vector()).unwrap(), cover);
    }

    #[test]
    fn quantize_is_idempotent_and_tight(x in -1e6f64..1e6, l in 0u32..40) {
        let q = quantize(x, l);
        prop_assert_eq!(quantize(q, l), q);
        prop_assert!(q <= x && x - q < libm::ldexp(1.0, -(l as i32)));
    }
}

#[test]
fn every_encoded_cover_decodes_back() {
    // all covers of the complete collection at m = 6
    let triples: Vec<[usize; 3]> =
        (1..=6usize).flat_map(|a| ((a + 1)..=6).flat_map(move |b| ((b + 1)..=6).map(move |c| [a, b, c]))).collect();
    let inst = X3CInstance::new(6, triples).unwrap();
    let covers = sparsegap_core::x3c::all_exact_covers(&inst, 1_000_000).unwrap();
    assert_eq!(covers.len(), 10);
    for c in covers {
        let u = encode_cover(&inst, &c).unwrap();
        assert_eq!(decode_cover(&inst, &u.to_vector()).unwrap(), c);
    }
    assert!(encode_cover(&inst, &ExactCover::new([1, 2])).is_err());
}
