use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use wavelab_core::spectral::{
    band_limit, bessel_potential, derivative, forward, helmholtz_inverse, inverse, sobolev_norm, MultiplierSymbol,
};
use wavelab_core::{Field, Grid};

fn grid(n: usize) -> Arc<Grid> {
    Grid::new(2.0 * PI, n).unwrap()
}

fn field_from(values: Vec<f64>) -> Field {
    let g = grid(values.len());
    // Nyquist content has no well-defined odd derivative; drop it.
    band_limit(&Field::new(g, values).unwrap(), 31)
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 64)
}

fn max_diff(a: &Field, b: &Field) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval_matches_quadrature(v in values()) {
        let u = field_from(v);
        let spectral = sobolev_norm(&u, 0.0);
        let quad = u.l2_quadrature();
        prop_assert!((spectral - quad).abs() <= 1e-12 * (1.0 + quad));
    }

    #[test]
    fn transform_round_trip(v in values()) {
        let u = field_from(v);
        let back = inverse(&forward(&u)).unwrap();
        prop_assert!(max_diff(&u, &back) < 1e-13);
    }

    #[test]
    fn real_fields_have_hermitian_spectra(v in values()) {
        prop_assert!(forward(&field_from(v)).hermitian_defect() < 1e-14);
    }

    #[test]
    fn bessel_potentials_compose(v in values(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let u = field_from(v);
        let two_step = bessel_potential(&bessel_potential(&u, a), b);
        let one_step = bessel_potential(&u, a + b);
        prop_assert!(max_diff(&two_step, &one_step) <= 1e-9 * (1.0 + u.max_abs()));
    }

    #[test]
    fn sobolev_norm_is_monotone_in_index(v in values(), s in -2.0f64..2.0, ds in 0.0f64..1.0) {
        let u = field_from(v);
        prop_assert!(sobolev_norm(&u, s) <= sobolev_norm(&u, s + ds) * (1.0 + 1e-14));
    }

    #[test]
    fn helmholtz_inverse_contracts_every_norm(v in values(), mb in -0.99f64..-1e-3, s in -1.0f64..3.0) {
        let u = field_from(v);
        let h = helmholtz_inverse(&u, mb).unwrap();
        prop_assert!(sobolev_norm(&h, s) <= sobolev_norm(&u, s) * (1.0 + 1e-13));
    }

    #[test]
    fn helmholtz_inverse_undoes_the_operator(v in values(), mb in -0.99f64..-1e-3) {
        let u = field_from(v);
        let h = helmholtz_inverse(&u, mb).unwrap();
        let back = h.axpy(mb, &derivative(&h, 2));
        prop_assert!(max_diff(&u, &back) <= 1e-10 * (1.0 + u.max_abs()));
    }

    #[test]
    fn derivative_of_band_limited_field_has_zero_mean(v in values()) {
        let ux = derivative(&field_from(v), 1);
        prop_assert!(ux.mean().abs() < 1e-12);
    }

    #[test]
    fn composed_symbols_match_sequential_application(v in values(), s in -1.5f64..1.5) {
        let u = field_from(v);
        let composed = MultiplierSymbol::bessel(s).compose(&MultiplierSymbol::derivative(1));
        let once = wavelab_core::spectral::apply_multiplier(&u, &composed).unwrap();
        let twice = bessel_potential(&derivative(&u, 1), s);
        prop_assert!(max_diff(&once, &twice) <= 1e-9 * (1.0 + u.max_abs()));
    }
}

#[test]
fn single_modes_are_exact_up_to_nyquist_minus_one() {
    let g = grid(64);
    for k in 1..=31i32 {
        let kf = k as f64;
        let c = Field::from_fn(g.clone(), |x| (kf * x).cos()).unwrap();
        let s = Field::from_fn(g.clone(), |x| (kf * x).sin()).unwrap();
        let expected = s.scale(-kf);
        let got = derivative(&c, 1);
        assert!(max_diff(&got, &expected) <= 1e-11 * kf, "k = {k}");
        let lam = bessel_potential(&c, 1.5);
        let factor = (1.0 + kf * kf).powf(0.75);
        assert!(max_diff(&lam, &c.scale(factor)) <= 1e-11 * factor, "k = {k}");
    }
}
