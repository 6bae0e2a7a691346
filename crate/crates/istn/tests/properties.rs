//! Property tests of the spatial backend and the loss/report algebra.

use proptest::prelude::*;

use istn::eval::{recovery_report, EvalResult, MetricKind};
use istn::spatial::{
    compose_displacement, cpgrid_to_dense, identity_grid, resample, ControlPointGrid,
    DenseDisplacementField, SamplingGrid,
};
use istn::Tensor;

fn small_image() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, 64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Resampled intensities never leave the convex hull of the input values
    /// extended with the zero padding value.
    #[test]
    fn resample_respects_mass_bound(
        img_data in small_image(),
        shifts in proptest::collection::vec(-1.5f64..1.5, 128),
    ) {
        let img = Tensor::from_vec(&[1, 8, 8], img_data.clone()).unwrap();
        let mut grid = identity_grid::<f64>(&[8, 8]);
        for (g, s) in grid.data.iter_mut().zip(shifts.iter()) {
            *g += s;
        }
        let out = resample(&img, &grid).unwrap();
        let lo = img_data.iter().cloned().fold(0.0f64, f64::min);
        let hi = img_data.iter().cloned().fold(0.0f64, f64::max);
        for v in out.data() {
            prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
        }
    }

    /// A voxel samples exactly zero once any coordinate is at least one
    /// pixel beyond the unit cube (zero padding; inside the one-pixel border
    /// ring partial contributions fade linearly to zero).
    #[test]
    fn far_outside_samples_are_zero(
        img_data in small_image(),
        sign_x in prop::bool::ANY,
        sign_y in prop::bool::ANY,
        mag in 1.3f64..4.0,
    ) {
        let img = Tensor::from_vec(&[1, 8, 8], img_data).unwrap();
        let c = mag * if sign_x { 1.0 } else { -1.0 };
        let cy = mag * if sign_y { 1.0 } else { -1.0 };
        let grid = SamplingGrid::new(&[2, 2], 2, vec![c, cy, c, cy, c, cy, c, cy]).unwrap();
        let out = resample(&img, &grid).unwrap();
        for v in out.data() {
            prop_assert_eq!(*v, 0.0);
        }
    }

    /// Control-point interpolation is linear in the displacements.
    #[test]
    fn cpgrid_linear_in_displacements(
        d1 in proptest::collection::vec(-0.5f64..0.5, 2 * 5 * 5),
        d2 in proptest::collection::vec(-0.5f64..0.5, 2 * 5 * 5),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        let spatial = [16usize, 16usize];
        let mut g1 = ControlPointGrid::<f64>::zeros(&spatial, 8).unwrap();
        g1.disp.copy_from_slice(&d1);
        let mut g2 = ControlPointGrid::<f64>::zeros(&spatial, 8).unwrap();
        g2.disp.copy_from_slice(&d2);
        let mut gc = ControlPointGrid::<f64>::zeros(&spatial, 8).unwrap();
        for i in 0..d1.len() {
            gc.disp[i] = a * d1[i] + b * d2[i];
        }
        let f1 = cpgrid_to_dense(&g1, &spatial).unwrap();
        let f2 = cpgrid_to_dense(&g2, &spatial).unwrap();
        let fc = cpgrid_to_dense(&gc, &spatial).unwrap();
        for i in 0..fc.data.len() {
            prop_assert!((fc.data[i] - (a * f1.data[i] + b * f2.data[i])).abs() < 1e-9);
        }
    }

    /// Composing a displacement field adds it pointwise to the identity.
    #[test]
    fn compose_is_identity_plus_field(
        field_data in proptest::collection::vec(-0.3f64..0.3, 2 * 6 * 6),
    ) {
        let field = DenseDisplacementField {
            spatial: vec![6, 6],
            dim: 2,
            data: field_data.clone(),
        };
        let grid = compose_displacement(&field).unwrap();
        let id = identity_grid::<f64>(&[6, 6]);
        for i in 0..field_data.len() {
            prop_assert!((grid.data[i] - (id.data[i] + field_data[i])).abs() < 1e-15);
        }
    }

    /// Recovery deltas always recompute exactly from their inputs.
    #[test]
    fn recovery_delta_arithmetic(
        base in 0.0f64..100.0,
        adapted in 0.0f64..100.0,
        mae_base in 0.0f64..20.0,
        mae_adapted in 0.0f64..20.0,
    ) {
        let acc = |v: f64, m: &str| EvalResult {
            metric_kind: MetricKind::AccuracyPct,
            value: v,
            n: 10,
            domain_evaluated: "T".into(),
            model_id: m.into(),
        };
        let rep = recovery_report(&acc(base, "b"), &acc(adapted, "s"), None).unwrap();
        prop_assert!((rep.delta_scratch - (adapted - base)).abs() < 1e-9);

        let mae = |v: f64, m: &str| EvalResult {
            metric_kind: MetricKind::MaeYears,
            value: v,
            n: 10,
            domain_evaluated: "T".into(),
            model_id: m.into(),
        };
        let rep = recovery_report(&mae(mae_base, "b"), &mae(mae_adapted, "s"), None).unwrap();
        prop_assert!((rep.delta_scratch - (mae_base - mae_adapted)).abs() < 1e-9);
    }
}
