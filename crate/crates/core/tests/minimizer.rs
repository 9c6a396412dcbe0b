//! Deviation minimization over parameterized metric families.

use flatlab_core::curvature;
use flatlab_core::field::ChartBox;
use flatlab_core::scalar::ScalarExpr;
use flatlab_core::tensor::SquareMatrix;
use flatlab_core::variational::{
    functional, minimize_deviation, AffineField, DensityKind, FamilySpec, FunctionalId, Gauge,
    GridQuadrature, MinimizeOptions, Variable,
};

fn conformal_family(cells: usize) -> FamilySpec {
    let chart = ChartBox::unit(2, cells);
    let phi = ScalarExpr::Add(vec![
        ScalarExpr::Sin(Box::new(ScalarExpr::affine(&[2.0, 1.3], 0.4))),
        ScalarExpr::Mul(vec![
            ScalarExpr::Const(0.4),
            ScalarExpr::Var(0),
            ScalarExpr::Var(1),
        ]),
    ]);
    FamilySpec::ConformalScale { phi, chart }
}

#[test]
fn conformal_descent_reaches_flat_member() {
    let family = conformal_family(24);
    let quad = GridQuadrature::new(family.chart().clone(), 0).unwrap();
    let id = FunctionalId::new(DensityKind::RiemannNorm, Variable::Metric, Gauge::None).unwrap();
    let result =
        minimize_deviation(id, &family, &quad, &[0.3], &MinimizeOptions::default()).unwrap();
    let final_value = *result.trace.last().unwrap();
    assert!(
        result.theta[0].abs() < 1e-4,
        "theta* = {} (trace len {})",
        result.theta[0],
        result.trace.len()
    );
    assert!(final_value < 1e-7, "final functional {final_value}");
    assert!(result.trace.len() <= 201);
    for w in result.trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-15, "trace not monotone: {} -> {}", w[0], w[1]);
    }
}

#[test]
fn start_at_minimum_converges_immediately() {
    let family = conformal_family(16);
    let quad = GridQuadrature::new(family.chart().clone(), 0).unwrap();
    let id = FunctionalId::new(DensityKind::RiemannNorm, Variable::Metric, Gauge::None).unwrap();
    let result =
        minimize_deviation(id, &family, &quad, &[0.0], &MinimizeOptions::default()).unwrap();
    assert_eq!(result.trace.len(), 1);
    assert!(result.trace[0].abs() < 1e-12);
    assert!(result.theta[0].abs() < 1e-12);
}

#[test]
fn coefficient_family_drives_connection_to_zero() {
    let chart = ChartBox::unit(2, 16);
    let basis = vec![
        (
            SquareMatrix::from_fn(2, |i, j| if i == j { 1.0 } else { 0.3 }),
            ScalarExpr::Sin(Box::new(ScalarExpr::affine(&[1.5, 0.7], 0.2))),
        ),
        (
            SquareMatrix::from_fn(2, |i, j| if i + j == 1 { 0.8 } else { 0.2 }),
            ScalarExpr::Cos(Box::new(ScalarExpr::affine(&[0.9, -1.1], 0.0))),
        ),
    ];
    let family = FamilySpec::Coefficients {
        basis,
        chart: chart.clone(),
    };
    let quad = GridQuadrature::new(chart, 0).unwrap();
    let id = FunctionalId::new(DensityKind::ConnNorm, Variable::Metric, Gauge::None).unwrap();
    let result =
        minimize_deviation(id, &family, &quad, &[0.05, -0.04], &MinimizeOptions::default())
            .unwrap();
    for w in result.trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-15);
    }
    // The minimizing member is flat: its Levi-Civita connection vanishes.
    let member = family.member(&result.theta).unwrap();
    let mut worst = 0.0f64;
    for x in [[0.3, 0.4], [0.6, 0.7], [0.5, 0.2]] {
        let cj = curvature::christoffel(&member.jet2(&x).unwrap()).unwrap();
        worst = worst.max(cj.gamma.max_abs());
    }
    assert!(worst < 1e-5, "residual connection norm {worst}");

    // Sanity: the functional value at the found member is tiny.
    let field = AffineField::from_metric_field(member);
    let quad2 = GridQuadrature::new(family.chart().clone(), 0).unwrap();
    let v = functional(id, &field, &quad2).unwrap();
    assert!(v < 1e-9, "final functional {v}");
}

#[test]
fn second_difference_of_deviation_is_nonnegative_through_flat() {
    // Along random parameter directions through the flat metric the
    // connection-deviation functional has nonnegative curvature.
    use flatlab_core::field::{FieldSpec, MetricKind};
    use flatlab_core::variational::{Bump, BumpWindow, MetricBump, MetricView};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    let chart = ChartBox::unit(2, 16);
    let spec = FieldSpec::metric(
        MetricKind::EuclideanConstant(SquareMatrix::identity(2)),
        chart.clone(),
    );
    let base = flatlab_core::field::MetricField::from_spec(&spec).unwrap();
    let quad = GridQuadrature::new(chart.clone(), 1).unwrap();
    let id = FunctionalId::new(DensityKind::ConnNorm, Variable::Metric, Gauge::None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let t = 1e-3;
    for _ in 0..20 {
        let raw = SquareMatrix::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
        let coeff = SquareMatrix::from_fn(2, |i, j| 0.5 * (raw.get(i, j) + raw.get(j, i)));
        let bump = MetricBump {
            window: BumpWindow::centered(&chart, 0.625),
            coeff,
        };
        let at = |eps: f64| {
            let field = AffineField {
                metric: MetricView::Perturbed {
                    base: base.clone(),
                    bump: bump.clone(),
                    eps,
                },
                gamma: flatlab_core::variational::GammaView::LeviCivita,
            };
            functional(id, &field, &quad).unwrap()
        };
        let second = (at(t) - 2.0 * at(0.0) + at(-t)) / (t * t);
        assert!(second >= -1e-9, "second difference {second}");
        let _ = Bump::Metric(bump);
    }
}

#[test]
fn zero_jet_hessian_vanishes_at_flat_jet() {
    // Perturbing only the point values of g^{ab} (derivative jets pinned at
    // zero) leaves the connection density identically zero at a flat jet:
    // the sampled second difference of the zero-order Lagrangian vanishes.
    use flatlab_core::field::MetricJet2;
    let n = 2;
    let t = 1e-2;
    let dir = SquareMatrix::from_fn(n, |i, j| if i == j { 0.7 } else { 0.25 });
    let density = |eps: f64| {
        let u = SquareMatrix::identity(n).add(&dir.scale(eps));
        let g = u.invert_spd().unwrap();
        let jet = MetricJet2::constant(vec![0.0; n], g.clone());
        let cj = flatlab_core::curvature::christoffel(&jet).unwrap();
        let ginv = g.invert_spd().unwrap();
        flatlab_core::tensor::connection_norm_sq(&g, &ginv, &cj.gamma).unwrap()
            * g.det().sqrt()
    };
    let second = (density(t) - 2.0 * density(0.0) + density(-t)) / (t * t);
    assert!(second.abs() < 1e-8, "zero-jet second difference {second}");
}
