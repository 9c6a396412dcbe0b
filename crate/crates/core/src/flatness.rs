//! Flatness classification, the Riccati connection systems and their
//! perturbation form, numerical integrability and cone-condition checks, the
//! normal-coordinate metric series for a prescribed curvature, and the
//! geodesic-ball volume expansion check.

use crate::curvature::{self, CurvatureBundle};
use crate::error::{Error, Result};
use crate::field::{ConnectionField, ConnectionJet1, FieldKind, FieldSpec, MetricField, MetricKind};
use crate::tensor::{LoweredCurvature, SquareMatrix, Tensor3, Tensor4};

/// Default flatness tolerance for analytic jets.
pub const FLAT_TOL_ANALYTIC: f64 = 1e-8;
/// Default flatness tolerance when jets come from finite differences.
pub const FLAT_TOL_FD: f64 = 1e-5;

/// Pointwise flatness residuals over a sample, with the chain
/// curvature-flat ⟹ Ricci-flat ⟹ scalar-flat enforced on the booleans.
#[derive(Debug, Clone)]
pub struct FlatnessReport {
    pub connection_flat: bool,
    pub curvature_flat: bool,
    pub ricci_flat: bool,
    pub scalar_flat: bool,
    pub max_connection: f64,
    pub max_curvature: f64,
    pub max_ricci: f64,
    pub max_scalar: f64,
    pub points_checked: usize,
}

/// Classify a field's flatness by max-abs residuals of Γ, R^l_ijk, Ric and
/// the scalar curvature over the sample points.
///
/// Connection fields are traced against the Euclidean metric for the scalar
/// category; metric fields use their own Levi-Civita connection throughout.
pub fn classify_flatness(
    spec: &FieldSpec,
    sample: &[Vec<f64>],
    tol: f64,
) -> Result<FlatnessReport> {
    let mut max_conn = 0.0f64;
    let mut max_curv = 0.0f64;
    let mut max_ricci = 0.0f64;
    let mut max_scalar = 0.0f64;
    match &spec.kind {
        FieldKind::Metric(_) => {
            let field = MetricField::from_spec(spec)?;
            for x in sample {
                let jet = field.jet2(x)?;
                let bundle = CurvatureBundle::from_metric_jet(&jet)?;
                let cj = curvature::christoffel(&jet)?;
                max_conn = max_conn.max(cj.gamma.max_abs());
                max_curv = max_curv.max(bundle.mixed.max_abs());
                max_ricci = max_ricci.max(bundle.ricci.max_abs());
                max_scalar = max_scalar.max(bundle.scalar.abs());
            }
        }
        FieldKind::Connection(_) => {
            let field = ConnectionField::from_spec(spec)?;
            let n = field.n();
            let euclid = SquareMatrix::identity(n);
            for x in sample {
                let cj = field.jet1(x)?;
                let r = curvature::riemann_mixed(&cj);
                let ric = curvature::ricci_from_mixed(&r);
                max_conn = max_conn.max(cj.gamma.max_abs());
                max_curv = max_curv.max(r.max_abs());
                max_ricci = max_ricci.max(ric.max_abs());
                max_scalar = max_scalar.max(curvature::scalar_curvature(&euclid, &ric).abs());
            }
        }
    }
    let connection_flat = max_conn <= tol;
    let mut curvature_flat = max_curv <= tol || connection_flat;
    let mut ricci_flat = max_ricci <= tol;
    let mut scalar_flat = max_scalar <= tol;
    if curvature_flat {
        ricci_flat = true;
    }
    if ricci_flat {
        scalar_flat = true;
    }
    if connection_flat {
        curvature_flat = true;
    }
    Ok(FlatnessReport {
        connection_flat,
        curvature_flat,
        ricci_flat,
        scalar_flat,
        max_connection: max_conn,
        max_curvature: max_curv,
        max_ricci,
        max_scalar,
        points_checked: sample.len(),
    })
}

/// Residual of the first Riccati system, ∂_p Γ^l_is + Γ^l_pn Γ^n_is,
/// stored `[p][l][i][s]`.
pub fn riccati_residual_plus(cj: &ConnectionJet1) -> Tensor4 {
    let n = cj.n();
    let mut out = Tensor4::zeros(n);
    for p in 0..n {
        for l in 0..n {
            for i in 0..n {
                for s in 0..n {
                    let mut v = cj.dgamma.get(p, l, i, s);
                    for m in 0..n {
                        v += cj.gamma.get(l, p, m) * cj.gamma.get(m, i, s);
                    }
                    out.set(p, l, i, s, v);
                }
            }
        }
    }
    out
}

/// Residual of the second Riccati system, ∂_p Γ^l_is − Γ^l_sn Γ^n_ip.
pub fn riccati_residual_minus(cj: &ConnectionJet1) -> Tensor4 {
    let n = cj.n();
    let mut out = Tensor4::zeros(n);
    for p in 0..n {
        for l in 0..n {
            for i in 0..n {
                for s in 0..n {
                    let mut v = cj.dgamma.get(p, l, i, s);
                    for m in 0..n {
                        v -= cj.gamma.get(l, s, m) * cj.gamma.get(m, i, p);
                    }
                    out.set(p, l, i, s, v);
                }
            }
        }
    }
    out
}

/// Which Riccati system a check refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiccatiSystem {
    Plus,
    Minus,
}

/// Max-abs Riccati residual and curvature norm at a point: a small Riccati
/// residual must force a small curvature (the tested implication).
pub fn riccati_implies_flat(cj: &ConnectionJet1, which: RiccatiSystem) -> (f64, f64) {
    let res = match which {
        RiccatiSystem::Plus => riccati_residual_plus(cj),
        RiccatiSystem::Minus => riccati_residual_minus(cj),
    };
    let r = curvature::riemann_mixed(cj);
    (res.max_abs(), r.max_abs())
}

/// Residual of the perturbation system for Γ + T around a solution Γ of the
/// first Riccati system: ∂_p T^l_is + Γ^l_pn T^n_is + T^l_pn Γ^n_is + T^l_pn T^n_is.
pub fn riccati_perturbation_residual(base: &ConnectionJet1, pert: &ConnectionJet1) -> Tensor4 {
    let n = base.n();
    let mut out = Tensor4::zeros(n);
    for p in 0..n {
        for l in 0..n {
            for i in 0..n {
                for s in 0..n {
                    let mut v = pert.dgamma.get(p, l, i, s);
                    for m in 0..n {
                        v += base.gamma.get(l, p, m) * pert.gamma.get(m, i, s)
                            + pert.gamma.get(l, p, m) * base.gamma.get(m, i, s)
                            + pert.gamma.get(l, p, m) * pert.gamma.get(m, i, s);
                    }
                    out.set(p, l, i, s, v);
                }
            }
        }
    }
    out
}

/// Numerical complete-integrability proxy: max-abs mixed-partial commutator
/// ∂_q∂_p Γ^l_is − ∂_p∂_q Γ^l_is, with the second derivatives taken by
/// central differences of the analytic first-derivative field.
pub fn integrability_check(
    field: &ConnectionField,
    _which: RiccatiSystem,
    sample: &[Vec<f64>],
    h: f64,
) -> Result<f64> {
    let n = field.n();
    let mut worst = 0.0f64;
    for x in sample {
        // ddg[q][p][l][i][s] = ∂_q (∂_p Γ^l_is)
        let mut second = vec![Tensor4::zeros(n); n];
        for q in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[q] += h;
            xm[q] -= h;
            let jp = field.jet1(&xp)?;
            let jm = field.jet1(&xm)?;
            second[q] = jp.dgamma.sub(&jm.dgamma).scale(1.0 / (2.0 * h));
        }
        for q in 0..n {
            for p in 0..n {
                for l in 0..n {
                    for i in 0..n {
                        for s in 0..n {
                            let comm =
                                second[q].get(p, l, i, s) - second[p].get(q, l, i, s);
                            worst = worst.max(comm.abs());
                        }
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// Membership defect for the generalized cone of constant connections,
/// max |C^s_jk C^l_is|; zero means the constant connection is flat.
pub fn cone_condition(c: &Tensor3) -> f64 {
    let n = c.n();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut v = 0.0;
                    for s in 0..n {
                        v += c.get(s, j, k) * c.get(l, i, s);
                    }
                    worst = worst.max(v.abs());
                }
            }
        }
    }
    worst
}

/// A curvature tensor prescribed at the origin, projected onto the exact
/// symmetry class (pair antisymmetries, pair exchange, first Bianchi).
#[derive(Debug, Clone)]
pub struct CurvaturePrescription {
    pub r0: LoweredCurvature,
}

impl CurvaturePrescription {
    pub fn new(raw: &Tensor4) -> CurvaturePrescription {
        CurvaturePrescription {
            r0: project_curvature_symmetries(raw),
        }
    }

    pub fn n(&self) -> usize {
        self.r0.n()
    }

    /// Ricci contraction of the prescription against the identity metric,
    /// Ric_jl = Σ_i R_ijil.
    pub fn ricci_at_origin(&self) -> SquareMatrix {
        let n = self.n();
        SquareMatrix::from_fn(n, |j, l| (0..n).map(|i| self.r0.get(i, j, i, l)).sum())
    }
}

/// Orthogonal projection of an arbitrary 4-index array onto algebraic
/// curvature tensors: antisymmetrize both pairs, symmetrize the pair
/// exchange, then remove the cyclic (Bianchi) part. Idempotent.
pub fn project_curvature_symmetries(raw: &Tensor4) -> LoweredCurvature {
    let n = raw.n();
    let mut a = Tensor4::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let v = 0.25
                        * (raw.get(i, j, k, l) - raw.get(j, i, k, l) - raw.get(i, j, l, k)
                            + raw.get(j, i, l, k));
                    a.set(i, j, k, l, v);
                }
            }
        }
    }
    let mut b = Tensor4::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    b.set(i, j, k, l, 0.5 * (a.get(i, j, k, l) + a.get(k, l, i, j)));
                }
            }
        }
    }
    let mut out = Tensor4::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let cyc = (b.get(i, j, k, l) + b.get(i, k, l, j) + b.get(i, l, j, k)) / 3.0;
                    out.set(i, j, k, l, b.get(i, j, k, l) - cyc);
                }
            }
        }
    }
    LoweredCurvature(out)
}

/// Quadratic normal-coordinate metric with curvature `p.r0` at the origin:
/// g_jl(x) = δ_jl − (1/6)(R_ijkl + R_ilkj) x^i x^k.
///
/// The box is checked to keep the series positive definite.
pub fn normal_metric_from_curvature(
    p: &CurvaturePrescription,
    chart: &crate::field::ChartBox,
) -> Result<FieldSpec> {
    let n = p.n();
    if chart.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: chart.n(),
        });
    }
    let mut q = Tensor4::zeros(n);
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                for l in 0..n {
                    q.set(
                        i,
                        k,
                        j,
                        l,
                        -(p.r0.get(i, j, k, l) + p.r0.get(i, l, k, j)) / 6.0,
                    );
                }
            }
        }
    }
    let spec = FieldSpec::metric(MetricKind::NormalSeries { quadratic: q }, chart.clone());
    // Compilation verifies positivity on the chart lattice.
    MetricField::from_spec(&spec)?;
    Ok(spec)
}

/// Max deviation of √det g from the second-order geodesic-ball volume
/// expansion 1 − (1/6) Ric_ij(0) x^i x^j over sample points with ‖x‖ ≤ ρ.
///
/// For the quadratic series metric this deviation is O(ρ³) (in fact O(ρ⁴)),
/// so halving ρ must shrink it by well over 6×.
pub fn gray_volume_check(spec: &FieldSpec, rho: f64, samples_per_axis: usize) -> Result<f64> {
    let field = MetricField::from_spec(spec)?;
    let n = field.n();
    let ric0 = {
        match &spec.kind {
            FieldKind::Metric(MetricKind::NormalSeries { .. }) => {
                let jet = field.jet2(&vec![0.0; n])?;
                CurvatureBundle::from_metric_jet(&jet)?.ricci
            }
            _ => {
                return Err(Error::ConfigInvalid(
                    "gray_volume_check expects a normal-coordinate series metric".into(),
                ))
            }
        }
    };
    let mut worst = 0.0f64;
    let steps = samples_per_axis.max(2);
    let mut point = vec![0.0; n];
    let mut stack = vec![0usize; n];
    loop {
        for d in 0..n {
            point[d] = -rho + 2.0 * rho * stack[d] as f64 / (steps - 1) as f64;
        }
        let norm2: f64 = point.iter().map(|v| v * v).sum();
        if norm2 <= rho * rho {
            let g = field.value(&point)?;
            let vol = g.det().sqrt();
            let mut quad = 0.0;
            for i in 0..n {
                for j in 0..n {
                    quad += ric0.get(i, j) * point[i] * point[j];
                }
            }
            worst = worst.max((vol - (1.0 - quad / 6.0)).abs());
        }
        // Advance the lattice counter.
        let mut d = 0;
        loop {
            stack[d] += 1;
            if stack[d] < steps {
                break;
            }
            stack[d] = 0;
            d += 1;
            if d == n {
                return Ok(worst);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{soliton_plus_coefficients, ChartBox, ConnectionKind};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn soliton_1d_plus(shift: f64) -> ConnectionField {
        let chart = ChartBox::new(vec![0.0], vec![1.0], vec![4]).unwrap();
        let mut c = Tensor3::zeros(1);
        c.set(0, 0, 0, -1.0);
        ConnectionField::compile(&ConnectionKind::SolitonFamily { coeff: c, shift }, &chart)
            .unwrap()
    }

    fn soliton_2d_plus(shift: f64) -> ConnectionField {
        let chart = ChartBox::unit(2, 4);
        let coeff = soliton_plus_coefficients(&[0.7, 0.3]).unwrap();
        ConnectionField::compile(&ConnectionKind::SolitonFamily { coeff, shift }, &chart).unwrap()
    }

    #[test]
    fn riccati_plus_solved_by_reciprocal_affine() {
        let f = soliton_1d_plus(2.0);
        let cj = f.jet1(&[0.5]).unwrap();
        assert!(riccati_residual_plus(&cj).max_abs() < 1e-14);
        // The minus system flips the sign of the solution family.
        let chart = ChartBox::new(vec![0.0], vec![1.0], vec![4]).unwrap();
        let mut c = Tensor3::zeros(1);
        c.set(0, 0, 0, 1.0); // Γ = −1/(x+c)
        let fm = ConnectionField::compile(
            &ConnectionKind::SolitonFamily { coeff: c, shift: 2.0 },
            &chart,
        )
        .unwrap();
        let cjm = fm.jet1(&[0.5]).unwrap();
        assert!(riccati_residual_minus(&cjm).max_abs() < 1e-14);
        assert!(riccati_residual_plus(&cjm).max_abs() > 0.1);
    }

    #[test]
    fn riccati_constant_connection_residual_is_quadratic_term() {
        let chart = ChartBox::unit(2, 4);
        let mut c = Tensor3::zeros(2);
        c.set(0, 0, 0, 1.0); // C·C ≠ 0
        let f = ConnectionField::compile(&ConnectionKind::Tabulated(c.clone()), &chart).unwrap();
        let cj = f.jet1(&[0.5, 0.5]).unwrap();
        let res = riccati_residual_plus(&cj);
        // ∂Γ = 0, so the residual is Γ^l_pn Γ^n_is; component (p,l,i,s)=(0,0,0,0) is 1.
        assert!((res.get(0, 0, 0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn riccati_implication_2d_soliton() {
        let f = soliton_2d_plus(4.0);
        let cj = f.jet1(&[0.3, 0.6]).unwrap();
        let (riccati, curv) = riccati_implies_flat(&cj, RiccatiSystem::Plus);
        assert!(riccati < 1e-12, "riccati residual {riccati}");
        assert!(curv < 1e-12, "curvature {curv}");
    }

    #[test]
    fn riccati_random_connection_is_a_control() {
        let chart = ChartBox::unit(2, 4);
        let mut c = Tensor3::zeros(2);
        c.set(0, 0, 0, 0.8);
        c.set(1, 0, 1, 0.5);
        c.set(1, 1, 0, 0.5);
        let f = ConnectionField::compile(&ConnectionKind::Tabulated(c), &chart).unwrap();
        let cj = f.jet1(&[0.5, 0.5]).unwrap();
        let (riccati, _) = riccati_implies_flat(&cj, RiccatiSystem::Plus);
        assert!(riccati > 0.1);
    }

    #[test]
    fn perturbation_residual_for_two_solutions() {
        // T = Γ' − Γ for two shifts of the 1d family solves the perturbation system.
        let f1 = soliton_1d_plus(2.0);
        let f2 = soliton_1d_plus(3.0);
        let x = [0.4];
        let a = f1.jet1(&x).unwrap();
        let b = f2.jet1(&x).unwrap();
        let t = ConnectionJet1 {
            x: x.to_vec(),
            gamma: b.gamma.sub(&a.gamma),
            dgamma: b.dgamma.sub(&a.dgamma),
        };
        let res = riccati_perturbation_residual(&a, &t);
        assert!(res.max_abs() < 1e-14);

        // Constant T with Γ = 0 leaves exactly the quadratic term T·T.
        let n = 1;
        let zero = ConnectionJet1 {
            x: x.to_vec(),
            gamma: Tensor3::zeros(n),
            dgamma: Tensor4::zeros(n),
        };
        let mut tg = Tensor3::zeros(n);
        tg.set(0, 0, 0, 2.0);
        let tjet = ConnectionJet1 {
            x: x.to_vec(),
            gamma: tg,
            dgamma: Tensor4::zeros(n),
        };
        let res = riccati_perturbation_residual(&zero, &tjet);
        assert!((res.get(0, 0, 0, 0) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn integrability_proxy_small_on_solutions() {
        let f1 = soliton_1d_plus(2.0);
        let worst = integrability_check(
            &f1,
            RiccatiSystem::Plus,
            &[vec![0.3], vec![0.5], vec![0.7]],
            1e-4,
        )
        .unwrap();
        assert!(worst < 1e-6, "1d commutator {worst}");

        let f2 = soliton_2d_plus(4.0);
        let worst = integrability_check(
            &f2,
            RiccatiSystem::Plus,
            &[vec![0.3, 0.4], vec![0.6, 0.2]],
            1e-4,
        )
        .unwrap();
        assert!(worst < 1e-6, "2d commutator {worst}");
    }

    #[test]
    fn cone_condition_examples() {
        let zero = Tensor3::zeros(2);
        assert_eq!(cone_condition(&zero), 0.0);

        let mut nilpotent = Tensor3::zeros(2);
        nilpotent.set(0, 1, 1, 1.0);
        assert_eq!(cone_condition(&nilpotent), 0.0);

        let mut bad = Tensor3::zeros(2);
        bad.set(0, 0, 0, 1.0);
        assert_eq!(cone_condition(&bad), 1.0);
    }

    fn random_prescription(n: usize, seed: u64, scale: f64) -> CurvaturePrescription {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut raw = Tensor4::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        raw.set(i, j, k, l, rng.gen_range(-1.0..1.0));
                    }
                }
            }
        }
        let p = CurvaturePrescription::new(&raw);
        let m = p.r0.max_abs();
        if m == 0.0 {
            return p;
        }
        CurvaturePrescription {
            r0: LoweredCurvature(p.r0.0.scale(scale / m)),
        }
    }

    #[test]
    fn symmetry_projection_is_idempotent_and_valid() {
        let p = random_prescription(3, 11, 1.0);
        assert!(p.r0.symmetry_defect() < 1e-14);
        assert!(p.r0.first_bianchi_defect() < 1e-14);
        let again = project_curvature_symmetries(&p.r0.0);
        assert!(again.0.sub(&p.r0.0).max_abs() < 1e-14);
    }

    #[test]
    fn normal_metric_reproduces_prescribed_curvature() {
        for (n, seed) in [(2usize, 3u64), (3, 5)] {
            let p = random_prescription(n, seed, 0.1);
            let chart =
                ChartBox::new(vec![-0.5; n], vec![0.5; n], vec![4; n]).unwrap();
            let spec = normal_metric_from_curvature(&p, &chart).unwrap();
            let field = MetricField::from_spec(&spec).unwrap();
            let jet = field.jet2(&vec![0.0; n]).unwrap();
            // g(0) = δ and ∂g(0) = 0 exactly.
            assert!(jet.g.sub(&SquareMatrix::identity(n)).max_abs() < 1e-15);
            assert!(jet.dg.max_abs() < 1e-15);
            let r = crate::curvature::riemann_lower(&jet).unwrap();
            assert!(
                r.0.sub(&p.r0.0).max_abs() < 5e-4,
                "n={n} defect {}",
                r.0.sub(&p.r0.0).max_abs()
            );
        }
    }

    #[test]
    fn normal_metric_zero_prescription_is_euclidean() {
        let p = CurvaturePrescription::new(&Tensor4::zeros(2));
        let chart = ChartBox::unit(2, 4);
        let spec = normal_metric_from_curvature(&p, &chart).unwrap();
        let field = MetricField::from_spec(&spec).unwrap();
        let g = field.value(&[0.3, 0.9]).unwrap();
        assert!(g.sub(&SquareMatrix::identity(2)).max_abs() < 1e-15);
    }

    #[test]
    fn normal_metric_rejects_oversized_box() {
        let p = random_prescription(2, 1, 30.0);
        let chart = ChartBox::new(vec![-1.0; 2], vec![1.0; 2], vec![6; 2]).unwrap();
        assert!(matches!(
            normal_metric_from_curvature(&p, &chart),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn gray_expansion_scales_cubically() {
        let p = random_prescription(2, 9, 1.0);
        let chart = ChartBox::new(vec![-0.3; 2], vec![0.3; 2], vec![4; 2]).unwrap();
        let spec = normal_metric_from_curvature(&p, &chart).unwrap();
        let big = gray_volume_check(&spec, 0.1, 9).unwrap();
        let small = gray_volume_check(&spec, 0.05, 9).unwrap();
        assert!(big < 2e-3, "gray deviation {big}");
        assert!(big / small >= 8.0, "scaling ratio {}", big / small);

        let zero = CurvaturePrescription::new(&Tensor4::zeros(2));
        let zspec = normal_metric_from_curvature(&zero, &chart).unwrap();
        assert_eq!(gray_volume_check(&zspec, 0.1, 9).unwrap(), 0.0);
    }

    #[test]
    fn classify_flatness_examples() {
        // Constant metric: all four flags true.
        let chart = ChartBox::unit(2, 4);
        let g0 = SquareMatrix::from_fn(2, |i, j| if i == j { 2.0 } else { 0.4 });
        let spec = FieldSpec::metric(MetricKind::EuclideanConstant(g0), chart.clone());
        let sample = vec![vec![0.2, 0.3], vec![0.8, 0.5]];
        let rep = classify_flatness(&spec, &sample, FLAT_TOL_ANALYTIC).unwrap();
        assert!(rep.connection_flat && rep.curvature_flat && rep.ricci_flat && rep.scalar_flat);

        // Unit sphere: all four false, scalar = 2.
        let sphere = FieldSpec::round_sphere(1.0, 2, 6).unwrap();
        let sample = vec![vec![1.0, 0.3], vec![1.4, 0.7]];
        let rep = classify_flatness(&sphere, &sample, FLAT_TOL_ANALYTIC).unwrap();
        assert!(!rep.connection_flat && !rep.curvature_flat && !rep.ricci_flat && !rep.scalar_flat);
        assert!((rep.max_scalar - 2.0).abs() < 1e-9);

        // 1d reciprocal-affine connection: not connection-flat, curvature-flat.
        let chart1 = ChartBox::new(vec![0.0], vec![1.0], vec![4]).unwrap();
        let mut c = Tensor3::zeros(1);
        c.set(0, 0, 0, -1.0);
        let conn = FieldSpec::connection(
            ConnectionKind::SolitonFamily { coeff: c, shift: 2.0 },
            chart1,
        );
        let rep = classify_flatness(&conn, &[vec![0.25], vec![0.75]], FLAT_TOL_ANALYTIC).unwrap();
        assert!(!rep.connection_flat);
        assert!(rep.curvature_flat && rep.ricci_flat && rep.scalar_flat);
    }
}
