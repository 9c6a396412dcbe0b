//! Curvature operators: Christoffel symbols, mixed and lowered Riemann
//! tensors, Ricci in three formulations, scalar and Weyl curvature, the
//! covariant derivative of curvature, and the 3-dimensional reconstruction
//! of Riemann from Ricci.
//!
//! Convention sheet (all routes below are mutually consistent and are
//! cross-checked by tests):
//!
//! - Γ^i_jk = ½ g^il (∂_k g_lj + ∂_j g_lk − ∂_l g_jk);
//! - R^l_ijk = ∂_j Γ^l_ik − ∂_k Γ^l_ij + Γ^l_js Γ^s_ik − Γ^l_ks Γ^s_ij;
//! - R_ijkl = g_im R^m_jkl, with the direct second-derivative form
//!   R_ijkl = ½(∂_j∂_k g_il + ∂_i∂_l g_jk − ∂_j∂_l g_ik − ∂_i∂_k g_jl)
//!          + g_mn (Γ^m_jk Γ^n_il − Γ^m_jl Γ^n_ik);
//! - Ric_ik = R^l_ilk (equivalently Ric_jl = g^ik R_ijkl);
//! - scalar = g^ij Ric_ij.
//!
//! With these signs the unit round 2-sphere has R_θφθφ = sin²θ, Ric = g and
//! scalar curvature 2.

use crate::error::{Error, Result};
use crate::field::{ConnectionJet1, MetricJet2};
use crate::tensor::{
    lower_first_index, LoweredCurvature, MixedCurvature, SquareMatrix, Tensor3, Tensor4, Tensor5,
};

/// Default harmonic-gauge tolerance.
pub const DEFAULT_HARMONIC_TOL: f64 = 1e-8;

/// All curvature objects of a metric at one point.
#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    pub mixed: MixedCurvature,
    pub lower: LoweredCurvature,
    pub ricci: SquareMatrix,
    pub scalar: f64,
    /// Absent below dimension 3.
    pub weyl: Option<LoweredCurvature>,
}

impl CurvatureBundle {
    pub fn from_metric_jet(jet: &MetricJet2) -> Result<CurvatureBundle> {
        let cj = christoffel(jet)?;
        let mixed = riemann_mixed(&cj);
        let lower = lower_first_index(&jet.g, &mixed);
        let ricci = ricci_from_mixed(&mixed);
        let g_inv = jet.g.invert_spd()?;
        let scalar = scalar_curvature(&g_inv, &ricci);
        let weyl = if jet.n() >= 3 {
            Some(weyl_from_parts(&jet.g, &lower, &ricci, scalar))
        } else {
            None
        };
        Ok(CurvatureBundle {
            mixed,
            lower,
            ricci,
            scalar,
            weyl,
        })
    }
}

/// Christoffel symbols of the second kind, with their first partials.
///
/// dΓ is assembled analytically via ∂(g⁻¹) = −g⁻¹(∂g)g⁻¹, so the connection
/// jet carries the accuracy of the metric jet itself.
pub fn christoffel(jet: &MetricJet2) -> Result<ConnectionJet1> {
    let n = jet.n();
    let g_inv = jet.g.invert_spd()?;
    // A_{l,jk} = ∂_k g_lj + ∂_j g_lk − ∂_l g_jk (twice the first kind).
    let a = |l: usize, j: usize, k: usize| {
        jet.dg.get(k, l, j) + jet.dg.get(j, l, k) - jet.dg.get(l, j, k)
    };
    let mut gamma = Tensor3::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += g_inv.get(i, l) * a(l, j, k);
                }
                gamma.set(i, j, k, 0.5 * s);
            }
        }
    }
    // ∂_p g^il = −g^ia (∂_p g_ab) g^bl
    let mut dginv = Tensor3::zeros(n); // [p][i][l]
    for p in 0..n {
        for i in 0..n {
            for l in 0..n {
                let mut s = 0.0;
                for aa in 0..n {
                    for b in 0..n {
                        s -= g_inv.get(i, aa) * jet.dg.get(p, aa, b) * g_inv.get(b, l);
                    }
                }
                dginv.set(p, i, l, s);
            }
        }
    }
    let da = |p: usize, l: usize, j: usize, k: usize| {
        jet.ddg.get(p, k, l, j) + jet.ddg.get(p, j, l, k) - jet.ddg.get(p, l, j, k)
    };
    let mut dgamma = Tensor4::zeros(n);
    for p in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += dginv.get(p, i, l) * a(l, j, k) + g_inv.get(i, l) * da(p, l, j, k);
                    }
                    dgamma.set(p, i, j, k, 0.5 * s);
                }
            }
        }
    }
    Ok(ConnectionJet1 {
        x: jet.x.clone(),
        gamma,
        dgamma,
    })
}

/// Mixed curvature of a symmetric connection,
/// R^l_ijk = ∂_j Γ^l_ik − ∂_k Γ^l_ij + Γ^l_js Γ^s_ik − Γ^l_ks Γ^s_ij.
pub fn riemann_mixed(cj: &ConnectionJet1) -> MixedCurvature {
    let n = cj.n();
    let mut r = MixedCurvature::zeros(n);
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = cj.dgamma.get(j, l, i, k) - cj.dgamma.get(k, l, i, j);
                    for s in 0..n {
                        v += cj.gamma.get(l, j, s) * cj.gamma.get(s, i, k)
                            - cj.gamma.get(l, k, s) * cj.gamma.get(s, i, j);
                    }
                    r.set(l, i, j, k, v);
                }
            }
        }
    }
    r
}

/// Lowered curvature straight from the metric jet (see the module convention
/// sheet); cross-checked against lowering the mixed tensor.
pub fn riemann_lower(jet: &MetricJet2) -> Result<LoweredCurvature> {
    let n = jet.n();
    let cj = christoffel(jet)?;
    let mut r = LoweredCurvature::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let second = 0.5
                        * (jet.ddg.get(j, k, i, l) + jet.ddg.get(i, l, j, k)
                            - jet.ddg.get(j, l, i, k)
                            - jet.ddg.get(i, k, j, l));
                    let mut quad = 0.0;
                    for m in 0..n {
                        for nn in 0..n {
                            quad += jet.g.get(m, nn)
                                * (cj.gamma.get(m, j, k) * cj.gamma.get(nn, i, l)
                                    - cj.gamma.get(m, j, l) * cj.gamma.get(nn, i, k));
                        }
                    }
                    r.set(i, j, k, l, second + quad);
                }
            }
        }
    }
    Ok(r)
}

/// Ricci tensor by contraction of the first and third indices, R_ik = R^l_ilk.
pub fn ricci_from_mixed(r: &MixedCurvature) -> SquareMatrix {
    let n = r.n();
    SquareMatrix::from_fn(n, |i, k| (0..n).map(|l| r.get(l, i, l, k)).sum())
}

/// Ricci tensor through the log-det volume derivative,
/// R_ik = ∂_l Γ^l_ik − Γ^m_il Γ^l_km − ∇_k ∂_i ln √det g.
pub fn ricci_logdet(jet: &MetricJet2) -> Result<SquareMatrix> {
    let n = jet.n();
    let g_inv = jet.g.invert_spd()?;
    let cj = christoffel(jet)?;
    // ω_i = ∂_i ln √det g = ½ g^ab ∂_i g_ab
    let mut omega = vec![0.0; n];
    for i in 0..n {
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += g_inv.get(a, b) * jet.dg.get(i, a, b);
            }
        }
        omega[i] = 0.5 * s;
    }
    // ∂_k ω_i = ½ [ (∂_k g^ab) ∂_i g_ab + g^ab ∂_k ∂_i g_ab ]
    let mut domega = SquareMatrix::zeros(n);
    for k in 0..n {
        for i in 0..n {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let mut dginv = 0.0;
                    for p in 0..n {
                        for q in 0..n {
                            dginv -= g_inv.get(a, p) * jet.dg.get(k, p, q) * g_inv.get(q, b);
                        }
                    }
                    s += dginv * jet.dg.get(i, a, b) + g_inv.get(a, b) * jet.ddg.get(k, i, a, b);
                }
            }
            domega.set(k, i, 0.5 * s);
        }
    }
    let mut ric = SquareMatrix::zeros(n);
    for i in 0..n {
        for k in 0..n {
            let mut v = 0.0;
            for l in 0..n {
                v += cj.dgamma.get(l, l, i, k);
                for m in 0..n {
                    v -= cj.gamma.get(m, i, l) * cj.gamma.get(l, k, m);
                }
            }
            v -= domega.get(k, i);
            for m in 0..n {
                v += cj.gamma.get(m, k, i) * omega[m];
            }
            ric.set(i, k, v);
        }
    }
    Ok(ric)
}

/// Harmonic-gauge defect max_k |g^ij Γ^k_ij| at the point.
pub fn harmonic_defect(jet: &MetricJet2) -> Result<f64> {
    let n = jet.n();
    let g_inv = jet.g.invert_spd()?;
    let cj = christoffel(jet)?;
    let mut worst = 0.0f64;
    for k in 0..n {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += g_inv.get(i, j) * cj.gamma.get(k, i, j);
            }
        }
        worst = worst.max(s.abs());
    }
    Ok(worst)
}

/// Whether the chart is harmonic at the point: Δx^k = −g^ij Γ^k_ij = 0.
pub fn is_harmonic(jet: &MetricJet2, tol: f64) -> Result<bool> {
    Ok(harmonic_defect(jet)? <= tol)
}

/// Ricci tensor in the simplified harmonic-chart form,
/// R_ij = g^kl (−½ ∂_k∂_l g_ij + g_mn Γ^m_ik Γ^n_lj).
///
/// Valid only where the harmonic gauge holds; refuses off-gauge points.
pub fn ricci_harmonic(jet: &MetricJet2, tol: f64) -> Result<SquareMatrix> {
    let defect = harmonic_defect(jet)?;
    if defect > tol {
        return Err(Error::GaugeViolation {
            residual: defect,
            tol,
        });
    }
    Ok(ricci_harmonic_formula(jet)?)
}

/// The quasilinear harmonic-chart Ricci expression evaluated as written,
/// with no gauge check (used as an integrand by the variational module).
pub fn ricci_harmonic_formula(jet: &MetricJet2) -> Result<SquareMatrix> {
    let n = jet.n();
    let g_inv = jet.g.invert_spd()?;
    let cj = christoffel(jet)?;
    let mut ric = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut v = 0.0;
            for k in 0..n {
                for l in 0..n {
                    let mut quad = 0.0;
                    for m in 0..n {
                        for nn in 0..n {
                            quad += jet.g.get(m, nn)
                                * cj.gamma.get(m, i, k)
                                * cj.gamma.get(nn, l, j);
                        }
                    }
                    v += g_inv.get(k, l) * (-0.5 * jet.ddg.get(k, l, i, j) + quad);
                }
            }
            ric.set(i, j, v);
        }
    }
    Ok(ric)
}

/// Scalar curvature 𝓡 = g^ij R_ij.
pub fn scalar_curvature(g_inv: &SquareMatrix, ric: &SquareMatrix) -> f64 {
    let n = g_inv.n();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += g_inv.get(i, j) * ric.get(i, j);
        }
    }
    s
}

/// Weyl tensor C_iklm for n ≥ 3; identically zero in dimension 3 and fully
/// traceless in general.
pub fn weyl(jet: &MetricJet2) -> Result<LoweredCurvature> {
    let n = jet.n();
    if n < 3 {
        return Err(Error::DimensionTooSmall { n, min: 3 });
    }
    let bundle = CurvatureBundle::from_metric_jet(jet)?;
    Ok(weyl_from_parts(
        &jet.g,
        &bundle.lower,
        &bundle.ricci,
        bundle.scalar,
    ))
}

fn weyl_from_parts(
    g: &SquareMatrix,
    lower: &LoweredCurvature,
    ric: &SquareMatrix,
    scalar: f64,
) -> LoweredCurvature {
    let n = g.n();
    let nf = n as f64;
    let mut c = LoweredCurvature::zeros(n);
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                for m in 0..n {
                    let ricci_block = (ric.get(i, m) * g.get(k, l) - ric.get(i, l) * g.get(k, m)
                        + ric.get(k, l) * g.get(i, m)
                        - ric.get(k, m) * g.get(i, l))
                        / (nf - 2.0);
                    let scalar_block = scalar * (g.get(i, l) * g.get(k, m) - g.get(i, m) * g.get(k, l))
                        / ((nf - 1.0) * (nf - 2.0));
                    c.set(i, k, l, m, lower.get(i, k, l, m) + ricci_block + scalar_block);
                }
            }
        }
    }
    c
}

/// Max-abs trace g^il C_iklm of a Weyl candidate (zero for the true Weyl tensor).
pub fn weyl_trace_defect(g_inv: &SquareMatrix, c: &LoweredCurvature) -> f64 {
    let n = g_inv.n();
    let mut worst = 0.0f64;
    for k in 0..n {
        for m in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                for l in 0..n {
                    s += g_inv.get(i, l) * c.get(i, k, l, m);
                }
            }
            worst = worst.max(s.abs());
        }
    }
    worst
}

/// Covariant derivative of the mixed curvature,
/// ∇_m R^l_ijk = ∂_m R^l_ijk + Γ^l_ms R^s_ijk − Γ^s_mi R^l_sjk − Γ^s_mj R^l_isk − Γ^s_mk R^l_ijs.
///
/// `dr.get(m, l, i, j, k)` supplies the partials ∂_m R^l_ijk, normally from
/// finite-differencing the curvature field.
pub fn covariant_derivative_curvature(
    cj: &ConnectionJet1,
    r: &MixedCurvature,
    dr: &Tensor5,
) -> Tensor5 {
    let n = cj.n();
    let mut out = Tensor5::zeros(n);
    for m in 0..n {
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut v = dr.get(m, l, i, j, k);
                        for s in 0..n {
                            v += cj.gamma.get(l, m, s) * r.get(s, i, j, k)
                                - cj.gamma.get(s, m, i) * r.get(l, s, j, k)
                                - cj.gamma.get(s, m, j) * r.get(l, i, s, k)
                                - cj.gamma.get(s, m, k) * r.get(l, i, j, s);
                        }
                        out.set(m, l, i, j, k, v);
                    }
                }
            }
        }
    }
    out
}

/// ∂_m R^l_ijk of a curvature field by central differences of the mixed
/// curvature computed from connection jets at x ± h e_m.
pub fn curvature_fd_derivative<F>(jet_at: F, x: &[f64], h: f64) -> Result<Tensor5>
where
    F: Fn(&[f64]) -> Result<ConnectionJet1>,
{
    let n = x.len();
    let mut dr = Tensor5::zeros(n);
    for m in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[m] += h;
        xm[m] -= h;
        let rp = riemann_mixed(&jet_at(&xp)?);
        let rm = riemann_mixed(&jet_at(&xm)?);
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        dr.set(
                            m,
                            l,
                            i,
                            j,
                            k,
                            (rp.get(l, i, j, k) - rm.get(l, i, j, k)) / (2.0 * h),
                        );
                    }
                }
            }
        }
    }
    Ok(dr)
}

/// Defect of the second Bianchi identity
/// ∇_m R^l_ijk + ∇_j R^l_ikm + ∇_k R^l_imj = 0.
pub fn second_bianchi_defect(nabla_r: &Tensor5) -> f64 {
    let n = nabla_r.n();
    let mut worst = 0.0f64;
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for m in 0..n {
                        let cyc = nabla_r.get(m, l, i, j, k)
                            + nabla_r.get(j, l, i, k, m)
                            + nabla_r.get(k, l, i, m, j);
                        worst = worst.max(cyc.abs());
                    }
                }
            }
        }
    }
    worst
}

/// Defect of the Veblen identity
/// ∇_m R^l_ijk + ∇_j R^l_kim + ∇_i R^l_mkj + ∇_k R^l_jmi = 0.
pub fn veblen_defect(nabla_r: &Tensor5) -> f64 {
    let n = nabla_r.n();
    let mut worst = 0.0f64;
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for m in 0..n {
                        let sum = nabla_r.get(m, l, i, j, k)
                            + nabla_r.get(j, l, k, i, m)
                            + nabla_r.get(i, l, m, k, j)
                            + nabla_r.get(k, l, j, m, i);
                        worst = worst.max(sum.abs());
                    }
                }
            }
        }
    }
    worst
}

/// Three-dimensional reconstruction of the full Riemann tensor from Ricci,
/// R_ijkl = R_ik g_jl − R_il g_jk + g_ik R_jl − g_il R_jk − (R/2)(g_ik g_jl − g_il g_jk).
pub fn reconstruct_riemann_3d(
    g: &SquareMatrix,
    ric: &SquareMatrix,
    scalar: f64,
) -> Result<LoweredCurvature> {
    let n = g.n();
    if n != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: n });
    }
    let mut r = LoweredCurvature::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let v = ric.get(i, k) * g.get(j, l) - ric.get(i, l) * g.get(j, k)
                        + g.get(i, k) * ric.get(j, l)
                        - g.get(i, l) * ric.get(j, k)
                        - 0.5 * scalar * (g.get(i, k) * g.get(j, l) - g.get(i, l) * g.get(j, k));
                    r.set(i, j, k, l, v);
                }
            }
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{
        random_spd_metric, ChartBox, ConnectionField, ConnectionKind, FieldSpec, MetricField,
        MetricKind,
    };
    use crate::scalar::ScalarExpr;
    use crate::tensor::{riemann_norm_sq_lower, Tensor3};

    fn sphere_field(radius: f64) -> MetricField {
        MetricField::from_spec(&FieldSpec::round_sphere(radius, 2, 8).unwrap()).unwrap()
    }

    #[test]
    fn constant_metric_has_zero_christoffel() {
        let chart = ChartBox::unit(3, 4);
        let g0 = SquareMatrix::from_fn(3, |i, j| if i == j { 1.5 } else { 0.2 });
        let f = MetricField::compile(&MetricKind::EuclideanConstant(g0), &chart).unwrap();
        let cj = christoffel(&f.jet2(&[0.25, 0.5, 0.75]).unwrap()).unwrap();
        assert_eq!(cj.gamma.max_abs(), 0.0);
        assert_eq!(cj.dgamma.max_abs(), 0.0);
    }

    #[test]
    fn sphere_christoffel_closed_form() {
        let f = sphere_field(1.0);
        let theta: f64 = 1.1;
        let cj = christoffel(&f.jet2(&[theta, 0.4]).unwrap()).unwrap();
        let cot = theta.cos() / theta.sin();
        assert!((cj.gamma.get(0, 1, 1) + theta.sin() * theta.cos()).abs() < 1e-12);
        assert!((cj.gamma.get(1, 0, 1) - cot).abs() < 1e-12);
        assert!((cj.gamma.get(1, 1, 0) - cot).abs() < 1e-12);
        assert!(cj.gamma.get(0, 0, 0).abs() < 1e-12);
        assert!(cj.gamma.get(1, 1, 1).abs() < 1e-12);
        assert!(cj.gamma.get(0, 0, 1).abs() < 1e-12);
    }

    #[test]
    fn conformal_christoffel_closed_form() {
        // g = e^{2φ}δ gives Γ^k_ij = δ^k_i φ_j + δ^k_j φ_i − δ_ij φ_k.
        let chart = ChartBox::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![6, 6]).unwrap();
        let phi = ScalarExpr::affine(&[0.3, -0.2], 0.1);
        let profile = ScalarExpr::Exp(Box::new(ScalarExpr::Mul(vec![
            ScalarExpr::Const(2.0),
            phi.clone(),
        ])));
        let f = MetricField::compile(
            &MetricKind::Conformal {
                base: SquareMatrix::identity(2),
                profile,
            },
            &chart,
        )
        .unwrap();
        let x = [0.2, 0.5];
        let cj = christoffel(&f.jet2(&x).unwrap()).unwrap();
        let grad = phi.jet2(&x).grad;
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let expect = (if k == i { grad[j] } else { 0.0 })
                        + (if k == j { grad[i] } else { 0.0 })
                        - (if i == j { grad[k] } else { 0.0 });
                    assert!(
                        (cj.gamma.get(k, i, j) - expect).abs() < 1e-12,
                        "Γ^{k}_{i}{j}"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_connection_zero_curvature() {
        let chart = ChartBox::unit(2, 4);
        let f =
            ConnectionField::compile(&ConnectionKind::Tabulated(Tensor3::zeros(2)), &chart).unwrap();
        let r = riemann_mixed(&f.jet1(&[0.5, 0.5]).unwrap());
        assert_eq!(r.max_abs(), 0.0);
    }

    #[test]
    fn cone_condition_constant_connection_is_flat() {
        // C¹₂₂ = 1 satisfies C^s_jk C^l_is = 0, so the constant connection is flat.
        let chart = ChartBox::unit(2, 4);
        let mut c = Tensor3::zeros(2);
        c.set(0, 1, 1, 1.0);
        let f = ConnectionField::compile(&ConnectionKind::Tabulated(c), &chart).unwrap();
        let r = riemann_mixed(&f.jet1(&[0.3, 0.7]).unwrap());
        assert!(r.max_abs() < 1e-15);
    }

    #[test]
    fn sphere_lowered_curvature() {
        let f = sphere_field(1.0);
        let theta: f64 = 0.9;
        let jet = f.jet2(&[theta, 0.1]).unwrap();
        let r = riemann_lower(&jet).unwrap();
        let expect = theta.sin().powi(2);
        assert!((r.get(0, 1, 0, 1) - expect).abs() < 1e-10);
        // Two-route consistency against lowering the mixed tensor.
        let mixed = riemann_mixed(&christoffel(&jet).unwrap());
        let lowered = lower_first_index(&jet.g, &mixed);
        assert!(r.0.sub(&lowered.0).max_abs() < 1e-10);
    }

    #[test]
    fn two_route_consistency_random_metric() {
        let chart = ChartBox::unit(3, 4);
        let f = MetricField::from_spec(&random_spd_metric(5, 2, &chart)).unwrap();
        let jet = f.jet2(&[0.3, 0.6, 0.2]).unwrap();
        let direct = riemann_lower(&jet).unwrap();
        let mixed = riemann_mixed(&christoffel(&jet).unwrap());
        let lowered = lower_first_index(&jet.g, &mixed);
        let scale = direct.max_abs().max(1e-30);
        assert!(direct.0.sub(&lowered.0).max_abs() / scale < 1e-8);
    }

    #[test]
    fn sphere_ricci_and_scalar() {
        for radius in [0.5, 1.0, 2.0] {
            let f = sphere_field(radius);
            let jet = f.jet2(&[1.2, 0.3]).unwrap();
            let bundle = CurvatureBundle::from_metric_jet(&jet).unwrap();
            // Ric = g/r², scalar = 2/r².
            let expect = jet.g.scale(1.0 / (radius * radius));
            assert!(bundle.ricci.sub(&expect).max_abs() < 1e-10);
            assert!((bundle.scalar - 2.0 / (radius * radius)).abs() < 1e-10);
        }
    }

    #[test]
    fn scalar_scaling_law() {
        // Scaling g by a constant c divides the scalar curvature by c.
        let f = sphere_field(1.0);
        let jet = f.jet2(&[1.0, 0.2]).unwrap();
        let bundle = CurvatureBundle::from_metric_jet(&jet).unwrap();
        let f2 = sphere_field(2.0); // r=2 is exactly c=4 times the unit metric
        let jet2 = f2.jet2(&[1.0, 0.2]).unwrap();
        let bundle2 = CurvatureBundle::from_metric_jet(&jet2).unwrap();
        assert!((bundle2.scalar - bundle.scalar / 4.0).abs() < 1e-10);
    }

    #[test]
    fn ricci_logdet_matches_contraction() {
        let chart = ChartBox::unit(3, 4);
        let f = MetricField::from_spec(&random_spd_metric(9, 2, &chart)).unwrap();
        let jet = f.jet2(&[0.7, 0.2, 0.5]).unwrap();
        let by_contraction = ricci_from_mixed(&riemann_mixed(&christoffel(&jet).unwrap()));
        let by_logdet = ricci_logdet(&jet).unwrap();
        assert!(by_contraction.sub(&by_logdet).max_abs() < 1e-8);
        assert!(by_contraction.asymmetry() < 1e-10);
    }

    #[test]
    fn harmonic_gauge_detection() {
        // Constant metrics are trivially harmonic.
        let chart = ChartBox::unit(2, 4);
        let f =
            MetricField::compile(&MetricKind::EuclideanConstant(SquareMatrix::identity(2)), &chart)
                .unwrap();
        assert!(is_harmonic(&f.jet2(&[0.5, 0.5]).unwrap(), 1e-12).unwrap());

        // 2d conformal charts are harmonic, 3d conformal charts are not.
        for n in [2usize, 3usize] {
            let chart = ChartBox::new(vec![-1.0; n], vec![1.0; n], vec![4; n]).unwrap();
            let phi = ScalarExpr::affine(&vec![0.3; n], 0.0);
            let profile = ScalarExpr::Exp(Box::new(ScalarExpr::Mul(vec![
                ScalarExpr::Const(2.0),
                phi,
            ])));
            let f = MetricField::compile(
                &MetricKind::Conformal {
                    base: SquareMatrix::identity(n),
                    profile,
                },
                &chart,
            )
            .unwrap();
            let jet = f.jet2(&vec![0.2; n]).unwrap();
            let harmonic = is_harmonic(&jet, 1e-10).unwrap();
            assert_eq!(harmonic, n == 2, "dimension {n}");
        }
    }

    #[test]
    fn ricci_harmonic_matches_on_gauge_and_rejects_off_gauge() {
        let chart = ChartBox::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![6, 6]).unwrap();
        let phi = ScalarExpr::Add(vec![
            ScalarExpr::affine(&[0.4, -0.3], 0.0),
            ScalarExpr::Mul(vec![
                ScalarExpr::Const(0.2),
                ScalarExpr::Var(0),
                ScalarExpr::Var(1),
            ]),
        ]);
        let profile = ScalarExpr::Exp(Box::new(ScalarExpr::Mul(vec![ScalarExpr::Const(2.0), phi])));
        let f = MetricField::compile(
            &MetricKind::Conformal {
                base: SquareMatrix::identity(2),
                profile,
            },
            &chart,
        )
        .unwrap();
        let jet = f.jet2(&[0.25, -0.4]).unwrap();
        let harmonic = ricci_harmonic(&jet, DEFAULT_HARMONIC_TOL).unwrap();
        let contraction = ricci_from_mixed(&riemann_mixed(&christoffel(&jet).unwrap()));
        assert!(harmonic.sub(&contraction).max_abs() < 1e-7);

        // The polar sphere chart violates the gauge: g^ij Γ^θ_ij = −cot θ.
        let s = sphere_field(1.0);
        let sjet = s.jet2(&[1.0, 0.5]).unwrap();
        assert!(matches!(
            ricci_harmonic(&sjet, DEFAULT_HARMONIC_TOL),
            Err(Error::GaugeViolation { .. })
        ));
    }

    #[test]
    fn weyl_vanishes_in_3d_and_for_conformal_4d() {
        let chart3 = ChartBox::unit(3, 4);
        let f3 = MetricField::from_spec(&random_spd_metric(21, 2, &chart3)).unwrap();
        let jet3 = f3.jet2(&[0.3, 0.4, 0.8]).unwrap();
        let c3 = weyl(&jet3).unwrap();
        assert!(c3.max_abs() < 1e-8 * jet3.ddg.max_abs().max(1.0));

        let chart4 = ChartBox::new(vec![-0.5; 4], vec![0.5; 4], vec![3; 4]).unwrap();
        let phi = ScalarExpr::Add(vec![
            ScalarExpr::affine(&[0.3, -0.2, 0.1, 0.25], 0.0),
            ScalarExpr::Mul(vec![
                ScalarExpr::Const(0.15),
                ScalarExpr::Var(0),
                ScalarExpr::Var(2),
            ]),
        ]);
        let profile = ScalarExpr::Exp(Box::new(ScalarExpr::Mul(vec![ScalarExpr::Const(2.0), phi])));
        let f4 = MetricField::compile(
            &MetricKind::Conformal {
                base: SquareMatrix::identity(4),
                profile,
            },
            &chart4,
        )
        .unwrap();
        let jet4 = f4.jet2(&[0.1, -0.2, 0.05, 0.3]).unwrap();
        let c4 = weyl(&jet4).unwrap();
        assert!(c4.max_abs() < 1e-7, "conformally flat Weyl = {}", c4.max_abs());

        // Tracelessness for a generic 4d metric.
        let f4r = MetricField::from_spec(&random_spd_metric(3, 1, &chart4)).unwrap();
        let jet4r = f4r.jet2(&[0.1, 0.0, -0.1, 0.2]).unwrap();
        let c4r = weyl(&jet4r).unwrap();
        let g_inv = jet4r.g.invert_spd().unwrap();
        assert!(weyl_trace_defect(&g_inv, &c4r) < 1e-8 * c4r.max_abs().max(1.0));

        let chart2 = ChartBox::unit(2, 4);
        let f2 = MetricField::from_spec(&random_spd_metric(4, 1, &chart2)).unwrap();
        assert!(matches!(
            weyl(&f2.jet2(&[0.5, 0.5]).unwrap()),
            Err(Error::DimensionTooSmall { .. })
        ));
    }

    #[test]
    fn bianchi_and_veblen_on_sphere() {
        let f = sphere_field(1.0);
        let jet_at = |x: &[f64]| christoffel(&f.jet2(x).unwrap());
        let x = [1.2, 0.4];
        let cj = jet_at(&x).unwrap();
        let r = riemann_mixed(&cj);
        let dr = curvature_fd_derivative(jet_at, &x, 1e-4).unwrap();
        let nabla = covariant_derivative_curvature(&cj, &r, &dr);
        assert!(second_bianchi_defect(&nabla) < 1e-6);
        assert!(veblen_defect(&nabla) < 1e-6);
    }

    #[test]
    fn reconstruction_3d() {
        // Ricci flatness implies Riemann flatness when the identity holds with Ric = 0.
        let g = SquareMatrix::identity(3);
        let zero = SquareMatrix::zeros(3);
        let r = reconstruct_riemann_3d(&g, &zero, 0.0).unwrap();
        assert_eq!(r.max_abs(), 0.0);

        // Identity check on random 3d metrics.
        let chart = ChartBox::unit(3, 4);
        for seed in 0..5 {
            let f = MetricField::from_spec(&random_spd_metric(seed + 40, 2, &chart)).unwrap();
            let jet = f.jet2(&[0.4, 0.3, 0.6]).unwrap();
            let bundle = CurvatureBundle::from_metric_jet(&jet).unwrap();
            let rec = reconstruct_riemann_3d(&jet.g, &bundle.ricci, bundle.scalar).unwrap();
            let scale = bundle.lower.max_abs().max(1e-30);
            assert!(
                rec.0.sub(&bundle.lower.0).max_abs() / scale < 1e-7,
                "seed {seed}"
            );
        }

        assert!(matches!(
            reconstruct_riemann_3d(&SquareMatrix::identity(2), &SquareMatrix::zeros(2), 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn riemann_norm_on_unit_sphere_is_four() {
        let f = sphere_field(1.0);
        let jet = f.jet2(&[std::f64::consts::FRAC_PI_2, 0.5]).unwrap();
        let r = riemann_lower(&jet).unwrap();
        let g_inv = jet.g.invert_spd().unwrap();
        let norm = riemann_norm_sq_lower(&g_inv, &r).unwrap();
        assert!((norm - 4.0).abs() < 1e-6);
    }
}
