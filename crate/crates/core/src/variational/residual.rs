//! Explicit Euler-Lagrange residuals for every functional in the table.
//!
//! Each residual is assembled by the chain rule through the jet variables:
//! the algebraic part differentiates the Lagrangian in the 0-jet slots, the
//! bracket fields ∂𝓛/∂(∂g) and ∂𝓛/∂(∂²g) (or ∂𝓛/∂(∂Γ)) are closed-form
//! contractions, and the outer total derivatives D and D² are central finite
//! differences of those bracket fields. The independent Gateaux oracle in
//! the parent module is the arbiter for every formula here.
//!
//! Inverse-metric residuals for the norm densities are the metric residuals
//! pushed through δg_ab = −g_am δg^mn g_nb; the total-scalar and
//! scalar-square inverse-metric residuals are the algebraic forms
//! (R_mn − ½R g_mn)√g and (2R·R_mn − ½R² g_mn)√g.

use super::{AffineField, DensityKind, FunctionalId, Variable};
use crate::curvature::{self, ricci_harmonic_formula, DEFAULT_HARMONIC_TOL};
use crate::error::{Error, Result};
use crate::field::ConnectionJet1;
use crate::tensor::{raise_all, SquareMatrix, Tensor3, Tensor4};

/// Residual tensor in the shape of the variation variable.
#[derive(Debug, Clone)]
pub enum Residual {
    /// ∂𝓛/∂g_mn (or ∂𝓛/∂g^mn) shaped residual.
    Metric(SquareMatrix),
    /// ∂𝓛/∂Γ^u_vw shaped residual, stored `[u][v][w]`.
    Connection(Tensor3),
}

/// Euler-Lagrange residual of the functional at a point; `h` is the step for
/// the finite-difference total-derivative terms.
pub fn el_residual(
    id: FunctionalId,
    field: &AffineField,
    x: &[f64],
    h: f64,
) -> Result<Residual> {
    id.validate()?;
    match (id.density, id.variable) {
        (DensityKind::ConnNorm, Variable::Gamma) => conn_gamma(field, x).map(Residual::Connection),
        (DensityKind::ConnNorm, Variable::Metric) => {
            conn_metric(field, x, h).map(Residual::Metric)
        }
        (DensityKind::ConnNorm, Variable::InverseMetric) => {
            sandwich(field, x, conn_metric(field, x, h)?).map(Residual::Metric)
        }
        (DensityKind::RiemannNorm, Variable::Gamma) => {
            riemann_gamma(field, x, h).map(Residual::Connection)
        }
        (DensityKind::RiemannNorm, Variable::Metric) => {
            riemann_metric(field, x, h).map(Residual::Metric)
        }
        (DensityKind::RiemannNorm, Variable::InverseMetric) => {
            sandwich(field, x, riemann_metric(field, x, h)?).map(Residual::Metric)
        }
        (DensityKind::RicciNorm, Variable::Gamma) => {
            ricci_gamma(field, x, h).map(Residual::Connection)
        }
        (DensityKind::RicciNorm, Variable::Metric) => {
            check_gauge(field, x)?;
            ricci_metric(field, x, h).map(Residual::Metric)
        }
        (DensityKind::RicciNorm, Variable::InverseMetric) => {
            check_gauge(field, x)?;
            sandwich(field, x, ricci_metric(field, x, h)?).map(Residual::Metric)
        }
        (DensityKind::TotalScalar, Variable::Gamma) => {
            total_scalar_gamma(field, x, h).map(Residual::Connection)
        }
        (DensityKind::TotalScalar, Variable::InverseMetric) => {
            einstein_density(field, x).map(Residual::Metric)
        }
        (DensityKind::ScalarSquare, Variable::InverseMetric) => {
            scalar_square_density(field, x).map(Residual::Metric)
        }
        _ => Err(Error::ConfigInvalid(format!(
            "no Euler-Lagrange residual for {}",
            id.name()
        ))),
    }
}

fn check_gauge(field: &AffineField, x: &[f64]) -> Result<()> {
    let jet = field.metric_jet(x)?;
    let defect = curvature::harmonic_defect(&jet)?;
    if defect > DEFAULT_HARMONIC_TOL {
        return Err(Error::GaugeViolation {
            residual: defect,
            tol: DEFAULT_HARMONIC_TOL,
        });
    }
    Ok(())
}

/// Push a metric residual to the inverse-metric variable:
/// res^u_mn = −g_am res_g^ab g_bn.
fn sandwich(field: &AffineField, x: &[f64], res_g: SquareMatrix) -> Result<SquareMatrix> {
    let g = field.metric_jet(x)?.g;
    Ok(g.matmul(&res_g).matmul(&g).scale(-1.0))
}

/// Point geometry of the metric view: jet, inverse, volume weight and the
/// Levi-Civita connection jet.
struct Geo {
    jet: crate::field::MetricJet2,
    ginv: SquareMatrix,
    sqrt: f64,
    lc: ConnectionJet1,
}

fn geo(field: &AffineField, x: &[f64]) -> Result<Geo> {
    let jet = field.metric_jet(x)?;
    let ginv = jet.g.invert_spd()?;
    let sqrt = jet.g.det().sqrt();
    let lc = curvature::christoffel(&jet)?;
    Ok(Geo {
        jet,
        ginv,
        sqrt,
        lc,
    })
}

/// ∂Γ^a_bc / ∂(∂_h g_mn) for the Levi-Civita connection.
#[inline]
fn dgamma1(ginv: &SquareMatrix, h: usize, m: usize, n: usize, a: usize, b: usize, c: usize) -> f64 {
    let mut v = 0.0;
    if h == c && n == b {
        v += ginv.get(a, m);
    }
    if h == b && n == c {
        v += ginv.get(a, m);
    }
    if m == b && n == c {
        v -= ginv.get(a, h);
    }
    0.5 * v
}

/// Σ_d ∂_d W(d,·,·) by central differences of a Tensor3-valued field.
fn fd_div3<F>(eval: F, x: &[f64], h: f64, n: usize) -> Result<SquareMatrix>
where
    F: Fn(&[f64]) -> Result<Tensor3>,
{
    let mut out = SquareMatrix::zeros(n);
    for d in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[d] += h;
        xm[d] -= h;
        let wp = eval(&xp)?;
        let wm = eval(&xm)?;
        for m in 0..n {
            for nn in 0..n {
                out.add_to(m, nn, (wp.get(d, m, nn) - wm.get(d, m, nn)) / (2.0 * h));
            }
        }
    }
    Ok(out)
}

/// Σ_t ∂_t V(t,·,·,·) by central differences of a Tensor4-valued field.
fn fd_div4<F>(eval: F, x: &[f64], h: f64, n: usize) -> Result<Tensor3>
where
    F: Fn(&[f64]) -> Result<Tensor4>,
{
    let mut out = Tensor3::zeros(n);
    for d in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[d] += h;
        xm[d] -= h;
        let vp = eval(&xp)?;
        let vm = eval(&xm)?;
        for u in 0..n {
            for v in 0..n {
                for w in 0..n {
                    out.add_to(
                        u,
                        v,
                        w,
                        (vp.get(d, u, v, w) - vm.get(d, u, v, w)) / (2.0 * h),
                    );
                }
            }
        }
    }
    Ok(out)
}

/// D and D² of a combined bracket field (W(h,m,n), V(h,a,m,n)), sharing the
/// axis stencil evaluations: returns (Σ_h ∂_h W, Σ_{h,a} ∂_h∂_a V).
fn fd_div3_and_div2<F>(
    eval: F,
    x: &[f64],
    h: f64,
    n: usize,
) -> Result<(SquareMatrix, SquareMatrix)>
where
    F: Fn(&[f64]) -> Result<(Tensor3, Tensor4)>,
{
    let center = eval(x)?;
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    for d in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[d] += h;
        xm[d] -= h;
        plus.push(eval(&xp)?);
        minus.push(eval(&xm)?);
    }
    let mut div_w = SquareMatrix::zeros(n);
    for d in 0..n {
        for m in 0..n {
            for nn in 0..n {
                div_w.add_to(
                    m,
                    nn,
                    (plus[d].0.get(d, m, nn) - minus[d].0.get(d, m, nn)) / (2.0 * h),
                );
            }
        }
    }
    let mut div2_v = SquareMatrix::zeros(n);
    for d in 0..n {
        for m in 0..n {
            for nn in 0..n {
                let second = (plus[d].1.get(d, d, m, nn) - 2.0 * center.1.get(d, d, m, nn)
                    + minus[d].1.get(d, d, m, nn))
                    / (h * h);
                div2_v.add_to(m, nn, second);
            }
        }
    }
    for d in 0..n {
        for e in d + 1..n {
            let mut xpp = x.to_vec();
            let mut xpm = x.to_vec();
            let mut xmp = x.to_vec();
            let mut xmm = x.to_vec();
            xpp[d] += h;
            xpp[e] += h;
            xpm[d] += h;
            xpm[e] -= h;
            xmp[d] -= h;
            xmp[e] += h;
            xmm[d] -= h;
            xmm[e] -= h;
            let vpp = eval(&xpp)?.1;
            let vpm = eval(&xpm)?.1;
            let vmp = eval(&xmp)?.1;
            let vmm = eval(&xmm)?.1;
            for m in 0..n {
                for nn in 0..n {
                    let pair = |t: &Tensor4| t.get(d, e, m, nn) + t.get(e, d, m, nn);
                    let cross =
                        (pair(&vpp) - pair(&vpm) - pair(&vmp) + pair(&vmm)) / (4.0 * h * h);
                    div2_v.add_to(m, nn, cross);
                }
            }
        }
    }
    Ok((div_w, div2_v))
}

fn symmetrize_lower_pair(t: &Tensor3) -> Tensor3 {
    let n = t.n();
    let mut out = Tensor3::zeros(n);
    for u in 0..n {
        for v in 0..n {
            for w in 0..n {
                out.set(u, v, w, 0.5 * (t.get(u, v, w) + t.get(u, w, v)));
            }
        }
    }
    out
}

/// ‖∇‖² in the connection variable: residual 2 g_sp g^mq g^nr Γ^p_qr √det g.
fn conn_gamma(field: &AffineField, x: &[f64]) -> Result<Tensor3> {
    let geo = geo(field, x)?;
    let gamma = field.gamma_jet(x)?.gamma;
    let n = gamma.n();
    let mut out = Tensor3::zeros(n);
    for s in 0..n {
        for m in 0..n {
            for nn in 0..n {
                let mut v = 0.0;
                for p in 0..n {
                    for q in 0..n {
                        for r in 0..n {
                            v += geo.jet.g.get(s, p)
                                * geo.ginv.get(m, q)
                                * geo.ginv.get(nn, r)
                                * gamma.get(p, q, r);
                        }
                    }
                }
                out.set(s, m, nn, 2.0 * v * geo.sqrt);
            }
        }
    }
    Ok(out)
}

/// ‖∇‖² of the Levi-Civita connection in the metric variable.
fn conn_metric(field: &AffineField, x: &[f64], h: f64) -> Result<SquareMatrix> {
    let g = geo(field, x)?;
    let n = g.jet.n();
    let gamma = &g.lc.gamma;
    let l = crate::tensor::connection_norm_sq(&g.jet.g, &g.ginv, gamma)?;
    // A1(i,m,k) = Σ_j g^mj Γ^i_jk (first lower slot raised).
    let mut a1 = Tensor3::zeros(n);
    for i in 0..n {
        for m in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    s += g.ginv.get(m, j) * gamma.get(i, j, k);
                }
                a1.set(i, m, k, s);
            }
        }
    }
    let mut alg = SquareMatrix::zeros(n);
    for m in 0..n {
        for nn in 0..n {
            // t1 = g^jq g^kr Γ^m_jk Γ^n_qr, both lower pairs raised.
            let mut t1 = 0.0;
            for q in 0..n {
                for r in 0..n {
                    let mut raised = 0.0;
                    for j in 0..n {
                        for k in 0..n {
                            raised += g.ginv.get(j, q) * g.ginv.get(k, r) * gamma.get(m, j, k);
                        }
                    }
                    t1 += raised * gamma.get(nn, q, r);
                }
            }
            // t2 = g_ip Γ^i_jk Γ^p_qr (g^mj g^nq g^kr + g^jq g^mk g^nr).
            let mut t2 = 0.0;
            for i in 0..n {
                for p in 0..n {
                    let gip = g.jet.g.get(i, p);
                    if gip == 0.0 {
                        continue;
                    }
                    for k in 0..n {
                        for r in 0..n {
                            t2 += gip * g.ginv.get(k, r) * a1.get(i, m, k) * a1.get(p, nn, r);
                        }
                    }
                    for j in 0..n {
                        for q in 0..n {
                            t2 += gip * g.ginv.get(j, q) * a1.get(i, m, j) * a1.get(p, nn, q);
                            // a1(i,m,j) here plays Σ_k g^mk Γ^i_jk via the
                            // lower-pair symmetry of Γ.
                        }
                    }
                }
            }
            alg.set(
                m,
                nn,
                g.sqrt * (-t1 - t2 + 0.5 * l * g.ginv.get(m, nn)),
            );
        }
    }
    // W^{l,mn} = (2 g^nq g^lr Γ^m_qr − g^mq g^nr Γ^l_qr) √det g.
    let bracket = |y: &[f64]| -> Result<Tensor3> {
        let g = geo(field, y)?;
        let n = g.jet.n();
        let mut w = Tensor3::zeros(n);
        for lidx in 0..n {
            for m in 0..n {
                for nn in 0..n {
                    let mut v = 0.0;
                    for q in 0..n {
                        for r in 0..n {
                            v += 2.0
                                * g.ginv.get(nn, q)
                                * g.ginv.get(lidx, r)
                                * g.lc.gamma.get(m, q, r)
                                - g.ginv.get(m, q)
                                    * g.ginv.get(nn, r)
                                    * g.lc.gamma.get(lidx, q, r);
                        }
                    }
                    w.set(lidx, m, nn, v * g.sqrt);
                }
            }
        }
        Ok(w)
    };
    let div = fd_div3(bracket, x, h, n)?;
    Ok(alg.sub(&div))
}

/// ‖Riem‖² in the connection variable over a background metric.
fn riemann_gamma(field: &AffineField, x: &[f64], h: f64) -> Result<Tensor3> {
    let n = field.n();
    // rm(u,j,v,l) = g_up g^jq g^vr g^ls R^p_qrs.
    let rm_at = |y: &[f64]| -> Result<(f64, Tensor4)> {
        let g = geo(field, y)?;
        let cj = field.gamma_jet(y)?;
        let r = curvature::riemann_mixed(&cj);
        let mut rdown = Tensor4::zeros(n);
        for i in 0..n {
            for q in 0..n {
                for rr in 0..n {
                    for s in 0..n {
                        let mut v = 0.0;
                        for p in 0..n {
                            v += g.jet.g.get(i, p) * r.get(p, q, rr, s);
                        }
                        rdown.set(i, q, rr, s, v);
                    }
                }
            }
        }
        let mut rm = Tensor4::zeros(n);
        for u in 0..n {
            for j in 0..n {
                for v in 0..n {
                    for l in 0..n {
                        let mut acc = 0.0;
                        for q in 0..n {
                            for rr in 0..n {
                                for s in 0..n {
                                    acc += rdown.get(u, q, rr, s)
                                        * g.ginv.get(j, q)
                                        * g.ginv.get(v, rr)
                                        * g.ginv.get(l, s);
                                }
                            }
                        }
                        rm.set(u, j, v, l, acc);
                    }
                }
            }
        }
        Ok((g.sqrt, rm))
    };
    let (sqrt, rm) = rm_at(x)?;
    let gamma = field.gamma_jet(x)?.gamma;
    let mut alg = Tensor3::zeros(n);
    for u in 0..n {
        for v in 0..n {
            for w in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    for l in 0..n {
                        acc += rm.get(u, j, v, l) * gamma.get(w, j, l);
                    }
                }
                for i in 0..n {
                    for k in 0..n {
                        acc += rm.get(i, v, k, w) * gamma.get(i, k, u);
                    }
                }
                alg.set(u, v, w, 4.0 * sqrt * acc);
            }
        }
    }
    let bracket = |y: &[f64]| -> Result<Tensor4> {
        let (sqrt, rm) = rm_at(y)?;
        let mut v4 = Tensor4::zeros(n);
        for t in 0..n {
            for u in 0..n {
                for v in 0..n {
                    for w in 0..n {
                        v4.set(t, u, v, w, 4.0 * sqrt * rm.get(u, v, t, w));
                    }
                }
            }
        }
        Ok(v4)
    };
    let div = fd_div4(bracket, x, h, n)?;
    Ok(symmetrize_lower_pair(&alg.sub(&div)))
}

/// ‖Riem‖² of the metric in the metric variable (second order: D and D² terms).
fn riemann_metric(field: &AffineField, x: &[f64], h: f64) -> Result<SquareMatrix> {
    let n = field.n();
    let g0 = geo(field, x)?;
    let rlow = curvature::riemann_lower(&g0.jet)?;
    let s4 = raise_all(&g0.ginv, &rlow);
    let mut l = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for lx in 0..n {
                    l += s4.get(i, j, k, lx) * rlow.get(i, j, k, lx);
                }
            }
        }
    }
    // Raise only the first slot for the Q-term.
    let mut t1 = Tensor4::zeros(n);
    for m in 0..n {
        for j in 0..n {
            for k in 0..n {
                for lx in 0..n {
                    let mut v = 0.0;
                    for i in 0..n {
                        v += g0.ginv.get(m, i) * rlow.get(i, j, k, lx);
                    }
                    t1.set(m, j, k, lx, v);
                }
            }
        }
    }
    let mut alg = SquareMatrix::zeros(n);
    for m in 0..n {
        for nn in 0..n {
            let mut q = 0.0;
            for j in 0..n {
                for k in 0..n {
                    for lx in 0..n {
                        q += t1.get(m, j, k, lx) * s4.get(nn, j, k, lx);
                    }
                }
            }
            let mut gg = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for lx in 0..n {
                            gg += s4.get(i, j, k, lx)
                                * g0.lc.gamma.get(m, j, k)
                                * g0.lc.gamma.get(nn, i, lx);
                        }
                    }
                }
            }
            alg.set(
                m,
                nn,
                g0.sqrt * (-4.0 * gg - 4.0 * q + 0.5 * l * g0.ginv.get(m, nn)),
            );
        }
    }
    // Bracket fields: W^{h,mn} = ∂𝓛/∂(∂_h g_mn), V^{ha,mn} = ∂𝓛/∂(∂_h∂_a g_mn).
    let bracket = |y: &[f64]| -> Result<(Tensor3, Tensor4)> {
        let g = geo(field, y)?;
        let rlow = curvature::riemann_lower(&g.jet)?;
        let s4 = raise_all(&g.ginv, &rlow);
        // Γ with the upper slot lowered: Γ_{a,il} = g_ab Γ^b_il.
        let mut glow = Tensor3::zeros(n);
        for a in 0..n {
            for i in 0..n {
                for lx in 0..n {
                    let mut v = 0.0;
                    for b in 0..n {
                        v += g.jet.g.get(a, b) * g.lc.gamma.get(b, i, lx);
                    }
                    glow.set(a, i, lx, v);
                }
            }
        }
        let mut w3 = Tensor3::zeros(n);
        for hh in 0..n {
            for m in 0..n {
                for nn in 0..n {
                    let mut acc = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            for k in 0..n {
                                for lx in 0..n {
                                    let sv = s4.get(i, j, k, lx);
                                    if sv == 0.0 {
                                        continue;
                                    }
                                    let mut db = 0.0;
                                    for a in 0..n {
                                        db += dgamma1(&g.ginv, hh, m, nn, a, j, k)
                                            * glow.get(a, i, lx)
                                            + glow.get(a, j, k)
                                                * dgamma1(&g.ginv, hh, m, nn, a, i, lx)
                                            - dgamma1(&g.ginv, hh, m, nn, a, j, lx)
                                                * glow.get(a, i, k)
                                            - glow.get(a, j, lx)
                                                * dgamma1(&g.ginv, hh, m, nn, a, i, k);
                                    }
                                    acc += sv * db;
                                }
                            }
                        }
                    }
                    w3.set(hh, m, nn, 2.0 * g.sqrt * acc);
                }
            }
        }
        let mut v4 = Tensor4::zeros(n);
        for hh in 0..n {
            for a in 0..n {
                for m in 0..n {
                    for nn in 0..n {
                        v4.set(hh, a, m, nn, 4.0 * g.sqrt * s4.get(m, hh, a, nn));
                    }
                }
            }
        }
        Ok((w3, v4))
    };
    let (div_w, div2_v) = fd_div3_and_div2(bracket, x, h, n)?;
    Ok(alg.sub(&div_w).add(&div2_v))
}

/// ‖Ric‖² in the connection variable (equiaffine contraction formula).
fn ricci_gamma(field: &AffineField, x: &[f64], h: f64) -> Result<Tensor3> {
    let n = field.n();
    let ru_at = |y: &[f64]| -> Result<(f64, SquareMatrix, Tensor3)> {
        let g = geo(field, y)?;
        let cj = field.gamma_jet(y)?;
        let ric = curvature::ricci_from_mixed(&curvature::riemann_mixed(&cj));
        let ru = SquareMatrix::from_fn(n, |i, j| {
            let mut v = 0.0;
            for k in 0..n {
                for lx in 0..n {
                    v += g.ginv.get(i, k) * g.ginv.get(j, lx) * ric.get(k, lx);
                }
            }
            v
        });
        Ok((g.sqrt, ru, cj.gamma))
    };
    let (sqrt, ru, gamma) = ru_at(x)?;
    let trace: Vec<f64> = (0..n)
        .map(|u| (0..n).map(|p| gamma.get(p, p, u)).sum())
        .collect();
    let mut alg = Tensor3::zeros(n);
    for u in 0..n {
        for v in 0..n {
            for w in 0..n {
                let mut acc = 0.0;
                if v == u {
                    for i in 0..n {
                        for j in 0..n {
                            acc += ru.get(i, j) * gamma.get(w, i, j);
                        }
                    }
                }
                acc += ru.get(v, w) * trace[u];
                for i in 0..n {
                    acc -= ru.get(i, v) * gamma.get(w, i, u);
                }
                for j in 0..n {
                    acc -= ru.get(v, j) * gamma.get(w, j, u);
                }
                alg.set(u, v, w, 2.0 * sqrt * acc);
            }
        }
    }
    let bracket = |y: &[f64]| -> Result<Tensor4> {
        let (sqrt, ru, _) = ru_at(y)?;
        let mut v4 = Tensor4::zeros(n);
        for t in 0..n {
            for u in 0..n {
                for v in 0..n {
                    for w in 0..n {
                        let mut val = 0.0;
                        if t == u {
                            val += ru.get(v, w);
                        }
                        if w == u {
                            val -= ru.get(v, t);
                        }
                        v4.set(t, u, v, w, 2.0 * sqrt * val);
                    }
                }
            }
        }
        Ok(v4)
    };
    let div = fd_div4(bracket, x, h, n)?;
    Ok(symmetrize_lower_pair(&alg.sub(&div)))
}

/// ‖Ric‖² with the harmonic-chart quasilinear Ricci, in the metric variable.
fn ricci_metric(field: &AffineField, x: &[f64], h: f64) -> Result<SquareMatrix> {
    let n = field.n();
    let g0 = geo(field, x)?;
    let ric = ricci_harmonic_formula(&g0.jet)?;
    let pup = g0.ginv.matmul(&ric).matmul(&g0.ginv);
    let mut l = 0.0;
    for i in 0..n {
        for j in 0..n {
            l += ric.get(i, j) * pup.get(i, j);
        }
    }
    let mmat = pup.matmul(&ric).matmul(&g0.ginv);
    // inner(k,l,i,j) = −½ ∂_k∂_l g_ij + g_ab Γ^a_ik Γ^b_lj.
    let inner = |k: usize, lx: usize, i: usize, j: usize| {
        let mut v = -0.5 * g0.jet.ddg.get(k, lx, i, j);
        for a in 0..n {
            for b in 0..n {
                v += g0.jet.g.get(a, b) * g0.lc.gamma.get(a, i, k) * g0.lc.gamma.get(b, lx, j);
            }
        }
        v
    };
    let mut alg = SquareMatrix::zeros(n);
    for m in 0..n {
        for nn in 0..n {
            let mut dr_sum = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let p = pup.get(i, j);
                    if p == 0.0 {
                        continue;
                    }
                    let mut dr = 0.0;
                    for k in 0..n {
                        for lx in 0..n {
                            dr -= g0.ginv.get(k, m) * g0.ginv.get(nn, lx) * inner(k, lx, i, j);
                            dr -= g0.ginv.get(k, lx)
                                * g0.lc.gamma.get(nn, i, k)
                                * g0.lc.gamma.get(m, lx, j);
                        }
                    }
                    dr_sum += p * dr;
                }
            }
            alg.set(
                m,
                nn,
                g0.sqrt
                    * (-2.0 * mmat.get(m, nn) + 2.0 * dr_sum + 0.5 * l * g0.ginv.get(m, nn)),
            );
        }
    }
    let bracket = |y: &[f64]| -> Result<(Tensor3, Tensor4)> {
        let g = geo(field, y)?;
        let ric = ricci_harmonic_formula(&g.jet)?;
        let pup = g.ginv.matmul(&ric).matmul(&g.ginv);
        let mut glow = Tensor3::zeros(n);
        for a in 0..n {
            for i in 0..n {
                for k in 0..n {
                    let mut v = 0.0;
                    for b in 0..n {
                        v += g.jet.g.get(a, b) * g.lc.gamma.get(b, i, k);
                    }
                    glow.set(a, i, k, v);
                }
            }
        }
        let mut w3 = Tensor3::zeros(n);
        for hh in 0..n {
            for m in 0..n {
                for nn in 0..n {
                    let mut acc = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            let p = pup.get(i, j);
                            if p == 0.0 {
                                continue;
                            }
                            for k in 0..n {
                                for lx in 0..n {
                                    let gkl = g.ginv.get(k, lx);
                                    if gkl == 0.0 {
                                        continue;
                                    }
                                    let mut db = 0.0;
                                    for a in 0..n {
                                        db += dgamma1(&g.ginv, hh, m, nn, a, i, k)
                                            * glow.get(a, lx, j)
                                            + dgamma1(&g.ginv, hh, m, nn, a, lx, j)
                                                * glow.get(a, i, k);
                                    }
                                    acc += p * gkl * db;
                                }
                            }
                        }
                    }
                    w3.set(hh, m, nn, 2.0 * g.sqrt * acc);
                }
            }
        }
        let mut v4 = Tensor4::zeros(n);
        for hh in 0..n {
            for a in 0..n {
                for m in 0..n {
                    for nn in 0..n {
                        v4.set(hh, a, m, nn, -g.sqrt * g.ginv.get(hh, a) * pup.get(m, nn));
                    }
                }
            }
        }
        Ok((w3, v4))
    };
    let (div_w, div2_v) = fd_div3_and_div2(bracket, x, h, n)?;
    Ok(alg.sub(&div_w).add(&div2_v))
}

/// Total scalar curvature in the connection variable.
fn total_scalar_gamma(field: &AffineField, x: &[f64], h: f64) -> Result<Tensor3> {
    let n = field.n();
    let g0 = geo(field, x)?;
    let gamma = field.gamma_jet(x)?.gamma;
    let trace: Vec<f64> = (0..n)
        .map(|u| (0..n).map(|p| gamma.get(p, p, u)).sum())
        .collect();
    let mut alg = Tensor3::zeros(n);
    for u in 0..n {
        for v in 0..n {
            for w in 0..n {
                let mut acc = 0.0;
                if v == u {
                    for i in 0..n {
                        for k in 0..n {
                            acc += g0.ginv.get(i, k) * gamma.get(w, i, k);
                        }
                    }
                }
                acc += g0.ginv.get(v, w) * trace[u];
                for a in 0..n {
                    acc -= 2.0 * g0.ginv.get(v, a) * gamma.get(w, a, u);
                }
                alg.set(u, v, w, g0.sqrt * acc);
            }
        }
    }
    let bracket = |y: &[f64]| -> Result<Tensor4> {
        let g = geo(field, y)?;
        let mut v4 = Tensor4::zeros(n);
        for t in 0..n {
            for u in 0..n {
                for v in 0..n {
                    for w in 0..n {
                        let mut val = 0.0;
                        if t == u {
                            val += g.ginv.get(v, w);
                        }
                        if w == u {
                            val -= g.ginv.get(v, t);
                        }
                        v4.set(t, u, v, w, g.sqrt * val);
                    }
                }
            }
        }
        Ok(v4)
    };
    let div = fd_div4(bracket, x, h, n)?;
    Ok(symmetrize_lower_pair(&alg.sub(&div)))
}

/// Einstein-tensor density (R_mn − ½ R g_mn)·√det g: the inverse-metric
/// variation of the total scalar curvature.
fn einstein_density(field: &AffineField, x: &[f64]) -> Result<SquareMatrix> {
    let g = geo(field, x)?;
    let ric = curvature::ricci_from_mixed(&curvature::riemann_mixed(&g.lc));
    let scalar = curvature::scalar_curvature(&g.ginv, &ric);
    Ok(ric.sub(&g.jet.g.scale(0.5 * scalar)).scale(g.sqrt))
}

/// (2R·R_mn − ½R² g_mn)·√det g: the pointwise inverse-metric derivative of
/// the squared total scalar density, exact where the scalar curvature is
/// constant.
fn scalar_square_density(field: &AffineField, x: &[f64]) -> Result<SquareMatrix> {
    let g = geo(field, x)?;
    let ric = curvature::ricci_from_mixed(&curvature::riemann_mixed(&g.lc));
    let scalar = curvature::scalar_curvature(&g.ginv, &ric);
    Ok(ric
        .scale(2.0 * scalar)
        .sub(&g.jet.g.scale(0.5 * scalar * scalar))
        .scale(g.sqrt))
}
