//! Least-squares Lagrangian densities, discretized flatness-deviation
//! functionals with the Riemannian volume form, explicit Euler-Lagrange
//! residuals, an independent Gateaux-derivative oracle, and a
//! gradient-descent deviation minimizer.
//!
//! Residual conventions: `el_residual` returns the density whose pairing
//! ∫⟨residual, bump⟩ dx (plain coordinate measure, √det g inside the
//! residual) reproduces the first variation of the functional in the
//! declared variable. Metric- and connection-variable residuals carry their
//! total-derivative terms, evaluated by central finite differences of the
//! bracket fields; inverse-metric residuals are the metric residuals pushed
//! through δg_ab = −g_am δg^mn g_nb.

mod residual;

pub use residual::{el_residual, Residual};

use crate::curvature::{self, ricci_harmonic_formula};
use crate::error::{Error, Result};
use crate::field::{ChartBox, ConnectionField, ConnectionJet1, FieldSpec, MetricField, MetricJet2};
use crate::scalar::{ScalarExpr, ScalarJet2};
use crate::tensor::{
    connection_norm_sq, ricci_norm_sq, riemann_norm_sq_lower, riemann_norm_sq_mixed, SquareMatrix,
    Tensor3, Tensor4,
};
use rayon::prelude::*;

/// Lagrangian density family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityKind {
    /// ‖∇‖², squared norm of the connection.
    ConnNorm,
    /// ‖Riem‖².
    RiemannNorm,
    /// ‖Ric‖².
    RicciNorm,
    /// (g^ij R_ij)².
    ScalarSquare,
    /// g^ij R_ij, the total scalar curvature density.
    TotalScalar,
}

/// Variable the Euler-Lagrange equations are taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    Gamma,
    Metric,
    InverseMetric,
}

/// Coordinate gauge a functional is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    None,
    Harmonic,
}

/// A flatness-deviation functional: density, variation variable, gauge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FunctionalId {
    pub density: DensityKind,
    pub variable: Variable,
    pub gauge: Gauge,
}

impl FunctionalId {
    pub fn new(density: DensityKind, variable: Variable, gauge: Gauge) -> Result<Self> {
        let id = FunctionalId {
            density,
            variable,
            gauge,
        };
        id.validate()?;
        Ok(id)
    }

    /// The supported density/variable/gauge combinations. The Ricci-norm
    /// metric functionals exist only in the harmonic gauge.
    pub fn validate(&self) -> Result<()> {
        use DensityKind::*;
        use Variable::*;
        let ok = match (self.density, self.variable) {
            (ConnNorm, _) => self.gauge == Gauge::None,
            (RiemannNorm, _) => self.gauge == Gauge::None,
            (RicciNorm, Gamma) => self.gauge == Gauge::None,
            (RicciNorm, Metric) | (RicciNorm, InverseMetric) => self.gauge == Gauge::Harmonic,
            (TotalScalar, Gamma) | (TotalScalar, InverseMetric) => self.gauge == Gauge::None,
            (ScalarSquare, InverseMetric) => self.gauge == Gauge::None,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(format!(
                "unsupported functional {:?}/{:?}/{:?}",
                self.density, self.variable, self.gauge
            )))
        }
    }

    /// Every functional in the Euler-Lagrange table, in theorem order.
    pub fn table() -> Vec<FunctionalId> {
        use DensityKind::*;
        use Variable::*;
        [
            (ConnNorm, Gamma, Gauge::None),
            (ConnNorm, Metric, Gauge::None),
            (ConnNorm, InverseMetric, Gauge::None),
            (RiemannNorm, Gamma, Gauge::None),
            (RiemannNorm, InverseMetric, Gauge::None),
            (RiemannNorm, Metric, Gauge::None),
            (RicciNorm, Gamma, Gauge::None),
            (RicciNorm, InverseMetric, Gauge::Harmonic),
            (RicciNorm, Metric, Gauge::Harmonic),
            (TotalScalar, Gamma, Gauge::None),
            (TotalScalar, InverseMetric, Gauge::None),
            (ScalarSquare, InverseMetric, Gauge::None),
        ]
        .into_iter()
        .map(|(d, v, g)| FunctionalId {
            density: d,
            variable: v,
            gauge: g,
        })
        .collect()
    }

    pub fn name(&self) -> String {
        let d = match self.density {
            DensityKind::ConnNorm => "conn_norm",
            DensityKind::RiemannNorm => "riemann_norm",
            DensityKind::RicciNorm => "ricci_norm",
            DensityKind::ScalarSquare => "scalar_square",
            DensityKind::TotalScalar => "total_scalar",
        };
        let v = match self.variable {
            Variable::Gamma => "gamma",
            Variable::Metric => "metric",
            Variable::InverseMetric => "inverse_metric",
        };
        match self.gauge {
            Gauge::None => format!("{d}:{v}"),
            Gauge::Harmonic => format!("{d}:{v}:harmonic"),
        }
    }
}

/// Midpoint rule over the chart grid, excluding `margin` cells per side so
/// finite-difference stencils stay inside the chart.
#[derive(Debug, Clone)]
pub struct GridQuadrature {
    pub chart: ChartBox,
    pub margin: usize,
}

impl GridQuadrature {
    pub fn new(chart: ChartBox, margin: usize) -> Result<Self> {
        for d in 0..chart.n() {
            if chart.grid[d] <= 2 * margin {
                return Err(Error::ConfigInvalid(format!(
                    "margin {margin} leaves no interior cells on axis {d}"
                )));
            }
        }
        Ok(GridQuadrature { chart, margin })
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.chart.n())
            .map(|d| (self.chart.upper[d] - self.chart.lower[d]) / self.chart.grid[d] as f64)
            .product()
    }

    /// Interior cell centers.
    pub fn centers(&self) -> Vec<Vec<f64>> {
        let n = self.chart.n();
        let mut points = vec![vec![]];
        for d in 0..n {
            let cells = self.chart.grid[d];
            let h = (self.chart.upper[d] - self.chart.lower[d]) / cells as f64;
            let mut next = Vec::with_capacity(points.len() * (cells - 2 * self.margin));
            for p in &points {
                for i in self.margin..cells - self.margin {
                    let mut q = p.clone();
                    q.push(self.chart.lower[d] + (i as f64 + 0.5) * h);
                    next.push(q);
                }
            }
            points = next;
        }
        points
    }

    /// Margin expressed as a coordinate width (worst axis).
    pub fn margin_width(&self) -> f64 {
        (0..self.chart.n())
            .map(|d| {
                self.margin as f64 * (self.chart.upper[d] - self.chart.lower[d])
                    / self.chart.grid[d] as f64
            })
            .fold(0.0, f64::max)
    }
}

/// C² window: product of per-axis quintic-smoothstep bumps supported on
/// [lower, upper], vanishing with first and second derivatives at the edges.
#[derive(Debug, Clone)]
pub struct BumpWindow {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

fn smoothstep5(t: f64) -> (f64, f64, f64) {
    // 6t⁵ − 15t⁴ + 10t³ and its two derivatives.
    (
        ((6.0 * t - 15.0) * t + 10.0) * t * t * t,
        ((30.0 * t - 60.0) * t + 30.0) * t * t,
        ((120.0 * t - 180.0) * t + 60.0) * t,
    )
}

impl BumpWindow {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(a, b)| a >= b) {
            return Err(Error::ConfigInvalid(
                "bump window must have lower < upper".into(),
            ));
        }
        Ok(BumpWindow { lower, upper })
    }

    /// Window centered in `chart` covering `fraction` of each extent.
    pub fn centered(chart: &ChartBox, fraction: f64) -> Self {
        let n = chart.n();
        let mut lower = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);
        for d in 0..n {
            let c = 0.5 * (chart.lower[d] + chart.upper[d]);
            let half = 0.5 * fraction * (chart.upper[d] - chart.lower[d]);
            lower.push(c - half);
            upper.push(c + half);
        }
        BumpWindow { lower, upper }
    }

    /// Scalar 2-jet of the window.
    pub fn jet2(&self, x: &[f64]) -> ScalarJet2 {
        let n = x.len();
        let mut acc = ScalarJet2::constant(n, 1.0);
        for d in 0..n {
            let w = self.upper[d] - self.lower[d];
            let u = (x[d] - self.lower[d]) / w;
            let (v, dv, ddv) = if u <= 0.0 || u >= 1.0 {
                (0.0, 0.0, 0.0)
            } else if u < 0.5 {
                let (s, ds, dds) = smoothstep5(2.0 * u);
                (s, ds * 2.0 / w, dds * 4.0 / (w * w))
            } else {
                let (s, ds, dds) = smoothstep5(2.0 * (1.0 - u));
                (s, -ds * 2.0 / w, dds * 4.0 / (w * w))
            };
            let mut axis = ScalarJet2::constant(n, v);
            axis.grad[d] = dv;
            axis.hess[d][d] = ddv;
            acc = acc.mul(&axis);
        }
        acc
    }
}

/// Symmetric metric-direction perturbation B_mn(x) = coeff_mn · window(x).
#[derive(Debug, Clone)]
pub struct MetricBump {
    pub window: BumpWindow,
    pub coeff: SquareMatrix,
}

/// Connection-direction perturbation T^i_jk(x) = coeff^i_jk · window(x),
/// coefficient symmetric in the lower pair.
#[derive(Debug, Clone)]
pub struct ConnectionBump {
    pub window: BumpWindow,
    pub coeff: Tensor3,
}

/// Evaluable metric field view: a base field, possibly perturbed directly or
/// through its inverse (perturb the inverse-matrix field, then re-invert).
#[derive(Debug, Clone)]
pub enum MetricView {
    Plain(MetricField),
    Perturbed {
        base: MetricField,
        bump: MetricBump,
        eps: f64,
    },
    InversePerturbed {
        base: MetricField,
        bump: MetricBump,
        eps: f64,
    },
}

impl MetricView {
    pub fn n(&self) -> usize {
        self.base().n()
    }

    pub fn base(&self) -> &MetricField {
        match self {
            MetricView::Plain(f) => f,
            MetricView::Perturbed { base, .. } => base,
            MetricView::InversePerturbed { base, .. } => base,
        }
    }

    pub fn chart(&self) -> &ChartBox {
        self.base().chart()
    }

    pub fn jet2(&self, x: &[f64]) -> Result<MetricJet2> {
        match self {
            MetricView::Plain(f) => f.jet2(x),
            MetricView::Perturbed { base, bump, eps } => {
                let mut jet = base.jet2(x)?;
                let n = jet.n();
                let w = bump.window.jet2(x);
                for r in 0..n {
                    for s in 0..n {
                        let c = bump.coeff.get(r, s);
                        if c == 0.0 {
                            continue;
                        }
                        jet.g.add_to(r, s, eps * c * w.v);
                        for t in 0..n {
                            jet.dg.add_to(t, r, s, eps * c * w.grad[t]);
                            for u in 0..n {
                                jet.ddg.add_to(t, u, r, s, eps * c * w.hess[t][u]);
                            }
                        }
                    }
                }
                Ok(jet)
            }
            MetricView::InversePerturbed { base, bump, eps } => {
                let jet = base.jet2(x)?;
                inverse_perturbed_jet(&jet, bump, *eps)
            }
        }
    }
}

/// Jet of ((g⁻¹ + εB)⁻¹) from the jet of g, via ∂(M⁻¹) = −M⁻¹(∂M)M⁻¹
/// applied twice.
fn inverse_perturbed_jet(jet: &MetricJet2, bump: &MetricBump, eps: f64) -> Result<MetricJet2> {
    let n = jet.n();
    let u = jet.g.invert_spd()?;
    let w = bump.window.jet2(&jet.x);
    let dg_mat = |t: usize| SquareMatrix::from_fn(n, |r, s| jet.dg.get(t, r, s));
    let ddg_mat = |a: usize, b: usize| SquareMatrix::from_fn(n, |r, s| jet.ddg.get(a, b, r, s));
    let mut wmat = u.clone();
    for r in 0..n {
        for s in 0..n {
            wmat.add_to(r, s, eps * bump.coeff.get(r, s) * w.v);
        }
    }
    let du = |t: usize| u.matmul(&dg_mat(t)).matmul(&u).scale(-1.0);
    let dw: Vec<SquareMatrix> = (0..n)
        .map(|t| du(t).add(&bump.coeff.scale(eps * w.grad[t])))
        .collect();
    let ddw = |a: usize, b: usize| {
        let da = dg_mat(a);
        let db = dg_mat(b);
        let term1 = u.matmul(&da).matmul(&u).matmul(&db).matmul(&u);
        let term2 = u.matmul(&db).matmul(&u).matmul(&da).matmul(&u);
        let term3 = u.matmul(&ddg_mat(a, b)).matmul(&u);
        term1
            .add(&term2)
            .sub(&term3)
            .add(&bump.coeff.scale(eps * w.hess[a][b]))
    };
    let gt = wmat.invert_spd()?;
    let mut dg = Tensor3::zeros(n);
    let mut dgt = Vec::with_capacity(n);
    for t in 0..n {
        let m = gt.matmul(&dw[t]).matmul(&gt).scale(-1.0);
        for r in 0..n {
            for s in 0..n {
                dg.set(t, r, s, m.get(r, s));
            }
        }
        dgt.push(m);
    }
    let mut ddg = Tensor4::zeros(n);
    for a in 0..n {
        for b in a..n {
            let term1 = gt.matmul(&dw[a]).matmul(&gt).matmul(&dw[b]).matmul(&gt);
            let term2 = gt.matmul(&dw[b]).matmul(&gt).matmul(&dw[a]).matmul(&gt);
            let term3 = gt.matmul(&ddw(a, b)).matmul(&gt);
            let m = term1.add(&term2).sub(&term3);
            for r in 0..n {
                for s in 0..n {
                    ddg.set(a, b, r, s, m.get(r, s));
                    ddg.set(b, a, r, s, m.get(r, s));
                }
            }
        }
    }
    Ok(MetricJet2 {
        x: jet.x.clone(),
        g: gt,
        dg,
        ddg,
    })
}

/// Connection view: the Levi-Civita connection of the metric view, or an
/// explicit connection field, either optionally perturbed.
#[derive(Debug, Clone)]
pub enum GammaView {
    LeviCivita,
    LeviCivitaPerturbed { bump: ConnectionBump, eps: f64 },
    Field(ConnectionField),
    FieldPerturbed {
        base: ConnectionField,
        bump: ConnectionBump,
        eps: f64,
    },
}

/// The (metric, connection) pair a functional is evaluated on.
#[derive(Debug, Clone)]
pub struct AffineField {
    pub metric: MetricView,
    pub gamma: GammaView,
}

impl AffineField {
    /// Metric field with its Levi-Civita connection.
    pub fn from_metric_spec(spec: &FieldSpec) -> Result<Self> {
        Ok(AffineField {
            metric: MetricView::Plain(MetricField::from_spec(spec)?),
            gamma: GammaView::LeviCivita,
        })
    }

    pub fn from_metric_field(field: MetricField) -> Self {
        AffineField {
            metric: MetricView::Plain(field),
            gamma: GammaView::LeviCivita,
        }
    }

    /// Explicit connection over a background metric.
    pub fn with_connection(metric: MetricField, connection: ConnectionField) -> Self {
        AffineField {
            metric: MetricView::Plain(metric),
            gamma: GammaView::Field(connection),
        }
    }

    pub fn n(&self) -> usize {
        self.metric.n()
    }

    pub fn chart(&self) -> &ChartBox {
        self.metric.chart()
    }

    pub fn metric_jet(&self, x: &[f64]) -> Result<MetricJet2> {
        self.metric.jet2(x)
    }

    pub fn gamma_jet(&self, x: &[f64]) -> Result<ConnectionJet1> {
        let base = match &self.gamma {
            GammaView::LeviCivita | GammaView::LeviCivitaPerturbed { .. } => {
                curvature::christoffel(&self.metric_jet(x)?)?
            }
            GammaView::Field(f) | GammaView::FieldPerturbed { base: f, .. } => f.jet1(x)?,
        };
        let (bump, eps) = match &self.gamma {
            GammaView::LeviCivitaPerturbed { bump, eps } => (bump, *eps),
            GammaView::FieldPerturbed { bump, eps, .. } => (bump, *eps),
            _ => return Ok(base),
        };
        let n = base.n();
        let w = bump.window.jet2(x);
        let mut gamma = base.gamma;
        let mut dgamma = base.dgamma;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let c = bump.coeff.get(i, j, k);
                    if c == 0.0 {
                        continue;
                    }
                    gamma.add_to(i, j, k, eps * c * w.v);
                    for p in 0..n {
                        dgamma.add_to(p, i, j, k, eps * c * w.grad[p]);
                    }
                }
            }
        }
        Ok(ConnectionJet1 {
            x: x.to_vec(),
            gamma,
            dgamma,
        })
    }

    fn with_variable_bump(&self, id: FunctionalId, bump: &Bump, eps: f64) -> AffineField {
        let mut out = self.clone();
        match (id.variable, bump) {
            (Variable::Gamma, Bump::Connection(b)) => {
                out.gamma = match &self.gamma {
                    GammaView::LeviCivita | GammaView::LeviCivitaPerturbed { .. } => {
                        GammaView::LeviCivitaPerturbed {
                            bump: b.clone(),
                            eps,
                        }
                    }
                    GammaView::Field(f) | GammaView::FieldPerturbed { base: f, .. } => {
                        GammaView::FieldPerturbed {
                            base: f.clone(),
                            bump: b.clone(),
                            eps,
                        }
                    }
                };
            }
            (Variable::Metric, Bump::Metric(b)) => {
                out.metric = MetricView::Perturbed {
                    base: self.metric.base().clone(),
                    bump: b.clone(),
                    eps,
                };
            }
            (Variable::InverseMetric, Bump::Metric(b)) => {
                out.metric = MetricView::InversePerturbed {
                    base: self.metric.base().clone(),
                    bump: b.clone(),
                    eps,
                };
            }
            _ => unreachable!("bump kind checked against the variable upfront"),
        }
        out
    }
}

/// A perturbation direction matching a functional's variable.
#[derive(Debug, Clone)]
pub enum Bump {
    Metric(MetricBump),
    Connection(ConnectionBump),
}

impl Bump {
    pub fn matches(&self, variable: Variable) -> bool {
        matches!(
            (self, variable),
            (Bump::Metric(_), Variable::Metric)
                | (Bump::Metric(_), Variable::InverseMetric)
                | (Bump::Connection(_), Variable::Gamma)
        )
    }

    fn window(&self) -> &BumpWindow {
        match self {
            Bump::Metric(b) => &b.window,
            Bump::Connection(b) => &b.window,
        }
    }
}

/// Lagrangian 𝓛 = L·√det g at a point (the returned density carries the
/// volume weight).
pub fn density(id: FunctionalId, field: &AffineField, x: &[f64]) -> Result<f64> {
    let jet = field.metric_jet(x)?;
    let g_inv = jet.g.invert_spd()?;
    let sqrt_det = jet.g.det().sqrt();
    let l = match (id.density, id.variable) {
        (DensityKind::ConnNorm, _) => {
            let cj = field.gamma_jet(x)?;
            connection_norm_sq(&jet.g, &g_inv, &cj.gamma)?
        }
        (DensityKind::RiemannNorm, Variable::Gamma) => {
            let cj = field.gamma_jet(x)?;
            let r = curvature::riemann_mixed(&cj);
            riemann_norm_sq_mixed(&jet.g, &g_inv, &r)?
        }
        (DensityKind::RiemannNorm, _) => {
            let r = curvature::riemann_lower(&jet)?;
            riemann_norm_sq_lower(&g_inv, &r)?
        }
        (DensityKind::RicciNorm, Variable::Gamma) => {
            let cj = field.gamma_jet(x)?;
            let ric = curvature::ricci_from_mixed(&curvature::riemann_mixed(&cj));
            ricci_norm_sq(&g_inv, &ric)?
        }
        (DensityKind::RicciNorm, _) => {
            // The harmonic-gauge quasilinear Ricci expression, taken as a
            // functional of the jet; the gauge restriction applies to base
            // fields, not to perturbed evaluations.
            let ric = ricci_harmonic_formula(&jet)?;
            ricci_norm_sq(&g_inv, &ric)?
        }
        (DensityKind::ScalarSquare, _) => {
            let ric = levi_civita_ricci(&jet)?;
            let r = curvature::scalar_curvature(&g_inv, &ric);
            r * r
        }
        (DensityKind::TotalScalar, Variable::Gamma) => {
            let cj = field.gamma_jet(x)?;
            let ric = curvature::ricci_from_mixed(&curvature::riemann_mixed(&cj));
            curvature::scalar_curvature(&g_inv, &ric)
        }
        (DensityKind::TotalScalar, _) => {
            let ric = levi_civita_ricci(&jet)?;
            curvature::scalar_curvature(&g_inv, &ric)
        }
    };
    Ok(l * sqrt_det)
}

fn levi_civita_ricci(jet: &MetricJet2) -> Result<SquareMatrix> {
    let cj = curvature::christoffel(jet)?;
    Ok(curvature::ricci_from_mixed(&curvature::riemann_mixed(&cj)))
}

/// Midpoint-rule discretization of I = ∫ L dμ over the margin-shrunk grid.
pub fn functional(id: FunctionalId, field: &AffineField, quad: &GridQuadrature) -> Result<f64> {
    let vol = quad.cell_volume();
    let centers = quad.centers();
    let total: Result<f64> = centers
        .par_iter()
        .map(|x| density(id, field, x))
        .try_reduce(|| 0.0, |a, b| Ok(a + b));
    Ok(total? * vol)
}

/// Independent numerical first variation:
/// (I[v + ε·bump] − I[v − ε·bump]) / 2ε in the declared variable.
pub fn gateaux_derivative(
    id: FunctionalId,
    field: &AffineField,
    bump: &Bump,
    quad: &GridQuadrature,
    eps: f64,
) -> Result<f64> {
    if !bump.matches(id.variable) {
        return Err(Error::ConfigInvalid(
            "bump kind does not match the functional's variable".into(),
        ));
    }
    let margin = quad.margin_width();
    let w = bump.window();
    for d in 0..quad.chart.n() {
        if w.lower[d] < quad.chart.lower[d] + margin - 1e-12
            || w.upper[d] > quad.chart.upper[d] - margin + 1e-12
        {
            return Err(Error::ConfigInvalid(
                "bump support must sit inside the quadrature margin".into(),
            ));
        }
    }
    let plus = functional(id, &field.with_variable_bump(id, bump, eps), quad)?;
    let minus = functional(id, &field.with_variable_bump(id, bump, -eps), quad)?;
    Ok((plus - minus) / (2.0 * eps))
}

/// Euler-Lagrange residuals evaluated at every quadrature cell center.
pub fn residual_field(
    id: FunctionalId,
    field: &AffineField,
    quad: &GridQuadrature,
    h: f64,
) -> Result<Vec<Residual>> {
    quad.centers()
        .par_iter()
        .map(|x| el_residual(id, field, x, h))
        .collect()
}

fn pair_at(res: &Residual, bump: &Bump, x: &[f64]) -> Result<f64> {
    match (res, bump) {
        (Residual::Metric(r), Bump::Metric(b)) => {
            let w = b.window.jet2(x).v;
            let n = r.n();
            let mut s = 0.0;
            for m in 0..n {
                for nn in 0..n {
                    s += r.get(m, nn) * b.coeff.get(m, nn) * w;
                }
            }
            Ok(s)
        }
        (Residual::Connection(r), Bump::Connection(b)) => {
            let w = b.window.jet2(x).v;
            let n = r.n();
            let mut s = 0.0;
            for u in 0..n {
                for v in 0..n {
                    for t in 0..n {
                        s += r.get(u, v, t) * b.coeff.get(u, v, t) * w;
                    }
                }
            }
            Ok(s)
        }
        _ => Err(Error::ConfigInvalid(
            "bump kind does not match residual shape".into(),
        )),
    }
}

/// ∫⟨el_residual, bump⟩ dx over the quadrature cells.
pub fn residual_pairing(
    id: FunctionalId,
    field: &AffineField,
    bump: &Bump,
    quad: &GridQuadrature,
    h: f64,
) -> Result<f64> {
    let residuals = residual_field(id, field, quad, h)?;
    pairing_from_field(&residuals, bump, quad)
}

fn pairing_from_field(residuals: &[Residual], bump: &Bump, quad: &GridQuadrature) -> Result<f64> {
    let vol = quad.cell_volume();
    let centers = quad.centers();
    let mut total = 0.0;
    for (x, res) in centers.iter().zip(residuals) {
        total += pair_at(res, bump, x)?;
    }
    Ok(total * vol)
}

/// Worst relative mismatch between the Gateaux derivative and the residual
/// pairing over a list of bumps. The residual field is computed once and
/// paired with every bump. Derivatives below the zero floor on both sides
/// count as a trivial match.
///
/// The Gateaux side is Richardson-extrapolated across the given grid and a
/// 2×-per-axis refinement: the first-variation integrand carries the bump
/// window's second derivatives, whose midpoint-rule error is cleanly O(h²),
/// so the two-grid combination (4·fine − coarse)/3 removes it.
pub fn el_oracle_match(
    id: FunctionalId,
    field: &AffineField,
    bumps: &[Bump],
    quad: &GridQuadrature,
    eps: f64,
    h: f64,
) -> Result<f64> {
    let zero_floor = 1e-9;
    let mut fine_chart = quad.chart.clone();
    for g in &mut fine_chart.grid {
        *g *= 2;
    }
    let fine = GridQuadrature {
        chart: fine_chart,
        margin: 2 * quad.margin,
    };
    let residuals = residual_field(id, field, quad, h)?;
    let mut worst = 0.0f64;
    for bump in bumps {
        let mut eps_try = eps;
        let gateaux = loop {
            let coarse = gateaux_derivative(id, field, bump, quad, eps_try);
            let refined = coarse.and_then(|c| {
                gateaux_derivative(id, field, bump, &fine, eps_try).map(|f| (4.0 * f - c) / 3.0)
            });
            match refined {
                Ok(v) => break v,
                Err(Error::NotPositiveDefinite { .. }) if eps_try > eps / 4096.0 => {
                    eps_try *= 0.5;
                }
                Err(e) => return Err(e),
            }
        };
        let pairing = pairing_from_field(&residuals, bump, quad)?;
        let denom = gateaux.abs().max(pairing.abs());
        if denom > zero_floor {
            worst = worst.max((gateaux - pairing).abs() / denom);
        }
    }
    Ok(worst)
}

/// Pointwise Einstein-condition residual R_ij − (R/n) g_ij.
pub fn einstein_constraint_residual(field: &AffineField, x: &[f64]) -> Result<SquareMatrix> {
    let jet = field.metric_jet(x)?;
    let n = jet.n();
    let ric = levi_civita_ricci(&jet)?;
    let g_inv = jet.g.invert_spd()?;
    let scalar = curvature::scalar_curvature(&g_inv, &ric);
    Ok(ric.sub(&jet.g.scale(scalar / n as f64)))
}

/// Parameterized metric families searched by the minimizer.
#[derive(Debug, Clone)]
pub enum FamilySpec {
    /// g(θ) = e^{2θ·φ(x)} δ, one parameter; θ = 0 is the flat member.
    ConformalScale { phi: ScalarExpr, chart: ChartBox },
    /// g(θ) = δ + Σ_p θ_p · S_p · w_p(x), entrywise coefficient families.
    Coefficients {
        basis: Vec<(SquareMatrix, ScalarExpr)>,
        chart: ChartBox,
    },
}

impl FamilySpec {
    pub fn arity(&self) -> usize {
        match self {
            FamilySpec::ConformalScale { .. } => 1,
            FamilySpec::Coefficients { basis, .. } => basis.len(),
        }
    }

    pub fn chart(&self) -> &ChartBox {
        match self {
            FamilySpec::ConformalScale { chart, .. } => chart,
            FamilySpec::Coefficients { chart, .. } => chart,
        }
    }

    pub fn member(&self, theta: &[f64]) -> Result<MetricField> {
        if theta.len() != self.arity() {
            return Err(Error::DimensionMismatch {
                expected: self.arity(),
                got: theta.len(),
            });
        }
        match self {
            FamilySpec::ConformalScale { phi, chart } => {
                let profile = ScalarExpr::Exp(Box::new(ScalarExpr::Mul(vec![
                    ScalarExpr::Const(2.0 * theta[0]),
                    phi.clone(),
                ])));
                MetricField::compile(
                    &crate::field::MetricKind::Conformal {
                        base: SquareMatrix::identity(chart.n()),
                        profile,
                    },
                    chart,
                )
            }
            FamilySpec::Coefficients { basis, chart } => {
                let n = chart.n();
                let mut entries = Vec::with_capacity(n * (n + 1) / 2);
                for i in 0..n {
                    for j in i..n {
                        let mut terms = vec![ScalarExpr::Const(if i == j { 1.0 } else { 0.0 })];
                        for (p, (coeff, w)) in basis.iter().enumerate() {
                            let c = coeff.get(i, j);
                            if c != 0.0 {
                                terms.push(ScalarExpr::Mul(vec![
                                    ScalarExpr::Const(theta[p] * c),
                                    w.clone(),
                                ]));
                            }
                        }
                        entries.push(ScalarExpr::Add(terms));
                    }
                }
                MetricField::compile(&crate::field::MetricKind::Custom { entries }, chart)
            }
        }
    }
}

/// Gradient-descent options: initial step, backtracking ratio, iteration cap,
/// gradient-norm stop, and the parameter-space difference step.
#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    pub step0: f64,
    pub backtrack_ratio: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub grad_step: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            step0: 1.0,
            backtrack_ratio: 0.5,
            max_iters: 200,
            grad_tol: 1e-7,
            grad_step: 1e-5,
        }
    }
}

/// Outcome of a deviation minimization.
#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub theta: Vec<f64>,
    /// Functional value per accepted iterate, starting with the initial one.
    pub trace: Vec<f64>,
    pub grad_norm: f64,
}

const MAX_HALVINGS: usize = 40;

/// Gradient descent with central-difference parameter gradients and a
/// backtracking line search; the trace is monotone non-increasing.
pub fn minimize_deviation(
    id: FunctionalId,
    family: &FamilySpec,
    quad: &GridQuadrature,
    theta0: &[f64],
    opts: &MinimizeOptions,
) -> Result<MinimizeResult> {
    let eval = |theta: &[f64]| -> Result<f64> {
        let field = AffineField::from_metric_field(family.member(theta)?);
        functional(id, &field, quad)
    };
    let mut theta = theta0.to_vec();
    let mut f = eval(&theta)?;
    let mut trace = vec![f];
    let k = family.arity();
    let mut grad = vec![0.0; k];
    let mut grad_norm = 0.0;
    for _ in 0..opts.max_iters {
        for p in 0..k {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[p] += opts.grad_step;
            tm[p] -= opts.grad_step;
            grad[p] = (eval(&tp)? - eval(&tm)?) / (2.0 * opts.grad_step);
        }
        grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm < opts.grad_tol {
            break;
        }
        let mut step = opts.step0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - step * g).collect();
            match eval(&cand) {
                Ok(fc) if fc <= f - 1e-4 * step * grad_norm * grad_norm => {
                    theta = cand;
                    f = fc;
                    trace.push(f);
                    accepted = true;
                    break;
                }
                Ok(_) | Err(Error::NotPositiveDefinite { .. }) => {
                    step *= opts.backtrack_ratio;
                }
                Err(e) => return Err(e),
            }
        }
        if !accepted {
            return Err(Error::LineSearchFailed(MAX_HALVINGS));
        }
    }
    Ok(MinimizeResult {
        theta,
        trace,
        grad_norm,
    })
}
