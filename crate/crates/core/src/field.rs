//! Declarative metric and connection fields on a chart box, evaluated to jets
//! (value plus first and second partials) analytically or by central
//! finite differences.

use crate::error::{Error, Result};
use crate::scalar::ScalarExpr;
use crate::tensor::{SquareMatrix, Tensor3, Tensor4};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Axis-aligned coordinate chart with a uniform evaluation grid.
///
/// `grid` counts cells per axis; the midpoint quadrature rule and the
/// construction-time positivity checks both run over this lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub grid: Vec<usize>,
}

impl ChartBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, grid: Vec<usize>) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != grid.len() || lower.is_empty() {
            return Err(Error::ConfigInvalid(
                "chart box lower/upper/grid lengths must agree and be nonzero".into(),
            ));
        }
        for d in 0..lower.len() {
            if !(lower[d] < upper[d]) {
                return Err(Error::ConfigInvalid(format!(
                    "chart box axis {d}: lower {} must be below upper {}",
                    lower[d], upper[d]
                )));
            }
            if grid[d] < 2 {
                return Err(Error::ConfigInvalid(format!(
                    "chart box axis {d}: grid must be at least 2"
                )));
            }
        }
        Ok(ChartBox { lower, upper, grid })
    }

    /// Unit box [0,1]^n with the given cells per axis.
    pub fn unit(n: usize, cells: usize) -> Self {
        ChartBox {
            lower: vec![0.0; n],
            upper: vec![1.0; n],
            grid: vec![cells; n],
        }
    }

    pub fn n(&self) -> usize {
        self.lower.len()
    }

    pub fn min_extent(&self) -> f64 {
        (0..self.n())
            .map(|d| self.upper[d] - self.lower[d])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &[f64], shrink: f64) -> bool {
        x.len() == self.n()
            && (0..self.n()).all(|d| {
                x[d] >= self.lower[d] + shrink - 1e-12 && x[d] <= self.upper[d] - shrink + 1e-12
            })
    }

    pub fn center(&self) -> Vec<f64> {
        (0..self.n())
            .map(|d| 0.5 * (self.lower[d] + self.upper[d]))
            .collect()
    }

    /// Corner lattice of the cell grid (grid[d]+1 points per axis).
    pub fn lattice(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut points = vec![vec![]];
        for d in 0..n {
            let steps = self.grid[d];
            let h = (self.upper[d] - self.lower[d]) / steps as f64;
            let mut next = Vec::with_capacity(points.len() * (steps + 1));
            for p in &points {
                for i in 0..=steps {
                    let mut q = p.clone();
                    q.push(self.lower[d] + i as f64 * h);
                    next.push(q);
                }
            }
            points = next;
        }
        points
    }
}

/// Central-difference step sizes for jet evaluation.
#[derive(Debug, Clone, Copy)]
pub struct FdConfig {
    /// Step for first derivatives.
    pub h1: f64,
    /// Step for second derivatives.
    pub h2: f64,
}

impl FdConfig {
    /// Default steps balancing truncation and round-off: h1 = 1e-5·extent,
    /// h2 = 1e-3·extent.
    pub fn for_box(chart: &ChartBox) -> Self {
        let e = chart.min_extent();
        FdConfig {
            h1: 1e-5 * e,
            h2: 1e-3 * e,
        }
    }

    pub fn shrink(&self) -> f64 {
        2.0 * self.h1.max(self.h2)
    }
}

/// Metric components with first and second partials at a point.
///
/// `dg.get(t, r, s)` holds ∂_t g_rs and `ddg.get(a, b, r, s)` holds ∂_a∂_b g_rs.
#[derive(Debug, Clone)]
pub struct MetricJet2 {
    pub x: Vec<f64>,
    pub g: SquareMatrix,
    pub dg: Tensor3,
    pub ddg: Tensor4,
}

impl MetricJet2 {
    pub fn n(&self) -> usize {
        self.g.n()
    }

    pub fn constant(x: Vec<f64>, g: SquareMatrix) -> Self {
        let n = g.n();
        MetricJet2 {
            x,
            g,
            dg: Tensor3::zeros(n),
            ddg: Tensor4::zeros(n),
        }
    }
}

/// Connection coefficients Γ^i_jk with first partials at a point.
///
/// `dgamma.get(p, l, i, s)` holds ∂_p Γ^l_is.
#[derive(Debug, Clone)]
pub struct ConnectionJet1 {
    pub x: Vec<f64>,
    pub gamma: Tensor3,
    pub dgamma: Tensor4,
}

impl ConnectionJet1 {
    pub fn n(&self) -> usize {
        self.gamma.n()
    }
}

/// Closed-form scalar profiles used by conformal and soliton fields.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// c0 + c1·t
    Affine { c0: f64, c1: f64 },
    /// c0 + c1·t + c2·t²
    Quadratic { c0: f64, c1: f64, c2: f64 },
    /// amp·e^{rate·t}
    Exp { amp: f64, rate: f64 },
    /// amp·sin(freq·t + phase)
    Trig { amp: f64, freq: f64, phase: f64 },
    /// amp/(t + shift)
    RecipAffine { amp: f64, shift: f64 },
}

impl Profile {
    pub fn applied_to(&self, t: ScalarExpr) -> ScalarExpr {
        match *self {
            Profile::Affine { c0, c1 } => ScalarExpr::Add(vec![
                ScalarExpr::Const(c0),
                ScalarExpr::Mul(vec![ScalarExpr::Const(c1), t]),
            ]),
            Profile::Quadratic { c0, c1, c2 } => ScalarExpr::Add(vec![
                ScalarExpr::Const(c0),
                ScalarExpr::Mul(vec![ScalarExpr::Const(c1), t.clone()]),
                ScalarExpr::Mul(vec![ScalarExpr::Const(c2), ScalarExpr::Powi(Box::new(t), 2)]),
            ]),
            Profile::Exp { amp, rate } => ScalarExpr::Mul(vec![
                ScalarExpr::Const(amp),
                ScalarExpr::Exp(Box::new(ScalarExpr::Mul(vec![ScalarExpr::Const(rate), t]))),
            ]),
            Profile::Trig { amp, freq, phase } => ScalarExpr::Mul(vec![
                ScalarExpr::Const(amp),
                ScalarExpr::Sin(Box::new(ScalarExpr::Add(vec![
                    ScalarExpr::Mul(vec![ScalarExpr::Const(freq), t]),
                    ScalarExpr::Const(phase),
                ]))),
            ]),
            Profile::RecipAffine { amp, shift } => ScalarExpr::Div(
                Box::new(ScalarExpr::Const(amp)),
                Box::new(ScalarExpr::Add(vec![t, ScalarExpr::Const(shift)])),
            ),
        }
    }

    /// Ridge field p(a·x + b).
    pub fn ridge(&self, direction: &[f64], offset: f64) -> ScalarExpr {
        self.applied_to(ScalarExpr::affine(direction, offset))
    }
}

/// Metric field kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricKind {
    /// g_ij(x) = c_ij, constant symmetric positive definite.
    EuclideanConstant(SquareMatrix),
    /// g_ij(x) = f(x)·c_ij with a scalar profile f.
    Conformal {
        base: SquareMatrix,
        profile: ScalarExpr,
    },
    /// Round sphere of the given radius in polar angles; g = diag(r², r²sin²x1)
    /// for n = 2 and diag(r², r²sin²x1, r²sin²x1·sin²x2) for n = 3.
    RoundSphere { radius: f64 },
    /// Seeded trigonometric-polynomial field g = Aᵀ(x)A(x) + ½I.
    PolynomialSpd { seed: u64, degree: u32 },
    /// g_ij(x) = base_ij + amplitude_ij · p(a·x), a ridge soliton profile.
    Soliton {
        base: SquareMatrix,
        amplitude: SquareMatrix,
        direction: Vec<f64>,
        profile: Profile,
    },
    /// Quadratic normal-coordinate series g_jl = δ_jl + Q_ikjl x^i x^k
    /// prescribing the curvature at the origin (Q built by the flatness module).
    NormalSeries { quadratic: Tensor4 },
    /// Upper-triangle entries given as expressions over x1..xn.
    Custom { entries: Vec<ScalarExpr> },
}

/// Connection field kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum ConnectionKind {
    /// Γ^i_jk(x) = C^i_jk constant.
    Tabulated(Tensor3),
    /// Γ^i_jk(x) = c^i_jk·f(x) with f(x) = −1/(x¹+...+x^n + shift).
    SolitonFamily { coeff: Tensor3, shift: f64 },
    /// Levi-Civita connection of a metric field (evaluated through its jets).
    LeviCivita(Box<MetricKind>),
}

/// A metric or connection field kind.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind {
    Metric(MetricKind),
    Connection(ConnectionKind),
}

/// Declarative description of a field on a chart box.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub kind: FieldKind,
    pub chart: ChartBox,
}

impl FieldSpec {
    pub fn metric(kind: MetricKind, chart: ChartBox) -> Self {
        FieldSpec {
            kind: FieldKind::Metric(kind),
            chart,
        }
    }

    pub fn connection(kind: ConnectionKind, chart: ChartBox) -> Self {
        FieldSpec {
            kind: FieldKind::Connection(kind),
            chart,
        }
    }

    /// Canonical round-sphere chart staying clear of the poles.
    pub fn round_sphere(radius: f64, n: usize, cells: usize) -> Result<Self> {
        let pole_margin = 0.2;
        let mut lower = vec![pole_margin; n - 1];
        let mut upper = vec![std::f64::consts::PI - pole_margin; n - 1];
        lower.push(0.0);
        upper.push(1.0);
        let chart = ChartBox::new(lower, upper, vec![cells; n])?;
        Ok(FieldSpec::metric(MetricKind::RoundSphere { radius }, chart))
    }

    pub fn is_metric(&self) -> bool {
        matches!(self.kind, FieldKind::Metric(_))
    }
}

/// Seeded generator of everywhere-SPD analytic metric fields,
/// g(x) = Aᵀ(x)A(x) + ½I with trigonometric-polynomial entries in A.
pub fn random_spd_metric(seed: u64, degree: u32, chart: &ChartBox) -> FieldSpec {
    FieldSpec::metric(MetricKind::PolynomialSpd { seed, degree }, chart.clone())
}

fn triangle_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Evaluable metric field: the kind compiled to per-entry scalar expressions.
#[derive(Debug, Clone)]
pub struct MetricField {
    n: usize,
    chart: ChartBox,
    entries: Vec<ScalarExpr>,
}

impl MetricField {
    pub fn compile(kind: &MetricKind, chart: &ChartBox) -> Result<MetricField> {
        let n = chart.n();
        let entries = compile_metric_entries(kind, n)?;
        let field = MetricField {
            n,
            chart: chart.clone(),
            entries,
        };
        field.validate()?;
        Ok(field)
    }

    pub fn from_spec(spec: &FieldSpec) -> Result<MetricField> {
        match &spec.kind {
            FieldKind::Metric(kind) => Self::compile(kind, &spec.chart),
            FieldKind::Connection(_) => Err(Error::ConfigInvalid(
                "expected a metric field, got a connection field".into(),
            )),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn chart(&self) -> &ChartBox {
        &self.chart
    }

    /// Positive definiteness at every lattice point of the chart.
    fn validate(&self) -> Result<()> {
        for p in self.chart.lattice() {
            let g = self.value_unchecked(&p);
            for (k, m) in g.leading_principal_minors().iter().enumerate() {
                if *m <= 0.0 {
                    return Err(Error::NotPositiveDefinite {
                        order: k + 1,
                        value: *m,
                    });
                }
            }
        }
        Ok(())
    }

    fn entry(&self, i: usize, j: usize) -> &ScalarExpr {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let idx: usize = (0..a).map(|r| self.n - r).sum::<usize>() + (b - a);
        &self.entries[idx]
    }

    fn value_unchecked(&self, x: &[f64]) -> SquareMatrix {
        SquareMatrix::from_fn(self.n, |i, j| self.entry(i, j).value(x))
    }

    pub fn value(&self, x: &[f64]) -> Result<SquareMatrix> {
        if !self.chart.contains(x, 0.0) {
            return Err(Error::OutOfDomain { point: x.to_vec() });
        }
        Ok(self.value_unchecked(x))
    }

    /// Analytic 2-jet from the compiled entry expressions.
    pub fn jet2(&self, x: &[f64]) -> Result<MetricJet2> {
        if !self.chart.contains(x, 0.0) {
            return Err(Error::OutOfDomain { point: x.to_vec() });
        }
        let n = self.n;
        let mut g = SquareMatrix::zeros(n);
        let mut dg = Tensor3::zeros(n);
        let mut ddg = Tensor4::zeros(n);
        for i in 0..n {
            for j in i..n {
                let jet = self.entry(i, j).jet2(x);
                g.set(i, j, jet.v);
                g.set(j, i, jet.v);
                for t in 0..n {
                    dg.set(t, i, j, jet.grad[t]);
                    dg.set(t, j, i, jet.grad[t]);
                    for u in 0..n {
                        ddg.set(t, u, i, j, jet.hess[t][u]);
                        ddg.set(t, u, j, i, jet.hess[t][u]);
                    }
                }
            }
        }
        Ok(MetricJet2 {
            x: x.to_vec(),
            g,
            dg,
            ddg,
        })
    }

    /// Second-order central-difference 2-jet; the evaluation point must stay
    /// 2·max(h1,h2) inside the chart.
    pub fn jet2_fd(&self, x: &[f64], fd: &FdConfig) -> Result<MetricJet2> {
        if !self.chart.contains(x, fd.shrink()) {
            return Err(Error::OutOfDomain { point: x.to_vec() });
        }
        let n = self.n;
        let g = self.value_unchecked(x);
        let mut dg = Tensor3::zeros(n);
        let mut ddg = Tensor4::zeros(n);
        let at = |x: &[f64]| self.value_unchecked(x);
        for t in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[t] += fd.h1;
            xm[t] -= fd.h1;
            let gp = at(&xp);
            let gm = at(&xm);
            for r in 0..n {
                for s in 0..n {
                    dg.set(t, r, s, (gp.get(r, s) - gm.get(r, s)) / (2.0 * fd.h1));
                }
            }
        }
        let h2 = fd.h2;
        for a in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[a] += h2;
            xm[a] -= h2;
            let gp = at(&xp);
            let gm = at(&xm);
            for r in 0..n {
                for s in 0..n {
                    let v = (gp.get(r, s) - 2.0 * g.get(r, s) + gm.get(r, s)) / (h2 * h2);
                    ddg.set(a, a, r, s, v);
                }
            }
            for b in a + 1..n {
                let mut xpp = x.to_vec();
                let mut xpm = x.to_vec();
                let mut xmp = x.to_vec();
                let mut xmm = x.to_vec();
                xpp[a] += h2;
                xpp[b] += h2;
                xpm[a] += h2;
                xpm[b] -= h2;
                xmp[a] -= h2;
                xmp[b] += h2;
                xmm[a] -= h2;
                xmm[b] -= h2;
                let gpp = at(&xpp);
                let gpm = at(&xpm);
                let gmp = at(&xmp);
                let gmm = at(&xmm);
                for r in 0..n {
                    for s in 0..n {
                        let v = (gpp.get(r, s) - gpm.get(r, s) - gmp.get(r, s) + gmm.get(r, s))
                            / (4.0 * h2 * h2);
                        ddg.set(a, b, r, s, v);
                        ddg.set(b, a, r, s, v);
                    }
                }
            }
        }
        Ok(MetricJet2 {
            x: x.to_vec(),
            g,
            dg,
            ddg,
        })
    }
}

fn compile_metric_entries(kind: &MetricKind, n: usize) -> Result<Vec<ScalarExpr>> {
    let mut entries = Vec::with_capacity(triangle_len(n));
    match kind {
        MetricKind::EuclideanConstant(c) => {
            if c.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: c.n(),
                });
            }
            for i in 0..n {
                for j in i..n {
                    entries.push(ScalarExpr::Const(c.get(i, j)));
                }
            }
        }
        MetricKind::Conformal { base, profile } => {
            if base.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: base.n(),
                });
            }
            for i in 0..n {
                for j in i..n {
                    entries.push(ScalarExpr::Mul(vec![
                        ScalarExpr::Const(base.get(i, j)),
                        profile.clone(),
                    ]));
                }
            }
        }
        MetricKind::RoundSphere { radius } => {
            if n != 2 && n != 3 {
                return Err(Error::DimensionMismatch { expected: 2, got: n });
            }
            let r2 = ScalarExpr::Const(radius * radius);
            let sin0 = ScalarExpr::Powi(Box::new(ScalarExpr::Sin(Box::new(ScalarExpr::Var(0)))), 2);
            for i in 0..n {
                for j in i..n {
                    let e = if i != j {
                        ScalarExpr::Const(0.0)
                    } else if i == 0 {
                        r2.clone()
                    } else if i == 1 {
                        ScalarExpr::Mul(vec![r2.clone(), sin0.clone()])
                    } else {
                        let sin1 = ScalarExpr::Powi(
                            Box::new(ScalarExpr::Sin(Box::new(ScalarExpr::Var(1)))),
                            2,
                        );
                        ScalarExpr::Mul(vec![r2.clone(), sin0.clone(), sin1])
                    };
                    entries.push(e);
                }
            }
        }
        MetricKind::PolynomialSpd { seed, degree } => {
            if *degree > 3 {
                return Err(Error::ConfigInvalid(
                    "polynomial_spd degree must be at most 3".into(),
                ));
            }
            let a = trig_polynomial_matrix(*seed, *degree, n);
            for i in 0..n {
                for j in i..n {
                    let mut terms: Vec<ScalarExpr> = (0..n)
                        .map(|k| ScalarExpr::Mul(vec![a[k][i].clone(), a[k][j].clone()]))
                        .collect();
                    if i == j {
                        terms.push(ScalarExpr::Const(0.5));
                    }
                    entries.push(ScalarExpr::Add(terms));
                }
            }
        }
        MetricKind::Soliton {
            base,
            amplitude,
            direction,
            profile,
        } => {
            if base.n() != n || amplitude.n() != n || direction.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: base.n().min(amplitude.n()).min(direction.len()),
                });
            }
            let ridge = profile.ridge(direction, 0.0);
            for i in 0..n {
                for j in i..n {
                    entries.push(ScalarExpr::Add(vec![
                        ScalarExpr::Const(base.get(i, j)),
                        ScalarExpr::Mul(vec![ScalarExpr::Const(amplitude.get(i, j)), ridge.clone()]),
                    ]));
                }
            }
        }
        MetricKind::NormalSeries { quadratic } => {
            if quadratic.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: quadratic.n(),
                });
            }
            // g_jl = δ_jl + Σ_ik Q(i,k,j,l) x^i x^k
            for j in 0..n {
                for l in j..n {
                    let mut terms = vec![ScalarExpr::Const(if j == l { 1.0 } else { 0.0 })];
                    for i in 0..n {
                        for k in 0..n {
                            let q = quadratic.get(i, k, j, l);
                            if q != 0.0 {
                                terms.push(ScalarExpr::Mul(vec![
                                    ScalarExpr::Const(q),
                                    ScalarExpr::Var(i),
                                    ScalarExpr::Var(k),
                                ]));
                            }
                        }
                    }
                    entries.push(ScalarExpr::Add(terms));
                }
            }
        }
        MetricKind::Custom { entries: given } => {
            if given.len() != triangle_len(n) {
                return Err(Error::ConfigInvalid(format!(
                    "custom metric needs {} upper-triangle entries, got {}",
                    triangle_len(n),
                    given.len()
                )));
            }
            entries = given.clone();
        }
    }
    Ok(entries)
}

/// Entries of the seeded matrix A(x): a_ij = c0 + Σ_t amp·sin/cos(k·x + phase).
fn trig_polynomial_matrix(seed: u64, degree: u32, n: usize) -> Vec<Vec<ScalarExpr>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = Vec::with_capacity(n);
        for _ in 0..n {
            let mut terms = vec![ScalarExpr::Const(rng.gen_range(-0.8..0.8))];
            for _ in 0..degree {
                let amp = rng.gen_range(-0.5..0.5) / (degree.max(1) as f64);
                let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                let arg = ScalarExpr::affine(&dir, phase);
                let osc = if rng.gen_bool(0.5) {
                    ScalarExpr::Sin(Box::new(arg))
                } else {
                    ScalarExpr::Cos(Box::new(arg))
                };
                terms.push(ScalarExpr::Mul(vec![ScalarExpr::Const(amp), osc]));
            }
            row.push(ScalarExpr::Add(terms));
        }
        rows.push(row);
    }
    rows
}

/// Evaluable connection field.
#[derive(Debug, Clone)]
pub struct ConnectionField {
    n: usize,
    chart: ChartBox,
    kind: ConnectionImpl,
}

#[derive(Debug, Clone)]
enum ConnectionImpl {
    Tabulated(Tensor3),
    Soliton { coeff: Tensor3, shift: f64 },
    LeviCivita(MetricField),
}

impl ConnectionField {
    pub fn compile(kind: &ConnectionKind, chart: &ChartBox) -> Result<ConnectionField> {
        let n = chart.n();
        let imp = match kind {
            ConnectionKind::Tabulated(c) => {
                if c.n() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: c.n(),
                    });
                }
                ConnectionImpl::Tabulated(c.clone())
            }
            ConnectionKind::SolitonFamily { coeff, shift } => {
                if coeff.n() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: coeff.n(),
                    });
                }
                ConnectionImpl::Soliton {
                    coeff: coeff.clone(),
                    shift: *shift,
                }
            }
            ConnectionKind::LeviCivita(mk) => {
                ConnectionImpl::LeviCivita(MetricField::compile(mk, chart)?)
            }
        };
        Ok(ConnectionField {
            n,
            chart: chart.clone(),
            kind: imp,
        })
    }

    pub fn from_spec(spec: &FieldSpec) -> Result<ConnectionField> {
        match &spec.kind {
            FieldKind::Connection(kind) => Self::compile(kind, &spec.chart),
            FieldKind::Metric(kind) => Self::compile(
                &ConnectionKind::LeviCivita(Box::new(kind.clone())),
                &spec.chart,
            ),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn chart(&self) -> &ChartBox {
        &self.chart
    }

    pub fn jet1(&self, x: &[f64]) -> Result<ConnectionJet1> {
        if !self.chart.contains(x, 0.0) {
            return Err(Error::OutOfDomain { point: x.to_vec() });
        }
        let n = self.n;
        match &self.kind {
            ConnectionImpl::Tabulated(c) => Ok(ConnectionJet1 {
                x: x.to_vec(),
                gamma: c.clone(),
                dgamma: Tensor4::zeros(n),
            }),
            ConnectionImpl::Soliton { coeff, shift } => {
                let s: f64 = x.iter().sum::<f64>() + shift;
                if s.abs() < 1e-9 {
                    return Err(Error::OutOfDomain { point: x.to_vec() });
                }
                let f = -1.0 / s;
                let df = 1.0 / (s * s);
                let mut gamma = Tensor3::zeros(n);
                let mut dgamma = Tensor4::zeros(n);
                for l in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            let c = coeff.get(l, i, j);
                            gamma.set(l, i, j, c * f);
                            for p in 0..n {
                                dgamma.set(p, l, i, j, c * df);
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
            ConnectionImpl::LeviCivita(metric) => {
                let jet = metric.jet2(x)?;
                crate::curvature::christoffel(&jet)
            }
        }
    }
}

/// Constants c^i_jk = -u^i (all j,k) with Σ u = 1 solve the quadratic
/// compatibility condition of the reciprocal-affine connection family; the
/// resulting field Γ^i_jk = u^i/(x¹+...+x^n + shift) satisfies the
/// first Riccati system.
pub fn soliton_plus_coefficients(weights: &[f64]) -> Result<Tensor3> {
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::ConfigInvalid(
            "soliton weights must sum to one".into(),
        ));
    }
    let mut c = Tensor3::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                c.set(i, j, k, -weights[i]);
            }
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn euclidean_constant_jets_vanish() {
        let chart = ChartBox::unit(3, 4);
        let g0 = SquareMatrix::from_fn(3, |i, j| if i == j { 2.0 } else { 0.3 });
        let f = MetricField::compile(&MetricKind::EuclideanConstant(g0.clone()), &chart).unwrap();
        let jet = f.jet2(&[0.5, 0.5, 0.5]).unwrap();
        assert!(jet.g.sub(&g0).max_abs() < 1e-15);
        assert!(jet.dg.max_abs() < 1e-15);
        assert!(jet.ddg.max_abs() < 1e-15);
    }

    #[test]
    fn conformal_quadratic_profile() {
        // g = (1 + x1²)·δ on a 2d box; at (1, 0): g = 2δ and ∂₁g₁₁ = 2.
        let chart = ChartBox::new(vec![-2.0, -2.0], vec![2.0, 2.0], vec![8, 8]).unwrap();
        let profile = crate::scalar::parse_expr("1 + x1^2", 2).unwrap();
        let f = MetricField::compile(
            &MetricKind::Conformal {
                base: SquareMatrix::identity(2),
                profile,
            },
            &chart,
        )
        .unwrap();
        let jet = f.jet2(&[1.0, 0.0]).unwrap();
        assert!(close(jet.g.get(0, 0), 2.0, 1e-14));
        assert!(close(jet.g.get(1, 1), 2.0, 1e-14));
        assert!(close(jet.dg.get(0, 0, 0), 2.0, 1e-14));
        assert!(close(jet.dg.get(1, 0, 0), 0.0, 1e-14));
    }

    #[test]
    fn round_sphere_jet() {
        let spec = FieldSpec::round_sphere(1.0, 2, 8).unwrap();
        let f = MetricField::from_spec(&spec).unwrap();
        let theta = std::f64::consts::FRAC_PI_2;
        let jet = f.jet2(&[theta, 0.3]).unwrap();
        assert!(close(jet.g.get(0, 0), 1.0, 1e-14));
        assert!(close(jet.g.get(1, 1), 1.0, 1e-14));
        // ∂_θ g_φφ = 2 sinθ cosθ = 0 at the equator.
        assert!(jet.dg.get(0, 1, 1).abs() < 1e-14);
    }

    #[test]
    fn fd_jets_converge_quadratically() {
        let chart = ChartBox::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![8, 8]).unwrap();
        let f = MetricField::from_spec(&random_spd_metric(11, 2, &chart)).unwrap();
        let x = [0.4, 0.6];
        let exact = f.jet2(&x).unwrap();
        let err = |fd: &FdConfig| {
            let j = f.jet2_fd(&x, fd).unwrap();
            let e1 = j.dg.sub(&exact.dg).max_abs();
            let e2 = j.ddg.sub(&exact.ddg).max_abs();
            (e1, e2)
        };
        let coarse = FdConfig { h1: 2e-3, h2: 2e-2 };
        let fine = FdConfig { h1: 1e-3, h2: 1e-2 };
        let (c1, c2) = err(&coarse);
        let (f1, f2) = err(&fine);
        assert!(c1 / f1 >= 3.5, "first-derivative error ratio {}", c1 / f1);
        assert!(c2 / f2 >= 3.5, "second-derivative error ratio {}", c2 / f2);
    }

    #[test]
    fn random_spd_is_deterministic_and_positive() {
        let chart = ChartBox::unit(3, 6);
        let s1 = random_spd_metric(5, 2, &chart);
        let s2 = random_spd_metric(5, 2, &chart);
        assert_eq!(s1, s2);
        let f = MetricField::from_spec(&s1).unwrap();
        let g = f.value(&[0.37, 0.81, 0.12]).unwrap();
        assert!(g.is_positive_definite());
        assert!(g.is_symmetric());
    }

    #[test]
    fn random_spd_degree_zero_is_constant() {
        let chart = ChartBox::unit(2, 4);
        let f = MetricField::from_spec(&random_spd_metric(0, 0, &chart)).unwrap();
        let a = f.value(&[0.1, 0.2]).unwrap();
        let b = f.value(&[0.9, 0.7]).unwrap();
        assert!(a.sub(&b).max_abs() < 1e-15);
    }

    #[test]
    fn out_of_domain_is_reported() {
        let chart = ChartBox::unit(2, 4);
        let f = MetricField::from_spec(&random_spd_metric(1, 1, &chart)).unwrap();
        assert!(matches!(
            f.value(&[1.5, 0.5]),
            Err(Error::OutOfDomain { .. })
        ));
        let fd = FdConfig { h1: 0.02, h2: 0.05 };
        assert!(matches!(
            f.jet2_fd(&[0.05, 0.5], &fd),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn tabulated_connection_is_constant() {
        let chart = ChartBox::unit(2, 4);
        let mut c = Tensor3::zeros(2);
        c.set(0, 1, 1, 2.5);
        let f = ConnectionField::compile(&ConnectionKind::Tabulated(c.clone()), &chart).unwrap();
        let jet = f.jet1(&[0.3, 0.3]).unwrap();
        assert!(jet.gamma.sub(&c).max_abs() < 1e-15);
        assert!(jet.dgamma.max_abs() < 1e-15);
    }

    #[test]
    fn soliton_connection_1d() {
        // c¹₁₁ = −1 gives Γ(x) = 1/(x + shift) and dΓ = −1/(x + shift)².
        let chart = ChartBox::new(vec![0.0], vec![1.0], vec![4]).unwrap();
        let mut c = Tensor3::zeros(1);
        c.set(0, 0, 0, -1.0);
        let f = ConnectionField::compile(
            &ConnectionKind::SolitonFamily { coeff: c, shift: 2.0 },
            &chart,
        )
        .unwrap();
        let jet = f.jet1(&[0.5]).unwrap();
        let s = 0.5 + 2.0;
        assert!(close(jet.gamma.get(0, 0, 0), 1.0 / s, 1e-14));
        assert!(close(jet.dgamma.get(0, 0, 0, 0), -1.0 / (s * s), 1e-14));
    }

    #[test]
    fn soliton_plus_weights_must_sum_to_one() {
        assert!(soliton_plus_coefficients(&[0.5, 0.5]).is_ok());
        assert!(soliton_plus_coefficients(&[0.5, 0.6]).is_err());
    }
}
