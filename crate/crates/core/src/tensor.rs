//! Dense multi-index tensor values at a point, metric contractions and norms,
//! and the index operators P, T and the trace 𝒫 used by the flatness systems.
//!
//! Index layout is fixed once and for all:
//! - `Tensor3` holds connection coefficients Γ^i_jk as `[i][j][k]`, upper index first;
//! - `MixedCurvature` holds R^l_ijk as `[l][i][j][k]` (antisymmetric pair last);
//! - `LoweredCurvature` holds R_ijkl as `[i][j][k][l]`, related to the mixed tensor
//!   by lowering into the first slot: R_ijkl = g_im R^m_jkl.

use crate::error::{Error, Result};

/// Maximum chart dimension supported by the engine.
pub const MAX_DIM: usize = 6;

/// Chart dimension, restricted to desk scale 1..=6.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dim(usize);

impl Dim {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_DIM {
            return Err(Error::DimensionMismatch {
                expected: MAX_DIM,
                got: n,
            });
        }
        Ok(Dim(n))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// Dense n×n matrix of reals: a metric g_ij, its inverse g^ij, a Ricci tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, c: f64) -> Self {
        SquareMatrix {
            n: self.n,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    pub fn add(&self, other: &SquareMatrix) -> Self {
        SquareMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &SquareMatrix) -> Self {
        SquareMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn matmul(&self, other: &SquareMatrix) -> Self {
        let n = self.n;
        SquareMatrix::from_fn(n, |i, j| (0..n).map(|k| self.get(i, k) * other.get(k, j)).sum())
    }

    /// Symmetry defect max |A_ij - A_ji|.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Scale-relative symmetry check: |A_ij - A_ji| <= 1e-10 · max|A|.
    pub fn is_symmetric(&self) -> bool {
        self.asymmetry() <= 1e-10 * self.max_abs().max(1.0)
    }

    /// Leading principal minors det(A[..k][..k]) for k = 1..=n, by Gaussian
    /// elimination without pivoting (well defined for the SPD test).
    pub fn leading_principal_minors(&self) -> Vec<f64> {
        let n = self.n;
        let mut minors = Vec::with_capacity(n);
        for k in 1..=n {
            let mut a = vec![0.0; k * k];
            for i in 0..k {
                for j in 0..k {
                    a[i * k + j] = self.get(i, j);
                }
            }
            let mut det = 1.0;
            for col in 0..k {
                let pivot = a[col * k + col];
                det *= pivot;
                if pivot == 0.0 {
                    break;
                }
                for row in col + 1..k {
                    let f = a[row * k + col] / pivot;
                    for j in col..k {
                        a[row * k + j] -= f * a[col * k + j];
                    }
                }
            }
            minors.push(det);
        }
        minors
    }

    /// Positive definiteness by the leading-principal-minor criterion.
    pub fn is_positive_definite(&self) -> bool {
        self.leading_principal_minors().iter().all(|&m| m > 0.0)
    }

    pub fn det(&self) -> f64 {
        *self
            .leading_principal_minors()
            .last()
            .expect("dimension >= 1")
    }

    /// Inverse of a symmetric positive-definite matrix.
    ///
    /// Checks the leading principal minors first and refuses indefinite input.
    pub fn invert_spd(&self) -> Result<SquareMatrix> {
        let n = self.n;
        for (k, m) in self.leading_principal_minors().iter().enumerate() {
            if *m <= 0.0 {
                return Err(Error::NotPositiveDefinite {
                    order: k + 1,
                    value: *m,
                });
            }
        }
        // Gauss-Jordan with partial pivoting on [A | I].
        let mut a = vec![0.0; n * 2 * n];
        let w = 2 * n;
        for i in 0..n {
            for j in 0..n {
                a[i * w + j] = self.get(i, j);
            }
            a[i * w + n + i] = 1.0;
        }
        for col in 0..n {
            let mut pivot_row = col;
            for row in col + 1..n {
                if a[row * w + col].abs() > a[pivot_row * w + col].abs() {
                    pivot_row = row;
                }
            }
            if pivot_row != col {
                for j in 0..w {
                    a.swap(col * w + j, pivot_row * w + j);
                }
            }
            let pivot = a[col * w + col];
            if pivot == 0.0 {
                return Err(Error::NotPositiveDefinite {
                    order: col + 1,
                    value: 0.0,
                });
            }
            let inv = 1.0 / pivot;
            for j in 0..w {
                a[col * w + j] *= inv;
            }
            for row in 0..n {
                if row != col {
                    let f = a[row * w + col];
                    if f != 0.0 {
                        for j in 0..w {
                            a[row * w + j] -= f * a[col * w + j];
                        }
                    }
                }
            }
        }
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, a[i * w + n + j]);
            }
        }
        Ok(out)
    }
}

/// Dense n³ tensor, used for connection coefficients Γ^i_jk stored `[i][j][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i * self.n + j) * self.n + k] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i * self.n + j) * self.n + k] += v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, c: f64) -> Self {
        Tensor3 {
            n: self.n,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    pub fn add(&self, other: &Tensor3) -> Self {
        Tensor3 {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Tensor3) -> Self {
        Tensor3 {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Defect of the lower-slot symmetry Γ^i_jk = Γ^i_kj.
    pub fn lower_asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = worst.max((self.get(i, j, k) - self.get(i, k, j)).abs());
                }
            }
        }
        worst
    }
}

/// Dense n⁴ tensor with generic index semantics.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Tensor4 {
            n,
            data: vec![0.0; n * n * n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.data[((a * self.n + b) * self.n + c) * self.n + d]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, d: usize, v: f64) {
        self.data[((a * self.n + b) * self.n + c) * self.n + d] = v;
    }

    #[inline]
    pub fn add_to(&mut self, a: usize, b: usize, c: usize, d: usize, v: f64) {
        self.data[((a * self.n + b) * self.n + c) * self.n + d] += v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, c: f64) -> Self {
        Tensor4 {
            n: self.n,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    pub fn sub(&self, other: &Tensor4) -> Self {
        Tensor4 {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Dense n⁵ tensor, used for first partials ∂_m R^l_ijk stored `[m][l][i][j][k]`.
#[derive(Debug, Clone)]
pub struct Tensor5 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor5 {
    pub fn zeros(n: usize) -> Self {
        Tensor5 {
            n,
            data: vec![0.0; n * n * n * n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize, e: usize) -> f64 {
        self.data[(((a * self.n + b) * self.n + c) * self.n + d) * self.n + e]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, d: usize, e: usize, v: f64) {
        self.data[(((a * self.n + b) * self.n + c) * self.n + d) * self.n + e] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Mixed curvature R^l_ijk stored `[l][i][j][k]`, antisymmetric in (j,k).
#[derive(Debug, Clone, PartialEq)]
pub struct MixedCurvature(pub Tensor4);

impl MixedCurvature {
    pub fn zeros(n: usize) -> Self {
        MixedCurvature(Tensor4::zeros(n))
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    #[inline]
    pub fn get(&self, l: usize, i: usize, j: usize, k: usize) -> f64 {
        self.0.get(l, i, j, k)
    }

    #[inline]
    pub fn set(&mut self, l: usize, i: usize, j: usize, k: usize, v: f64) {
        self.0.set(l, i, j, k, v);
    }

    pub fn max_abs(&self) -> f64 {
        self.0.max_abs()
    }

    /// Defect of R^l_ijk + R^l_ikj = 0.
    pub fn antisymmetry_defect(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        worst = worst.max((self.get(l, i, j, k) + self.get(l, i, k, j)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Defect of the first Bianchi identity R^l_ijk + R^l_jki + R^l_kij = 0.
    pub fn first_bianchi_defect(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let cyc =
                            self.get(l, i, j, k) + self.get(l, j, k, i) + self.get(l, k, i, j);
                        worst = worst.max(cyc.abs());
                    }
                }
            }
        }
        worst
    }
}

/// Lowered curvature R_ijkl stored `[i][j][k][l]`; R_ijkl = g_im R^m_jkl.
#[derive(Debug, Clone, PartialEq)]
pub struct LoweredCurvature(pub Tensor4);

impl LoweredCurvature {
    pub fn zeros(n: usize) -> Self {
        LoweredCurvature(Tensor4::zeros(n))
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.0.get(i, j, k, l)
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        self.0.set(i, j, k, l, v);
    }

    pub fn max_abs(&self) -> f64 {
        self.0.max_abs()
    }

    /// Worst defect among R_ijkl = -R_jikl, R_ijkl = -R_ijlk and R_ijkl = R_klij.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = self.get(i, j, k, l);
                        worst = worst.max((v + self.get(j, i, k, l)).abs());
                        worst = worst.max((v + self.get(i, j, l, k)).abs());
                        worst = worst.max((v - self.get(k, l, i, j)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Defect of the first Bianchi identity R_ijkl + R_iklj + R_iljk = 0.
    pub fn first_bianchi_defect(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let cyc =
                            self.get(i, j, k, l) + self.get(i, k, l, j) + self.get(i, l, j, k);
                        worst = worst.max(cyc.abs());
                    }
                }
            }
        }
        worst
    }
}

fn check_same_n(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!(
            "{what}: dimensions {a} and {b} differ"
        )));
    }
    Ok(())
}

/// Squared norm of a connection, ‖∇‖² = g_ip g^jq g^kr Γ^i_jk Γ^p_qr.
pub fn connection_norm_sq(
    g: &SquareMatrix,
    g_inv: &SquareMatrix,
    gamma: &Tensor3,
) -> Result<f64> {
    check_same_n(g.n(), gamma.n(), "connection_norm_sq")?;
    check_same_n(g.n(), g_inv.n(), "connection_norm_sq")?;
    let n = g.n();
    let mut total = 0.0;
    for i in 0..n {
        for p in 0..n {
            let gip = g.get(i, p);
            if gip == 0.0 {
                continue;
            }
            for j in 0..n {
                for q in 0..n {
                    let gjq = g_inv.get(j, q);
                    if gjq == 0.0 {
                        continue;
                    }
                    for k in 0..n {
                        for r in 0..n {
                            total += gip
                                * gjq
                                * g_inv.get(k, r)
                                * gamma.get(i, j, k)
                                * gamma.get(p, q, r);
                        }
                    }
                }
            }
        }
    }
    Ok(total)
}

/// ‖Riem‖² from the lowered tensor: g^ip g^jq g^kr g^ls R_ijkl R_pqrs.
pub fn riemann_norm_sq_lower(g_inv: &SquareMatrix, r: &LoweredCurvature) -> Result<f64> {
    check_same_n(g_inv.n(), r.n(), "riemann_norm_sq_lower")?;
    let n = g_inv.n();
    let raised = raise_all(g_inv, r);
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    total += raised.get(i, j, k, l) * r.get(i, j, k, l);
                }
            }
        }
    }
    Ok(total)
}

/// ‖Riem‖² from the mixed tensor: g_ip g^jq g^kr g^ls R^i_jkl R^p_qrs.
pub fn riemann_norm_sq_mixed(
    g: &SquareMatrix,
    g_inv: &SquareMatrix,
    r: &MixedCurvature,
) -> Result<f64> {
    check_same_n(g.n(), r.n(), "riemann_norm_sq_mixed")?;
    check_same_n(g.n(), g_inv.n(), "riemann_norm_sq_mixed")?;
    let n = g.n();
    // Contract one factor fully, then pair with the other.
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut contracted = 0.0;
                    for p in 0..n {
                        for q in 0..n {
                            let c = g.get(i, p) * g_inv.get(j, q);
                            if c == 0.0 {
                                continue;
                            }
                            for rr in 0..n {
                                for s in 0..n {
                                    contracted += c
                                        * g_inv.get(k, rr)
                                        * g_inv.get(l, s)
                                        * r.get(p, q, rr, s);
                                }
                            }
                        }
                    }
                    total += contracted * r.get(i, j, k, l);
                }
            }
        }
    }
    Ok(total)
}

/// ‖Ric‖² = g^ik g^jl R_ij R_kl.
pub fn ricci_norm_sq(g_inv: &SquareMatrix, ric: &SquareMatrix) -> Result<f64> {
    check_same_n(g_inv.n(), ric.n(), "ricci_norm_sq")?;
    let n = g_inv.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    total += g_inv.get(i, k) * g_inv.get(j, l) * ric.get(i, j) * ric.get(k, l);
                }
            }
        }
    }
    Ok(total)
}

/// Raise all four indices of a lowered curvature tensor with g^ij.
pub fn raise_all(g_inv: &SquareMatrix, r: &LoweredCurvature) -> Tensor4 {
    let n = g_inv.n();
    let mut out = Tensor4::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut sum = 0.0;
                    for p in 0..n {
                        for q in 0..n {
                            let c = g_inv.get(i, p) * g_inv.get(j, q);
                            if c == 0.0 {
                                continue;
                            }
                            for rr in 0..n {
                                for s in 0..n {
                                    sum += c
                                        * g_inv.get(k, rr)
                                        * g_inv.get(l, s)
                                        * r.get(p, q, rr, s);
                                }
                            }
                        }
                    }
                    out.set(i, j, k, l, sum);
                }
            }
        }
    }
    out
}

/// Lower the upper index of R^m_jkl into the first slot: R_ijkl = g_im R^m_jkl.
pub fn lower_first_index(g: &SquareMatrix, r: &MixedCurvature) -> LoweredCurvature {
    let n = g.n();
    let mut out = LoweredCurvature::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut sum = 0.0;
                    for m in 0..n {
                        sum += g.get(i, m) * r.get(m, j, k, l);
                    }
                    out.set(i, j, k, l, sum);
                }
            }
        }
    }
    out
}

/// The projection P: (PX)^jk = ½(X^jk − X^kj); P² = P, spectrum {0, 1}.
pub fn apply_p(x: &SquareMatrix) -> SquareMatrix {
    SquareMatrix::from_fn(x.n(), |j, k| 0.5 * (x.get(j, k) - x.get(k, j)))
}

/// The operator T acting on 4-index arrays: antisymmetrization over (i,j)
/// and (k,l) normalized so that T∘T = 2T, spectrum {0, 2}.
pub fn apply_t4(x: &Tensor4) -> Tensor4 {
    let n = x.n();
    let mut out = Tensor4::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let v = 0.5
                        * (x.get(i, j, k, l) - x.get(j, i, k, l) - x.get(i, j, l, k)
                            + x.get(j, i, l, k));
                    out.set(i, j, k, l, v);
                }
            }
        }
    }
    out
}

/// The flatness PDE systems whose equation/unknown counts the census reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlatnessSystem {
    /// Γ^i_jk = 0 as first-order equations on the metric.
    ConnFlat1,
    /// R^l_ijk = 0 with the connection as unknown.
    CurvFlatConn,
    /// R_ijkl = 0 with the metric as unknown.
    CurvFlatMetric,
    /// Ric = 0 with the connection as unknown.
    RicciFlatConn,
    /// Ric = 0 with the metric as unknown.
    RicciFlatMetric,
    /// Scalar curvature = 0 with the metric as unknown.
    ScalarFlat,
}

impl FlatnessSystem {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "conn_flat" => FlatnessSystem::ConnFlat1,
            "curv_flat_conn" => FlatnessSystem::CurvFlatConn,
            "curv_flat_metric" => FlatnessSystem::CurvFlatMetric,
            "ricci_flat_conn" => FlatnessSystem::RicciFlatConn,
            "ricci_flat_metric" => FlatnessSystem::RicciFlatMetric,
            "scalar_flat" => FlatnessSystem::ScalarFlat,
            other => {
                return Err(Error::ConfigInvalid(format!(
                    "unknown flatness system '{other}'"
                )))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            FlatnessSystem::ConnFlat1 => "conn_flat",
            FlatnessSystem::CurvFlatConn => "curv_flat_conn",
            FlatnessSystem::CurvFlatMetric => "curv_flat_metric",
            FlatnessSystem::RicciFlatConn => "ricci_flat_conn",
            FlatnessSystem::RicciFlatMetric => "ricci_flat_metric",
            FlatnessSystem::ScalarFlat => "scalar_flat",
        }
    }
}

/// Over/under/determined classification of a PDE system by count comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemClass {
    Overdetermined,
    Underdetermined,
    Determined,
}

impl SystemClass {
    pub fn name(self) -> &'static str {
        match self {
            SystemClass::Overdetermined => "over",
            SystemClass::Underdetermined => "under",
            SystemClass::Determined => "determined",
        }
    }
}

/// Equation and unknown counts of a flatness system on an n-dimensional chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Census {
    pub equations: u64,
    pub unknowns: u64,
    pub class: SystemClass,
}

/// Closed-form equation/unknown counts for each flatness system.
///
/// Distinct equations:
/// - Γ = 0 on the metric: n²(n+1)/2, unknowns n(n+1)/2;
/// - curvature flatness in Γ: n²(n²−1)/12, unknowns n²(n+1)/2;
/// - curvature flatness in g: n²(n²−1)/12, unknowns n(n+1)/2;
/// - Ricci flatness in Γ: n(n+1)/2, unknowns n²(n+1)/2;
/// - Ricci flatness in g: n(n+1)/2 each way;
/// - scalar flatness: one equation, unknowns n(n+1)/2.
pub fn system_census(system: FlatnessSystem, n: usize) -> Census {
    let n = n as u64;
    let sym = n * (n + 1) / 2;
    let conn_unknowns = n * n * (n + 1) / 2;
    let curv_eqs = n * n * (n * n - 1) / 12;
    let (equations, unknowns) = match system {
        FlatnessSystem::ConnFlat1 => (n * sym, sym),
        FlatnessSystem::CurvFlatConn => (curv_eqs, conn_unknowns),
        FlatnessSystem::CurvFlatMetric => (curv_eqs, sym),
        FlatnessSystem::RicciFlatConn => (sym, conn_unknowns),
        FlatnessSystem::RicciFlatMetric => (sym, sym),
        FlatnessSystem::ScalarFlat => (1, sym),
    };
    let class = if equations > unknowns {
        SystemClass::Overdetermined
    } else if equations < unknowns {
        SystemClass::Underdetermined
    } else {
        SystemClass::Determined
    };
    Census {
        equations,
        unknowns,
        class,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> SquareMatrix {
        SquareMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> SquareMatrix {
        let a = random_matrix(n, rng);
        let mut g = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += a.get(k, i) * a.get(k, j);
                }
                g.set(i, j, s + if i == j { 0.5 } else { 0.0 });
            }
        }
        g
    }

    #[test]
    fn invert_identity() {
        let id = SquareMatrix::identity(3);
        let inv = id.invert_spd().unwrap();
        assert!(inv.sub(&id).max_abs() < 1e-15);
    }

    #[test]
    fn invert_diagonal() {
        let g = SquareMatrix::diag(&[4.0, 1.0]);
        let inv = g.invert_spd().unwrap();
        assert!((inv.get(0, 0) - 0.25).abs() < 1e-15);
        assert!((inv.get(1, 1) - 1.0).abs() < 1e-15);
        assert!(inv.get(0, 1).abs() < 1e-15);
    }

    #[test]
    fn invert_random_spd_seed7() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_spd(3, &mut rng);
        let inv = g.invert_spd().unwrap();
        let prod = g.matmul(&inv);
        assert!(prod.sub(&SquareMatrix::identity(3)).max_abs() < 1e-12);
    }

    #[test]
    fn invert_rejects_indefinite() {
        let g = SquareMatrix::diag(&[1.0, -1.0]);
        match g.invert_spd() {
            Err(Error::NotPositiveDefinite { order, .. }) => assert_eq!(order, 2),
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn connection_norm_zero_connection() {
        let g = SquareMatrix::identity(3);
        let inv = g.invert_spd().unwrap();
        let gamma = Tensor3::zeros(3);
        assert_eq!(connection_norm_sq(&g, &inv, &gamma).unwrap(), 0.0);
    }

    #[test]
    fn connection_norm_single_term() {
        // n=1, g=(1), Γ¹₁₁ = 2 has squared norm 4.
        let g = SquareMatrix::identity(1);
        let inv = g.clone();
        let mut gamma = Tensor3::zeros(1);
        gamma.set(0, 0, 0, 2.0);
        assert!((connection_norm_sq(&g, &inv, &gamma).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn connection_norm_sum_of_squares() {
        // n=2, g=I, Γ¹₁₁ = 1, Γ²₂₂ = 3 gives 1 + 9 = 10.
        let g = SquareMatrix::identity(2);
        let inv = g.clone();
        let mut gamma = Tensor3::zeros(2);
        gamma.set(0, 0, 0, 1.0);
        gamma.set(1, 1, 1, 3.0);
        assert!((connection_norm_sq(&g, &inv, &gamma).unwrap() - 10.0).abs() < 1e-15);
    }

    #[test]
    fn connection_norm_shape_mismatch() {
        let g = SquareMatrix::identity(2);
        let inv = g.clone();
        let gamma = Tensor3::zeros(3);
        assert!(matches!(
            connection_norm_sq(&g, &inv, &gamma),
            Err(Error::ShapeMismatch(_))
        ));
    }

    fn fill_symmetry_mates(r: &mut LoweredCurvature, i: usize, j: usize, k: usize, l: usize, v: f64) {
        r.set(i, j, k, l, v);
        r.set(j, i, k, l, -v);
        r.set(i, j, l, k, -v);
        r.set(j, i, l, k, v);
        r.set(k, l, i, j, v);
        r.set(l, k, i, j, -v);
        r.set(k, l, j, i, -v);
        r.set(l, k, j, i, v);
    }

    #[test]
    fn riemann_norm_constant_curvature_2d() {
        // n=2, g=I, R_1212 = K with mates filled: norm² = 4K².
        let k = 0.7;
        let mut r = LoweredCurvature::zeros(2);
        fill_symmetry_mates(&mut r, 0, 1, 0, 1, k);
        let g_inv = SquareMatrix::identity(2);
        let norm = riemann_norm_sq_lower(&g_inv, &r).unwrap();
        assert!((norm - 4.0 * k * k).abs() < 1e-14);
    }

    #[test]
    fn ricci_norm_diag() {
        let g_inv = SquareMatrix::identity(2);
        let ric = SquareMatrix::diag(&[1.0, 2.0]);
        assert!((ricci_norm_sq(&g_inv, &ric).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn p_annihilates_symmetric_and_fixes_antisymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(4, &mut rng);
        let sym = SquareMatrix::from_fn(4, |i, j| 0.5 * (a.get(i, j) + a.get(j, i)));
        let anti = SquareMatrix::from_fn(4, |i, j| 0.5 * (a.get(i, j) - a.get(j, i)));
        assert!(apply_p(&sym).max_abs() < 1e-15);
        assert!(apply_p(&anti).sub(&anti).max_abs() < 1e-15);
    }

    #[test]
    fn p_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_matrix(4, &mut rng);
        let px = apply_p(&x);
        let ppx = apply_p(&px);
        assert!(ppx.sub(&px).max_abs() < 1e-14);
    }

    #[test]
    fn t4_spectrum() {
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = Tensor4::zeros(n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        x.set(a, b, c, d, rng.gen_range(-1.0..1.0));
                    }
                }
            }
        }
        // Symmetric in (i,j) is annihilated.
        let mut sym = Tensor4::zeros(n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        sym.set(a, b, c, d, x.get(a, b, c, d) + x.get(b, a, c, d));
                    }
                }
            }
        }
        assert!(apply_t4(&sym).max_abs() < 1e-14);
        // Doubly antisymmetric is scaled by exactly 2.
        let anti = apply_t4(&x);
        let t_anti = apply_t4(&anti);
        assert!(t_anti.sub(&anti.scale(2.0)).max_abs() < 1e-13);
        // T∘T = 2T on arbitrary input.
        let tx = apply_t4(&x);
        let ttx = apply_t4(&tx);
        assert!(ttx.sub(&tx.scale(2.0)).max_abs() < 1e-13);
    }

    #[test]
    fn census_curvature_flat_connection_n7() {
        let c = system_census(FlatnessSystem::CurvFlatConn, 7);
        assert_eq!(c.equations, 196);
        assert_eq!(c.unknowns, 196);
        assert_eq!(c.class, SystemClass::Determined);
    }

    #[test]
    fn census_curvature_flat_metric_n3() {
        let c = system_census(FlatnessSystem::CurvFlatMetric, 3);
        assert_eq!(c.equations, 6);
        assert_eq!(c.unknowns, 6);
        assert_eq!(c.class, SystemClass::Determined);
    }

    #[test]
    fn census_conn_flat_n1() {
        let c = system_census(FlatnessSystem::ConnFlat1, 1);
        assert_eq!(c.equations, 1);
        assert_eq!(c.unknowns, 1);
        assert_eq!(c.class, SystemClass::Determined);
    }

    #[test]
    fn census_classification_sentences() {
        for n in 1..=8 {
            let conn = system_census(FlatnessSystem::ConnFlat1, n);
            let expect = if n == 1 {
                SystemClass::Determined
            } else {
                SystemClass::Overdetermined
            };
            assert_eq!(conn.class, expect, "conn flat n={n}");

            let cf = system_census(FlatnessSystem::CurvFlatConn, n);
            let expect = match n {
                7 => SystemClass::Determined,
                x if x < 7 => SystemClass::Underdetermined,
                _ => SystemClass::Overdetermined,
            };
            assert_eq!(cf.class, expect, "curv flat conn n={n}");

            let cm = system_census(FlatnessSystem::CurvFlatMetric, n);
            let expect = match n {
                3 => SystemClass::Determined,
                x if x < 3 => SystemClass::Underdetermined,
                _ => SystemClass::Overdetermined,
            };
            assert_eq!(cm.class, expect, "curv flat metric n={n}");

            let rf = system_census(FlatnessSystem::RicciFlatConn, n);
            let expect = if n == 1 {
                SystemClass::Determined
            } else {
                SystemClass::Underdetermined
            };
            assert_eq!(rf.class, expect, "ricci flat conn n={n}");
        }
    }
}
