//! Plain nested key-value run configuration: one `path.to.key = value` per
//! line, `#` comments, flag overrides mirroring the config paths.

use flatlab_core::error::{Error, Result};
use flatlab_core::field::{
    ChartBox, ConnectionKind, FieldKind, FieldSpec, MetricKind, Profile,
};
use flatlab_core::scalar::parse_expr;
use flatlab_core::tensor::{FlatnessSystem, SquareMatrix, Tensor3};
use flatlab_core::variational::{DensityKind, FunctionalId, Gauge, Variable};
use std::collections::BTreeMap;

/// Raw parsed configuration: ordered key/value pairs with consumption
/// tracking so unknown keys can be rejected.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
    consumed: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig> {
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::ConfigInvalid(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::ConfigInvalid(format!("line {}: empty key", lineno + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(RawConfig {
            values,
            consumed: Default::default(),
        })
    }

    /// Apply `--path.to.key value` style overrides.
    pub fn apply_overrides(&mut self, overrides: &[(String, String)]) {
        for (k, v) in overrides {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let v = self.values.get(key).cloned();
        if v.is_some() {
            self.consumed.borrow_mut().insert(key.to_string());
        }
        v
    }

    pub fn require(&self, key: &str) -> Result<String> {
        self.get(key)
            .ok_or_else(|| Error::ConfigInvalid(format!("missing required key '{key}'")))
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::ConfigInvalid(format!("key '{key}': bad number '{v}'")))
            })
            .transpose()
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| Error::ConfigInvalid(format!("key '{key}': bad integer '{v}'")))
            })
            .transpose()
    }

    /// Reject keys nobody consumed.
    pub fn finish(&self) -> Result<()> {
        let consumed = self.consumed.borrow();
        for key in self.values.keys() {
            if !consumed.contains(key) {
                return Err(Error::ConfigInvalid(format!("unknown key '{key}'")));
            }
        }
        Ok(())
    }

    /// Canonical semantic lines: sorted key=value, excluding output paths
    /// (they do not affect results).
    pub fn semantic_lines(&self) -> Vec<String> {
        self.values
            .iter()
            .filter(|(k, _)| !k.starts_with("output."))
            .map(|(k, v)| format!("{k} = {v}"))
            .collect()
    }

    /// FNV-1a hash of the semantic configuration.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for line in self.semantic_lines() {
            for b in line.as_bytes() {
                h ^= *b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
            h ^= b'\n' as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}

fn parse_vec(key: &str, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::ConfigInvalid(format!("key '{key}': bad number '{t}'")))
        })
        .collect()
}

fn parse_usize_vec(key: &str, text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::ConfigInvalid(format!("key '{key}': bad integer '{t}'")))
        })
        .collect()
}

fn parse_matrix(key: &str, text: &str) -> Result<SquareMatrix> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|row| parse_vec(key, row))
        .collect::<Result<_>>()?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::ConfigInvalid(format!("key '{key}': matrix must be square")));
    }
    Ok(SquareMatrix::from_fn(n, |i, j| rows[i][j]))
}

/// Points as `x1,x2;y1,y2;...`.
pub fn parse_points(key: &str, text: &str, n: usize) -> Result<Vec<Vec<f64>>> {
    let points: Vec<Vec<f64>> = text
        .split(';')
        .map(|p| parse_vec(key, p))
        .collect::<Result<_>>()?;
    for p in &points {
        if p.len() != n {
            return Err(Error::ConfigInvalid(format!(
                "key '{key}': point has {} coordinates, chart has {n}",
                p.len()
            )));
        }
    }
    Ok(points)
}

pub fn chart_from(raw: &RawConfig, prefix: &str) -> Result<ChartBox> {
    let lower = parse_vec(
        &format!("{prefix}.box.lower"),
        &raw.require(&format!("{prefix}.box.lower"))?,
    )?;
    let upper = parse_vec(
        &format!("{prefix}.box.upper"),
        &raw.require(&format!("{prefix}.box.upper"))?,
    )?;
    let grid = parse_usize_vec(
        &format!("{prefix}.box.grid"),
        &raw.require(&format!("{prefix}.box.grid"))?,
    )?;
    ChartBox::new(lower, upper, grid)
}

fn profile_from(raw: &RawConfig, prefix: &str, n: usize) -> Result<Profile> {
    let kind = raw.require(&format!("{prefix}.profile.kind"))?;
    let p = |k: &str| raw.get_f64(&format!("{prefix}.profile.{k}"));
    let _ = n;
    Ok(match kind.as_str() {
        "affine" => Profile::Affine {
            c0: p("c0")?.unwrap_or(0.0),
            c1: p("c1")?.unwrap_or(1.0),
        },
        "quadratic" => Profile::Quadratic {
            c0: p("c0")?.unwrap_or(0.0),
            c1: p("c1")?.unwrap_or(0.0),
            c2: p("c2")?.unwrap_or(1.0),
        },
        "exp" => Profile::Exp {
            amp: p("amp")?.unwrap_or(1.0),
            rate: p("rate")?.unwrap_or(1.0),
        },
        "trig" => Profile::Trig {
            amp: p("amp")?.unwrap_or(1.0),
            freq: p("freq")?.unwrap_or(1.0),
            phase: p("phase")?.unwrap_or(0.0),
        },
        "recip_affine" => Profile::RecipAffine {
            amp: p("amp")?.unwrap_or(1.0),
            shift: p("shift")?.unwrap_or(1.0),
        },
        other => {
            return Err(Error::ConfigInvalid(format!(
                "unknown profile kind '{other}'"
            )))
        }
    })
}

/// Field specification under a key prefix (`field` or `connection`).
pub fn field_from(raw: &RawConfig, prefix: &str) -> Result<FieldSpec> {
    let chart = chart_from(raw, prefix)?;
    let n = chart.n();
    let kind = raw.require(&format!("{prefix}.kind"))?;
    let spec = match kind.as_str() {
        "euclidean" => {
            let base = match raw.get(&format!("{prefix}.base")) {
                Some(text) => parse_matrix(&format!("{prefix}.base"), &text)?,
                None => SquareMatrix::identity(n),
            };
            FieldSpec::metric(MetricKind::EuclideanConstant(base), chart)
        }
        "conformal" => {
            let base = match raw.get(&format!("{prefix}.base")) {
                Some(text) => parse_matrix(&format!("{prefix}.base"), &text)?,
                None => SquareMatrix::identity(n),
            };
            let profile = parse_expr(&raw.require(&format!("{prefix}.profile"))?, n)?;
            FieldSpec::metric(MetricKind::Conformal { base, profile }, chart)
        }
        "round_sphere" => {
            let radius = raw
                .get_f64(&format!("{prefix}.radius"))?
                .ok_or_else(|| Error::ConfigInvalid(format!("missing '{prefix}.radius'")))?;
            FieldSpec::metric(MetricKind::RoundSphere { radius }, chart)
        }
        "polynomial_spd" => {
            let seed = raw
                .get_usize(&format!("{prefix}.seed"))?
                .ok_or_else(|| Error::ConfigInvalid(format!("missing '{prefix}.seed'")))?
                as u64;
            let degree = raw.get_usize(&format!("{prefix}.degree"))?.unwrap_or(2) as u32;
            FieldSpec::metric(MetricKind::PolynomialSpd { seed, degree }, chart)
        }
        "soliton" => {
            let direction = parse_vec(
                &format!("{prefix}.direction"),
                &raw.require(&format!("{prefix}.direction"))?,
            )?;
            let base = match raw.get(&format!("{prefix}.base")) {
                Some(text) => parse_matrix(&format!("{prefix}.base"), &text)?,
                None => SquareMatrix::identity(n),
            };
            let amplitude = parse_matrix(
                &format!("{prefix}.amplitude"),
                &raw.require(&format!("{prefix}.amplitude"))?,
            )?;
            let profile = profile_from(raw, prefix, n)?;
            FieldSpec::metric(
                MetricKind::Soliton {
                    base,
                    amplitude,
                    direction,
                    profile,
                },
                chart,
            )
        }
        "custom" => {
            let text = raw.require(&format!("{prefix}.entries"))?;
            let entries = text
                .split(';')
                .map(|e| parse_expr(e.trim(), n))
                .collect::<Result<Vec<_>>>()?;
            FieldSpec::metric(MetricKind::Custom { entries }, chart)
        }
        "tabulated_connection" => {
            let coeff = parse_tensor3(raw, prefix, n)?;
            FieldSpec::connection(ConnectionKind::Tabulated(coeff), chart)
        }
        "soliton_connection" => {
            let shift = raw
                .get_f64(&format!("{prefix}.shift"))?
                .ok_or_else(|| Error::ConfigInvalid(format!("missing '{prefix}.shift'")))?;
            let coeff = if let Some(w) = raw.get(&format!("{prefix}.weights")) {
                flatlab_core::field::soliton_plus_coefficients(&parse_vec(
                    &format!("{prefix}.weights"),
                    &w,
                )?)?
            } else {
                parse_tensor3(raw, prefix, n)?
            };
            FieldSpec::connection(ConnectionKind::SolitonFamily { coeff, shift }, chart)
        }
        "levi_civita" => {
            return Err(Error::ConfigInvalid(
                "levi_civita connections are implied by metric fields; give the metric directly"
                    .into(),
            ))
        }
        other => return Err(Error::ConfigInvalid(format!("unknown field kind '{other}'"))),
    };
    Ok(spec)
}

/// Sparse tensor entries `i,j,k,value;...` with 1-based indices.
fn parse_tensor3(raw: &RawConfig, prefix: &str, n: usize) -> Result<Tensor3> {
    let key = format!("{prefix}.coeff");
    let text = raw.require(&key)?;
    let mut t = Tensor3::zeros(n);
    for item in text.split(';') {
        let parts: Vec<&str> = item.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::ConfigInvalid(format!(
                "key '{key}': expected 'i,j,k,value' entries"
            )));
        }
        let idx: Vec<usize> = parts[..3]
            .iter()
            .map(|p| {
                p.parse::<usize>()
                    .map_err(|_| Error::ConfigInvalid(format!("key '{key}': bad index '{p}'")))
            })
            .collect::<Result<_>>()?;
        let v: f64 = parts[3]
            .parse()
            .map_err(|_| Error::ConfigInvalid(format!("key '{key}': bad value '{}'", parts[3])))?;
        if idx.iter().any(|&i| i == 0 || i > n) {
            return Err(Error::ConfigInvalid(format!(
                "key '{key}': index out of range 1..={n}"
            )));
        }
        t.set(idx[0] - 1, idx[1] - 1, idx[2] - 1, v);
    }
    Ok(t)
}

pub fn functional_from(raw: &RawConfig) -> Result<FunctionalId> {
    let density = match raw.require("functional.density")?.as_str() {
        "conn_norm" => DensityKind::ConnNorm,
        "riemann_norm" => DensityKind::RiemannNorm,
        "ricci_norm" => DensityKind::RicciNorm,
        "scalar_square" => DensityKind::ScalarSquare,
        "total_scalar" => DensityKind::TotalScalar,
        other => {
            return Err(Error::ConfigInvalid(format!(
                "unknown functional density '{other}'"
            )))
        }
    };
    let variable = match raw.require("functional.variable")?.as_str() {
        "gamma" => Variable::Gamma,
        "metric" => Variable::Metric,
        "inverse_metric" => Variable::InverseMetric,
        other => {
            return Err(Error::ConfigInvalid(format!(
                "unknown functional variable '{other}'"
            )))
        }
    };
    let gauge = match raw.get("functional.gauge").as_deref() {
        None | Some("none") => Gauge::None,
        Some("harmonic") => Gauge::Harmonic,
        Some(other) => {
            return Err(Error::ConfigInvalid(format!(
                "unknown functional gauge '{other}'"
            )))
        }
    };
    FunctionalId::new(density, variable, gauge)
}

pub fn census_system_from(raw: &RawConfig) -> Result<FlatnessSystem> {
    FlatnessSystem::parse(&raw.require("census.system")?)
}

/// Default interior sample: the 3^n lattice at fractions 1/4, 1/2, 3/4.
pub fn default_sample(chart: &ChartBox) -> Vec<Vec<f64>> {
    let n = chart.n();
    let fractions = [0.25, 0.5, 0.75];
    let mut points = vec![vec![]];
    for d in 0..n {
        let mut next = Vec::with_capacity(points.len() * 3);
        for p in &points {
            for f in fractions {
                let mut q = p.clone();
                q.push(chart.lower[d] + f * (chart.upper[d] - chart.lower[d]));
                next.push(q);
            }
        }
        points = next;
    }
    points
}

/// Validate that a field spec matches what a command needs.
pub fn expect_metric(spec: &FieldSpec) -> Result<()> {
    match spec.kind {
        FieldKind::Metric(_) => Ok(()),
        FieldKind::Connection(_) => Err(Error::ConfigInvalid(
            "this command needs a metric field".into(),
        )),
    }
}
