//! Command dispatch: each command validates its slice of the configuration,
//! runs the owning module and fills a report.

use crate::config::{
    census_system_from, chart_from, default_sample, expect_metric, field_from, functional_from,
    parse_points, RawConfig,
};
use crate::report::Report;
use flatlab_core::curvature::{
    self, covariant_derivative_curvature, curvature_fd_derivative, ricci_logdet,
    second_bianchi_defect, veblen_defect, CurvatureBundle,
};
use flatlab_core::error::{Error, Result};
use flatlab_core::field::{ConnectionField, FdConfig, FieldKind, MetricField};
use flatlab_core::flatness::{
    classify_flatness, gray_volume_check, normal_metric_from_curvature, CurvaturePrescription,
    FLAT_TOL_ANALYTIC,
};
use flatlab_core::scalar::parse_expr;
use flatlab_core::tensor::{
    lower_first_index, system_census, SquareMatrix, Tensor3, Tensor4,
};
use flatlab_core::variational::{
    el_oracle_match, el_residual, functional, AffineField, Bump, BumpWindow, ConnectionBump,
    FamilySpec, GridQuadrature, MetricBump, MinimizeOptions, Residual, Variable,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn run(command: &str, raw: &RawConfig) -> Result<Report> {
    if let Some(declared) = raw.get("command") {
        if declared != command {
            return Err(Error::ConfigInvalid(format!(
                "config declares command '{declared}' but '{command}' was requested"
            )));
        }
    }
    // The seed participates in the config hash and in seeded subcommands;
    // it is always an accepted key.
    let _ = raw.get("seed");
    let mut report = Report::new(command, raw.hash());
    match command {
        "census" => census(raw, &mut report)?,
        "curvature" => curvature_cmd(raw, &mut report)?,
        "verify" => verify(raw, &mut report)?,
        "flatness" => flatness_cmd(raw, &mut report)?,
        "deviation" => deviation(raw, &mut report)?,
        "minimize" => minimize(raw, &mut report)?,
        "normal-metric" => normal_metric(raw, &mut report)?,
        other => {
            return Err(Error::ConfigInvalid(format!("unknown command '{other}'")));
        }
    }
    raw.finish()?;
    Ok(report)
}

fn census(raw: &RawConfig, report: &mut Report) -> Result<()> {
    let system = census_system_from(raw)?;
    let n = raw
        .get_usize("census.n")?
        .ok_or_else(|| Error::ConfigInvalid("missing 'census.n'".into()))?;
    if n == 0 {
        return Err(Error::ConfigInvalid("census.n must be positive".into()));
    }
    let c = system_census(system, n);
    report.value("census.equations", c.equations as f64);
    report.value("census.unknowns", c.unknowns as f64);
    report.note("census.system", system.name());
    report.note("census.class", c.class.name());
    Ok(())
}

fn sample_points(raw: &RawConfig, chart: &flatlab_core::field::ChartBox) -> Result<Vec<Vec<f64>>> {
    match raw.get("points") {
        Some(text) => parse_points("points", &text, chart.n()),
        None => Ok(default_sample(chart)),
    }
}

fn curvature_cmd(raw: &RawConfig, report: &mut Report) -> Result<()> {
    let spec = field_from(raw, "field")?;
    let points = sample_points(raw, &spec.chart)?;
    match &spec.kind {
        FieldKind::Metric(_) => {
            let field = MetricField::from_spec(&spec)?;
            let mut max_gamma = 0.0f64;
            let mut max_riemann = 0.0f64;
            let mut max_ricci = 0.0f64;
            let mut max_scalar = 0.0f64;
            let mut max_weyl = 0.0f64;
            let mut first_scalar = None;
            for x in &points {
                let jet = field.jet2(x)?;
                let bundle = CurvatureBundle::from_metric_jet(&jet)?;
                let cj = curvature::christoffel(&jet)?;
                max_gamma = max_gamma.max(cj.gamma.max_abs());
                max_riemann = max_riemann.max(bundle.lower.max_abs());
                max_ricci = max_ricci.max(bundle.ricci.max_abs());
                max_scalar = max_scalar.max(bundle.scalar.abs());
                if let Some(w) = &bundle.weyl {
                    max_weyl = max_weyl.max(w.max_abs());
                }
                first_scalar.get_or_insert(bundle.scalar);
            }
            report.value("christoffel.max_abs", max_gamma);
            report.value("riemann.max_abs", max_riemann);
            report.value("ricci.max_abs", max_ricci);
            report.value("scalar.max_abs", max_scalar);
            report.value("scalar.first_point", first_scalar.unwrap_or(0.0));
            if spec.chart.n() >= 3 {
                report.value("weyl.max_abs", max_weyl);
            }
        }
        FieldKind::Connection(_) => {
            let field = ConnectionField::from_spec(&spec)?;
            let mut max_gamma = 0.0f64;
            let mut max_riemann = 0.0f64;
            let mut max_ricci = 0.0f64;
            for x in &points {
                let cj = field.jet1(x)?;
                let r = curvature::riemann_mixed(&cj);
                let ric = curvature::ricci_from_mixed(&r);
                max_gamma = max_gamma.max(cj.gamma.max_abs());
                max_riemann = max_riemann.max(r.max_abs());
                max_ricci = max_ricci.max(ric.max_abs());
            }
            report.value("gamma.max_abs", max_gamma);
            report.value("riemann.max_abs", max_riemann);
            report.value("ricci.max_abs", max_ricci);
        }
    }
    report.value("points.checked", points.len() as f64);
    Ok(())
}

fn verify(raw: &RawConfig, report: &mut Report) -> Result<()> {
    let spec = field_from(raw, "field")?;
    expect_metric(&spec)?;
    let field = MetricField::from_spec(&spec)?;
    let points = sample_points(raw, &spec.chart)?;
    let tol_identity = raw.get_f64("tolerances.identity")?.unwrap_or(1e-8);
    let tol_fd = raw.get_f64("tolerances.fd")?.unwrap_or(1e-5);
    let fd = FdConfig::for_box(&spec.chart);

    let mut antisym = 0.0f64;
    let mut bianchi1 = 0.0f64;
    let mut pair_sym = 0.0f64;
    let mut two_route = 0.0f64;
    let mut ricci_routes = 0.0f64;
    let mut bianchi2 = 0.0f64;
    let mut veblen = 0.0f64;
    let mut weyl_trace = 0.0f64;
    let mut scale = 0.0f64;
    for x in &points {
        if !spec.chart.contains(x, fd.shrink()) {
            continue;
        }
        let jet = field.jet2(x)?;
        let cj = curvature::christoffel(&jet)?;
        let mixed = curvature::riemann_mixed(&cj);
        let lower = lower_first_index(&jet.g, &mixed);
        let direct = curvature::riemann_lower(&jet)?;
        scale = scale.max(mixed.max_abs()).max(1e-30);
        antisym = antisym.max(mixed.antisymmetry_defect());
        bianchi1 = bianchi1.max(mixed.first_bianchi_defect());
        pair_sym = pair_sym.max(direct.symmetry_defect());
        two_route = two_route.max(direct.0.sub(&lower.0).max_abs());
        let ric = curvature::ricci_from_mixed(&mixed);
        ricci_routes = ricci_routes.max(ric.sub(&ricci_logdet(&jet)?).max_abs());
        let jet_at = |y: &[f64]| curvature::christoffel(&field.jet2(y)?);
        let dr = curvature_fd_derivative(jet_at, x, fd.h2)?;
        let nabla = covariant_derivative_curvature(&cj, &mixed, &dr);
        bianchi2 = bianchi2.max(second_bianchi_defect(&nabla));
        veblen = veblen.max(veblen_defect(&nabla));
        if jet.n() >= 3 {
            let w = curvature::weyl(&jet)?;
            let g_inv = jet.g.invert_spd()?;
            weyl_trace = weyl_trace.max(curvature::weyl_trace_defect(&g_inv, &w));
        }
    }
    report.check_le("antisym", antisym / scale, tol_identity);
    report.check_le("bianchi1", bianchi1 / scale, tol_identity);
    report.check_le("pair_sym", pair_sym / scale, tol_identity);
    report.check_le("two_route", two_route / scale, tol_identity);
    report.check_le("ricci_routes", ricci_routes / scale, tol_identity);
    report.check_le("bianchi2", bianchi2 / scale, tol_fd);
    report.check_le("veblen", veblen / scale, tol_fd);
    if spec.chart.n() >= 3 {
        report.check_le("weyl_trace", weyl_trace / scale, tol_identity);
    }
    report.value("points.checked", points.len() as f64);
    Ok(())
}

fn flatness_cmd(raw: &RawConfig, report: &mut Report) -> Result<()> {
    let spec = field_from(raw, "field")?;
    let points = sample_points(raw, &spec.chart)?;
    let tol = raw.get_f64("tolerances.flat")?.unwrap_or(FLAT_TOL_ANALYTIC);
    let rep = classify_flatness(&spec, &points, tol)?;
    report.flag("connection_flat", rep.connection_flat);
    report.flag("curvature_flat", rep.curvature_flat);
    report.flag("ricci_flat", rep.ricci_flat);
    report.flag("scalar_flat", rep.scalar_flat);
    report.value("residual.connection", rep.max_connection);
    report.value("residual.curvature", rep.max_curvature);
    report.value("residual.ricci", rep.max_ricci);
    report.value("residual.scalar", rep.max_scalar);
    report.value("points.checked", rep.points_checked as f64);
    Ok(())
}

fn oracle_bumps(
    raw: &RawConfig,
    id: flatlab_core::variational::FunctionalId,
    chart: &flatlab_core::field::ChartBox,
    count: usize,
) -> Result<Vec<Bump>> {
    let seed = raw.get_usize("seed")?.unwrap_or(0) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(101));
    let n = chart.n();
    let window = BumpWindow::centered(chart, 0.625);
    let mut bumps = Vec::with_capacity(count);
    for _ in 0..count {
        match id.variable {
            Variable::Gamma => {
                let mut coeff = Tensor3::zeros(n);
                for i in 0..n {
                    for j in 0..n {
                        for k in j..n {
                            let v = rng.gen_range(-1.0..1.0);
                            coeff.set(i, j, k, v);
                            coeff.set(i, k, j, v);
                        }
                    }
                }
                let norm = coeff.max_abs().max(1e-12);
                bumps.push(Bump::Connection(ConnectionBump {
                    window: window.clone(),
                    coeff: coeff.scale(1.0 / norm),
                }));
            }
            _ => {
                let rawm = SquareMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
                let sym = SquareMatrix::from_fn(n, |i, j| 0.5 * (rawm.get(i, j) + rawm.get(j, i)));
                let norm = sym.max_abs().max(1e-12);
                bumps.push(Bump::Metric(MetricBump {
                    window: window.clone(),
                    coeff: sym.scale(1.0 / norm),
                }));
            }
        }
    }
    Ok(bumps)
}

fn deviation(raw: &RawConfig, report: &mut Report) -> Result<()> {
    let id = functional_from(raw)?;
    let spec = field_from(raw, "field")?;
    expect_metric(&spec)?;
    let metric = MetricField::from_spec(&spec)?;
    let field = if raw.get("connection.kind").is_some() {
        let cspec = field_from(raw, "connection")?;
        AffineField::with_connection(metric, ConnectionField::from_spec(&cspec)?)
    } else {
        AffineField::from_metric_field(metric)
    };
    let margin = raw.get_usize("quad.margin")?.unwrap_or(1);
    let quad = GridQuadrature::new(spec.chart.clone(), margin)?;
    let value = functional(id, &field, &quad)?;
    report.value("functional.value", value);
    report.note("functional.id", &id.name());

    let h = raw
        .get_f64("tolerances.bracket_step")?
        .unwrap_or(1e-3 * spec.chart.min_extent());
    let mut res_max = 0.0f64;
    for x in sample_points(raw, &spec.chart)? {
        if !spec.chart.contains(&x, quad.margin_width()) {
            continue;
        }
        let r = el_residual(id, &field, &x, h)?;
        res_max = res_max.max(match r {
            Residual::Metric(m) => m.max_abs(),
            Residual::Connection(c) => c.max_abs(),
        });
    }
    report.value("residual.max_abs", res_max);

    let n_bumps = raw.get_usize("oracle.bumps")?.unwrap_or(0);
    if n_bumps > 0 {
        let tol = raw.get_f64("oracle.tolerance")?.unwrap_or(0.05);
        let eps = raw.get_f64("oracle.eps")?.unwrap_or(1e-4);
        let bumps = oracle_bumps(raw, id, &spec.chart, n_bumps)?;
        let mismatch = el_oracle_match(id, &field, &bumps, &quad, eps, h)?;
        report.check_le("oracle.mismatch", mismatch, tol);
    }
    Ok(())
}

fn minimize(raw: &RawConfig, report: &mut Report) -> Result<()> {
    let id = functional_from(raw)?;
    let family = match raw.require("minimize.family")?.as_str() {
        "conformal" => {
            let chart = chart_from(raw, "field")?;
            let phi = parse_expr(&raw.require("minimize.phi")?, chart.n())?;
            FamilySpec::ConformalScale { phi, chart }
        }
        other => {
            return Err(Error::ConfigInvalid(format!(
                "unknown minimization family '{other}'"
            )))
        }
    };
    let theta0: Vec<f64> = raw
        .require("minimize.theta0")?
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::ConfigInvalid("bad minimize.theta0".into()))
        })
        .collect::<Result<_>>()?;
    let mut opts = MinimizeOptions::default();
    if let Some(v) = raw.get_f64("minimize.step0")? {
        opts.step0 = v;
    }
    if let Some(v) = raw.get_f64("minimize.backtrack")? {
        opts.backtrack_ratio = v;
    }
    if let Some(v) = raw.get_usize("minimize.max_iters")? {
        opts.max_iters = v;
    }
    if let Some(v) = raw.get_f64("minimize.grad_tol")? {
        opts.grad_tol = v;
    }
    let margin = raw.get_usize("quad.margin")?.unwrap_or(0);
    let quad = GridQuadrature::new(family.chart().clone(), margin)?;
    let result = flatlab_core::variational::minimize_deviation(id, &family, &quad, &theta0, &opts)?;
    let monotone = result.trace.windows(2).all(|w| w[1] <= w[0] + 1e-15);
    for (i, t) in result.theta.iter().enumerate() {
        report.value(&format!("theta.{i}"), *t);
    }
    report.value("functional.final", *result.trace.last().unwrap());
    report.value("iterations", (result.trace.len() - 1) as f64);
    report.value("grad_norm", result.grad_norm);
    report.check_le("monotone_trace", if monotone { 0.0 } else { 1.0 }, 0.5);
    if let Some(target) = raw.get_f64("minimize.target")? {
        report.check_le("functional.target", *result.trace.last().unwrap(), target);
    }
    if let Some(tol) = raw.get_f64("minimize.theta_tol")? {
        let worst = result.theta.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        report.check_le("theta.max_abs", worst, tol);
    }
    Ok(())
}

fn normal_metric(raw: &RawConfig, report: &mut Report) -> Result<()> {
    let chart = chart_from(raw, "normal")?;
    let n = chart.n();
    let seed = raw.get_usize("normal.seed")?.unwrap_or(0) as u64;
    let scale = raw.get_f64("normal.scale")?.unwrap_or(0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rawt = Tensor4::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    rawt.set(i, j, k, l, rng.gen_range(-1.0..1.0));
                }
            }
        }
    }
    let mut p = CurvaturePrescription::new(&rawt);
    let max = p.r0.max_abs();
    if max > 0.0 {
        p = CurvaturePrescription {
            r0: flatlab_core::tensor::LoweredCurvature(p.r0.0.scale(scale / max)),
        };
    }
    let spec = normal_metric_from_curvature(&p, &chart)?;
    let field = MetricField::from_spec(&spec)?;
    let jet = field.jet2(&vec![0.0; n])?;
    let r = curvature::riemann_lower(&jet)?;
    let defect = r.0.sub(&p.r0.0).max_abs();
    let tol = raw.get_f64("tolerances.prescription")?.unwrap_or(5e-4);
    report.check_le("prescription.defect", defect, tol);

    let rho = raw.get_f64("normal.rho")?.unwrap_or(0.1);
    let big = gray_volume_check(&spec, rho, 9)?;
    let small = gray_volume_check(&spec, rho / 2.0, 9)?;
    report.value("gray.deviation", big);
    report.value("gray.deviation_half", small);
    if small > 0.0 {
        report.check_ge("gray.cubic_ratio", big / small, 6.0);
    }
    Ok(())
}
