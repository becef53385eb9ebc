use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use opuc::asymptotics::{
    convolve_even, decreasing, decreasing_along_ladder, whole_circle_check, zero_order_deviation, WholeCircleReport,
};
use opuc::cmv::{string_residual_matrix, string_residuals_integral};
use opuc::equilibrium::ConditionReport;
use opuc::quadrature::{decimal_string, periodic_trapezoid_f64};
use opuc::verblunsky::compute_sequence;
use opuc::{
    b_coeffs, build_cmv, fit_prediction, fourier_v, solve_support, symbol_delta, symbol_delta_fourier,
    toeplitz_inverse_coeffs, AsymptoticModel, EquilibriumMeasure, FitReport, OrthonormalBasis, Potential,
    ToeplitzSymbol, VerblunskySequence,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Equilibrium,
    Verblunsky,
    VerifyString,
    Asymptotics,
    Compare,
    Report,
}

impl Command {
    fn wants(self, stage: Command) -> bool {
        self == stage || self == Command::Report
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Error => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Outcome of one run. Timings are kept out of `report.json` and written to
/// `timings.json` so the data files stay reproducible.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: Command,
    pub config: ExperimentConfig,
    pub files: Vec<String>,
    pub checks: Vec<Check>,
    pub errors: Vec<StageError>,
    pub status: Status,
    #[serde(skip)]
    pub timings: Vec<StageTiming>,
}

impl RunReport {
    pub fn check(&self, name: &str, n: Option<usize>) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name && c.n == n)
    }
}

/// Runs `command` on a worker pool of `config.jobs` threads (all cores when unset)
/// and writes its artifacts under `config.out`.
pub fn run(config: &ExperimentConfig, command: Command) -> anyhow::Result<RunReport> {
    config.validate()?;
    std::fs::create_dir_all(&config.out).with_context(|| format!("creating {}", config.out.display()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.unwrap_or(0))
        .build()?;
    let mut runner = Runner {
        cfg: config,
        out: config.out.clone(),
        report: RunReport {
            command,
            config: config.clone(),
            files: Vec::new(),
            checks: Vec::new(),
            errors: Vec::new(),
            status: Status::Pass,
            timings: Vec::new(),
        },
    };
    pool.install(|| runner.execute(command))?;
    let mut report = runner.report;
    report.status = if !report.errors.is_empty() {
        Status::Error
    } else if report.checks.iter().any(|c| !c.passed) {
        Status::Fail
    } else {
        Status::Pass
    };
    report.files.push("report.json".into());
    write_json(&config.out.join("report.json"), &report)?;
    write_json(&config.out.join("timings.json"), &report.timings)?;
    Ok(report)
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    out: PathBuf,
    report: RunReport,
}

impl Runner<'_> {
    fn execute(&mut self, command: Command) -> anyhow::Result<()> {
        let cfg = self.cfg;
        let p = &cfg.potential;
        let em = self.stage("equilibrium", |r| r.equilibrium(command));
        let needs_sequences = command != Command::Equilibrium && command != Command::Asymptotics;
        let sequences = if needs_sequences {
            self.sequences(command)
        } else {
            Vec::new()
        };
        if command.wants(Command::VerifyString) {
            self.stage("verify-string", |r| r.strings(p, &sequences));
        }
        if let Some(em) = &em {
            if command.wants(Command::Asymptotics) {
                self.stage("asymptotics", |r| r.asymptotics(em));
            }
            if command.wants(Command::Compare) {
                self.stage("compare", |r| r.compare(em, &sequences));
            }
            if command == Command::Report {
                self.stage("kernel", |r| r.kernel(p, em, &sequences));
            }
        }
        Ok(())
    }

    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> anyhow::Result<T>) -> Option<T> {
        let start = Instant::now();
        let result = f(self);
        self.report.timings.push(StageTiming {
            stage: name.into(),
            seconds: start.elapsed().as_secs_f64(),
        });
        match result {
            Ok(v) => Some(v),
            Err(e) => {
                self.report.errors.push(StageError {
                    stage: name.into(),
                    message: format!("{e:#}"),
                });
                None
            }
        }
    }

    fn check(&mut self, name: &str, n: Option<usize>, value: f64, threshold: f64, passed: bool) {
        self.report.checks.push(Check {
            name: name.into(),
            n,
            passed,
            value,
            threshold,
        });
    }

    /// Records `value < tolerance(name)`.
    fn check_below(&mut self, name: &str, n: Option<usize>, value: f64) {
        let tol = self.cfg.tolerance(name);
        self.check(name, n, value, tol, value < tol);
    }

    fn csv(&mut self, file: &str, header: &[&str], rows: Vec<Vec<String>>) -> anyhow::Result<()> {
        let path = self.out.join(file);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_path(&path)
            .with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.report.files.push(file.into());
        Ok(())
    }

    fn json(&mut self, file: &str, value: &impl Serialize) -> anyhow::Result<()> {
        write_json(&self.out.join(file), value)?;
        self.report.files.push(file.into());
        Ok(())
    }

    fn equilibrium(&mut self, command: Command) -> anyhow::Result<EquilibriumMeasure> {
        let p = &self.cfg.potential;
        let em = match self.cfg.theta {
            Some(theta) => EquilibriumMeasure::arc(p, theta)?,
            None => solve_support(p)?,
        };
        if !command.wants(Command::Equilibrium) {
            return Ok(em);
        }
        let conditions = em.check_conditions()?;
        let whole = em.arc.whole_circle;
        let span = if whole { PI } else { em.theta() };
        let points = self.cfg.density_points;
        let mut rows = Vec::with_capacity(points);
        for j in 0..points {
            let lambda = -span + 2.0 * span * j as f64 / (points - 1) as f64;
            let rho = em.rho_at(lambda)?;
            let p_val = if whole { String::new() } else { fmt(em.p_at(lambda)?) };
            rows.push(vec![fmt(lambda), fmt(rho), p_val]);
        }
        self.csv("density.csv", &["lambda", "rho", "p"], rows)?;
        self.json(
            "equilibrium.json",
            &EquilibriumJson {
                potential: p.clone(),
                whole_circle: whole,
                theta: em.theta(),
                normalized: self.cfg.theta.is_none(),
                a: em.a,
                b: em.b,
                c: em.c,
                p_theta: em.p_theta,
                mass: em.mass,
                conditions: conditions.clone(),
            },
        )?;
        // A fixed arc is a probe; normalization-dependent checks are reported, not gated.
        if self.cfg.theta.is_none() {
            self.check_below("mass", None, (em.mass - 1.0).abs());
            self.check("conditions", None, conditions.min_interior_rho, 0.0, conditions.all_pass());
        }
        Ok(em)
    }

    fn sequences(&mut self, command: Command) -> Vec<VerblunskySequence> {
        let start = Instant::now();
        let cfg = self.cfg;
        let results: Vec<_> = cfg
            .n
            .par_iter()
            .map(|&n| compute_sequence(&cfg.potential, n, cfg.kmax_for(n), cfg.precision_for(n), cfg.max_precision))
            .collect();
        self.report.timings.push(StageTiming {
            stage: "verblunsky".into(),
            seconds: start.elapsed().as_secs_f64(),
        });
        let mut out = Vec::new();
        for (&n, r) in cfg.n.iter().zip(results) {
            match r {
                Ok(vs) => out.push(vs),
                Err(e) => self.report.errors.push(StageError {
                    stage: format!("verblunsky[n={n}]"),
                    message: e.to_string(),
                }),
            }
        }
        if command.wants(Command::Verblunsky) {
            self.stage("verblunsky-output", |r| r.write_sequences(&out));
        }
        out
    }

    fn write_sequences(&mut self, seqs: &[VerblunskySequence]) -> anyhow::Result<()> {
        let mut rows = Vec::new();
        let mut summary = Vec::new();
        for vs in seqs {
            for k in 1..=vs.kmax {
                rows.push(vec![
                    vs.n.to_string(),
                    k.to_string(),
                    decimal_string(&vs.alphas[k - 1]),
                    decimal_string(&vs.rhos[k - 1]),
                ]);
            }
            summary.push(SequenceJson {
                n: vs.n,
                kmax: vs.kmax,
                precision_used: vs.precision_used,
                max_residual: vs.max_residual,
                residual_bound: vs.residual_bound(),
            });
            let bound = vs.residual_bound();
            self.check("residual", Some(vs.n), vs.max_residual, bound, vs.max_residual <= bound);
        }
        self.csv("verblunsky.csv", &["n", "k", "alpha", "rho"], rows)?;
        self.json("verblunsky.json", &summary)
    }

    fn strings(&mut self, p: &Potential, seqs: &[VerblunskySequence]) -> anyhow::Result<()> {
        let string_window = self.cfg.string_window;
        let computed: Vec<_> = seqs
            .par_iter()
            .map(|vs| {
                let basis = OrthonormalBasis::new(p, vs);
                let residuals = string_residuals_integral(&basis, vs, vs.kmax)?;
                let cmv = build_cmv(vs, vs.kmax - 1)?;
                let window = string_window.min(vs.kmax.saturating_sub(vs.n + 2));
                let matrix = (window >= 1).then(|| string_residual_matrix(vs, p, vs.n, window));
                Ok::<_, opuc::Error>((residuals, cmv.interior_unitarity_defect(), cmv.size, window, matrix))
            })
            .collect();
        let mut rows = Vec::new();
        let mut summary = Vec::new();
        for (vs, r) in seqs.iter().zip(computed) {
            let (residuals, defect, size, window, matrix) = r.with_context(|| format!("n = {}", vs.n))?;
            for (k, z) in residuals.iter().enumerate() {
                rows.push(vec![vs.n.to_string(), (k + 1).to_string(), fmt(z.re), fmt(z.im)]);
            }
            let max_integral = residuals[1..vs.kmax - 2].iter().map(|z| z.norm()).fold(0.0, f64::max);
            self.check_below("string_integral", Some(vs.n), max_integral);
            self.check_below("unitarity", Some(vs.n), defect);
            let matrix_residual = match matrix {
                Some(Ok(v)) => {
                    self.check_below("string_matrix", Some(vs.n), v);
                    Some(v)
                }
                Some(Err(e)) => return Err(e).with_context(|| format!("matrix string equation at n = {}", vs.n)),
                None => None,
            };
            summary.push(CmvJson {
                n: vs.n,
                size,
                unitarity_defect: defect,
                max_integral_residual: max_integral,
                matrix_index: vs.n,
                matrix_window: window,
                matrix_residual,
            });
        }
        self.csv("string.csv", &["n", "k", "residual_re", "residual_im"], rows)?;
        self.json("cmv.json", &summary)
    }

    fn asymptotics(&mut self, em: &EquilibriumMeasure) -> anyhow::Result<()> {
        if em.arc.whole_circle {
            return self.json("asymptotics.json", &serde_json::json!({ "whole_circle": true }));
        }
        let p = em.potential();
        let theta = em.theta();
        let gamma = self.cfg.gamma_max;
        let fc = fourier_v(p, theta, 4 * gamma + 8);
        let fc2 = fourier_v(p, theta, 8 * gamma + 8);
        if self.cfg.theta.is_none() {
            self.check_below("v_identity", None, fc.identity_defect().abs());
        }

        let table = b_coeffs(&fc, gamma)?;
        let bound = table.decay_bound(5, gamma);
        let bound2 = b_coeffs(&fc2, 2 * gamma)?.decay_bound(5, 2 * gamma);
        let drift = if bound.max(bound2) > 0.0 {
            (bound2 - bound).abs() / bound.max(bound2)
        } else {
            0.0
        };
        let tol = self.cfg.tolerance("b_stability");
        let stable = (bound2 - bound).abs() <= tol * bound.max(bound2);
        self.check("b_stability", None, drift, tol, stable);

        let points = self.cfg.symbol_points;
        let mut rows = Vec::with_capacity(points);
        let mut agreement = 0f64;
        for j in 0..points {
            let phi = -PI + 2.0 * PI * j as f64 / points as f64;
            let d = symbol_delta(em, phi)?;
            let f = symbol_delta_fourier(&fc, phi)?;
            agreement = agreement.max((d - f).abs());
            rows.push(vec![fmt(phi), fmt(d), fmt(f)]);
        }
        self.csv("symbol.csv", &["phi", "delta", "delta_fourier"], rows)?;
        self.check_below("symbol_agreement", None, agreement);

        let sym = ToeplitzSymbol::sample(|phi| symbol_delta(em, phi), 256)?;
        let coeffs = sym.coeffs(16);
        let inverse = toeplitz_inverse_coeffs(&sym, 64);
        let (min, _) = sym.min();
        self.check("symbol_positive", None, min, 0.0, inverse.is_ok());
        let inverse = inverse.unwrap_or_default();
        if !inverse.is_empty() {
            let defect = (-2..=2)
                .map(|k| (convolve_even(&coeffs, &inverse, k) - if k == 0 { 1.0 } else { 0.0 }).abs())
                .fold(0.0, f64::max);
            self.check_below("convolution", None, defect);
        }
        let model = AsymptoticModel::with_window(em, self.cfg.epsilon1)?;
        self.json(
            "asymptotics.json",
            &AsymptoticsJson {
                theta,
                p_theta: model.p_theta,
                slope: model.slope,
                symbol_slope: model.symbol_slope,
                epsilon1: model.epsilon1,
                v: fc.v.clone(),
                v_identity_defect: fc.identity_defect(),
                b: table.values,
                b_decay_bound: bound,
                b_decay_bound_doubled: bound2,
                toeplitz: coeffs,
                toeplitz_inverse: inverse.into_iter().take(17).collect(),
            },
        )
    }

    fn compare(&mut self, em: &EquilibriumMeasure, seqs: &[VerblunskySequence]) -> anyhow::Result<()> {
        let offsets = self.cfg.offsets();
        if em.arc.whole_circle {
            let reports: Vec<WholeCircleReport> =
                seqs.iter().map(|vs| whole_circle_check(vs, vs.n, &offsets)).collect();
            let mut rows = Vec::new();
            for vs in seqs {
                for &m in &offsets {
                    let k = (vs.n as i64 + m) as usize;
                    rows.push(vec![vs.n.to_string(), m.to_string(), decimal_string(&vs.alphas[k - 1])]);
                }
            }
            self.csv("whole_circle.csv", &["n", "m", "alpha"], rows)?;
            let shrinking = decreasing_along_ladder(&reports);
            self.check("whole_circle_decreasing", None, f64::from(u8::from(shrinking)), 1.0, shrinking);
            if let Some(last) = reports.last() {
                self.check_below("whole_circle_max", Some(last.n), last.max_abs_alpha);
            }
            return self.json("whole_circle.json", &reports);
        }

        let model = AsymptoticModel::with_window(em, self.cfg.epsilon1)?;
        let mut rows = Vec::new();
        let mut fits: Vec<FitReport> = Vec::new();
        let mut zero_order = Vec::new();
        for vs in seqs {
            let n = vs.n;
            let fit = fit_prediction(vs, &model, n, &offsets);
            let s = match &fit {
                Ok(f) => f.s,
                Err(_) => 1,
            };
            let (agree, total) = match &fit {
                Ok(_) => (offsets.len(), offsets.len()),
                Err(opuc::Error::SignInconsistent { agree, total }) => (*agree, *total),
                Err(e) => return Err(anyhow::anyhow!("fit at n = {n}: {e}")),
            };
            self.check("sign_unanimous", Some(n), agree as f64 / total as f64, 1.0, agree == total);
            let signed = model.clone().with_sign(s);
            for &m in &offsets {
                let k = (n as i64 + m) as usize;
                let predicted = signed.predict_alpha(n, m).map(fmt).unwrap_or_default();
                let x = fit
                    .as_ref()
                    .ok()
                    .and_then(|f| f.points.iter().find(|pt| pt.m == m))
                    .and_then(|pt| pt.x)
                    .map(fmt)
                    .unwrap_or_default();
                rows.push(vec![
                    n.to_string(),
                    m.to_string(),
                    decimal_string(&vs.alphas[k - 1]),
                    predicted,
                    x,
                    fmt(model.slope * m as f64 / n as f64),
                ]);
            }
            zero_order.push(ZeroOrderJson {
                n,
                deviation: zero_order_deviation(vs, em.theta(), n, &offsets),
            });
            if let Ok(f) = fit {
                fits.push(f);
            }
        }
        self.csv(
            "compare.csv",
            &["n", "m", "alpha_computed", "alpha_predicted", "x_extracted", "x_predicted"],
            rows,
        )?;

        let zero_decreasing = decreasing(&zero_order.iter().map(|z| z.deviation).collect::<Vec<_>>());
        self.check("zero_order_decreasing", None, f64::from(u8::from(zero_decreasing)), 1.0, zero_decreasing);
        if let Some(last) = zero_order.last() {
            self.check_below("zero_order", Some(last.n), last.deviation);
        }
        if fits.len() == seqs.len() && !fits.is_empty() {
            let errors: Vec<f64> = fits.iter().map(|f| f.slope_error.abs()).collect();
            let improving = decreasing(&errors);
            self.check("slope_error_decreasing", None, f64::from(u8::from(improving)), 1.0, improving);
            let last = &fits[fits.len() - 1];
            self.check_below("slope_relative", Some(last.n), last.slope_error.abs() / model.slope);
            self.check_below("intercept", Some(last.n), last.intercept.abs());
        }
        self.json(
            "fit.json",
            &FitJson {
                model,
                fits,
                zero_order,
            },
        )
    }

    fn kernel(&mut self, p: &Potential, em: &EquilibriumMeasure, seqs: &[VerblunskySequence]) -> anyhow::Result<()> {
        let span = if em.arc.whole_circle { PI } else { 0.8 * em.theta() };
        let points = self.cfg.density_points;
        let grid: Vec<f64> = (0..points)
            .map(|j| -span + 2.0 * span * j as f64 / (points - 1) as f64)
            .collect();
        let eq: Vec<f64> = grid.iter().map(|&l| em.rho_at(l)).collect::<opuc::Result<_>>()?;
        let computed: Vec<_> = seqs
            .par_iter()
            .map(|vs| {
                let basis = OrthonormalBasis::new(p, vs);
                let values: Vec<f64> = grid.iter().map(|&l| basis.kernel_density(vs.n, l)).collect();
                let mass = periodic_trapezoid_f64(|l| basis.kernel_density(vs.n, l), -PI, 1e-12)?;
                Ok::<_, opuc::Error>((values, mass))
            })
            .collect();
        let mut rows = Vec::new();
        let mut summary = Vec::new();
        for (vs, r) in seqs.iter().zip(computed) {
            let (values, mass) = r?;
            let mut sup = 0f64;
            for ((&l, &v), &e) in grid.iter().zip(&values).zip(&eq) {
                sup = sup.max((v - e).abs());
                rows.push(vec![vs.n.to_string(), fmt(l), fmt(v), fmt(e)]);
            }
            self.check_below("kernel_mass", Some(vs.n), (mass - 1.0).abs());
            summary.push(KernelJson {
                n: vs.n,
                sup_distance: sup,
                mass,
            });
        }
        let improving = decreasing(&summary.iter().map(|k| k.sup_distance).collect::<Vec<_>>());
        self.check("kernel_distance_decreasing", None, f64::from(u8::from(improving)), 1.0, improving);
        self.csv("kernel.csv", &["n", "lambda", "rho_nn", "rho_eq"], rows)?;
        self.json("kernel.json", &summary)
    }
}

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct EquilibriumJson {
    potential: Potential,
    whole_circle: bool,
    theta: f64,
    normalized: bool,
    a: f64,
    b: f64,
    c: f64,
    p_theta: Option<f64>,
    mass: f64,
    conditions: ConditionReport,
}

#[derive(Serialize)]
struct SequenceJson {
    n: usize,
    kmax: usize,
    precision_used: u32,
    max_residual: f64,
    residual_bound: f64,
}

#[derive(Serialize)]
struct CmvJson {
    n: usize,
    size: usize,
    unitarity_defect: f64,
    max_integral_residual: f64,
    matrix_index: usize,
    matrix_window: usize,
    matrix_residual: Option<f64>,
}

#[derive(Serialize)]
struct AsymptoticsJson {
    theta: f64,
    p_theta: f64,
    slope: f64,
    symbol_slope: f64,
    epsilon1: f64,
    v: Vec<f64>,
    v_identity_defect: f64,
    b: Vec<f64>,
    b_decay_bound: f64,
    b_decay_bound_doubled: f64,
    toeplitz: Vec<f64>,
    toeplitz_inverse: Vec<f64>,
}

#[derive(Serialize)]
struct ZeroOrderJson {
    n: usize,
    deviation: f64,
}

#[derive(Serialize)]
struct FitJson {
    model: AsymptoticModel,
    fits: Vec<FitReport>,
    zero_order: Vec<ZeroOrderJson>,
}

#[derive(Serialize)]
struct KernelJson {
    n: usize,
    sup_distance: f64,
    mass: f64,
}
