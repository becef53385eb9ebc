//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::f64::consts::{PI, SQRT_2};
use std::path::Path;
use std::time::Instant;

use opuc::asymptotics::{decreasing, sign_vote, whole_circle_check, zero_order_deviation};
use opuc::cmv::string_residuals_integral;
use opuc::quadrature::periodic_trapezoid_f64;
use opuc::verblunsky::{compute_sequence, gram_schmidt_oracle};
use opuc::{
    b_coeffs, build_cmv, fit_prediction, fourier_v, solve_support, symbol_delta, symbol_delta_fourier,
    verblunsky, AsymptoticModel, EquilibriumMeasure, OrthonormalBasis, Potential, VerblunskySequence,
};
use opuc_cli::{run, Command, ExperimentConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const LADDER: [usize; 3] = [20, 40, 80];

fn quartic() -> Potential {
    Potential::quartic(-1.0, 0.5)
}

/// Arc used to probe the quartic, whose equilibrium support is not a single arc.
const QUARTIC_THETA: f64 = 1.2;

fn require(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn exact_identities() -> Outcome {
    let start = Instant::now();
    let (mut residual, mut oracle, mut string, mut unitarity) = (0f64, 0f64, 0f64, 0f64);
    for p in [Potential::gww(2.0), quartic()] {
        for n in [4, 6] {
            let vs = compute_sequence(&p, n, 12, 256, 256).map_err(|e| e.to_string())?;
            residual = residual.max(vs.max_residual);
            let gs = gram_schmidt_oracle(&p, n, 12, 256).map_err(|e| e.to_string())?;
            for k in 1..=12 {
                oracle = oracle.max((vs.alpha(k) - gs.alpha(k)).abs());
            }
            let basis = OrthonormalBasis::new(&p, &vs);
            let res = string_residuals_integral(&basis, &vs, 12).map_err(|e| e.to_string())?;
            string = string.max(res.iter().map(|z| z.norm()).fold(0.0, f64::max));
            let cmv = build_cmv(&vs, 11).map_err(|e| e.to_string())?;
            unitarity = unitarity.max(cmv.interior_unitarity_defect());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    require(
        residual < 1e-20 && oracle < 1e-15 && string < 1e-10 && unitarity < 1e-10 && secs < 60.0,
        format!(
            "residual {residual:.2e}, oracle {oracle:.2e}, string {string:.2e}, unitarity {unitarity:.2e}, {secs:.1}s"
        ),
    )
}

fn equilibrium_closed_form() -> Outcome {
    let em = solve_support(&Potential::gww(2.0)).map_err(|e| e.to_string())?;
    let theta_err = (em.theta() - PI / 2.0).abs();
    let (mut rho_err, mut p_err) = (0f64, 0f64);
    for j in 0..20 {
        let lambda = em.theta() * (-0.95 + 1.9 * j as f64 / 19.0);
        let h = 0.5 * lambda;
        let rho = 2.0 / PI * h.cos() * (0.5 - h.sin().powi(2)).sqrt();
        let p = 4.0 * SQRT_2 * PI * h.cos();
        rho_err = rho_err.max((em.rho_at(lambda).map_err(|e| e.to_string())? - rho).abs());
        p_err = p_err.max((em.p_at(lambda).map_err(|e| e.to_string())? - p).abs());
    }
    let left = em.edge_exponent(-1.0).map_err(|e| e.to_string())?;
    let right = em.edge_exponent(1.0).map_err(|e| e.to_string())?;
    let mass_err = (em.mass - 1.0).abs();
    let edges_ok = [left, right].iter().all(|e| (0.45..=0.55).contains(e));
    require(
        theta_err < 1e-8 && rho_err < 1e-8 && p_err < 1e-8 && edges_ok && mass_err < 1e-8,
        format!(
            "theta {theta_err:.2e}, rho {rho_err:.2e}, P {p_err:.2e}, edges {left:.4}/{right:.4}, mass {mass_err:.2e}"
        ),
    )
}

fn symbol_grid_gap(em: &EquilibriumMeasure, p: &Potential) -> Result<f64, String> {
    let fc = fourier_v(p, em.theta(), 64);
    let mut gap = 0f64;
    for j in 0..64 {
        let phi = -PI + 2.0 * PI * j as f64 / 64.0;
        let d = symbol_delta(em, phi).map_err(|e| e.to_string())?;
        let f = symbol_delta_fourier(&fc, phi).map_err(|e| e.to_string())?;
        gap = gap.max((d - f).abs());
    }
    Ok(gap)
}

fn v_and_symbol_identities() -> Outcome {
    let t = 2.0;
    let g = Potential::gww(t);
    let em = solve_support(&g).map_err(|e| e.to_string())?;
    let identity = fourier_v(&g, em.theta(), 64).identity_defect().abs();
    let q = quartic();
    let qem = EquilibriumMeasure::arc(&q, QUARTIC_THETA).map_err(|e| e.to_string())?;
    let gap = symbol_grid_gap(&em, &g)?.max(symbol_grid_gap(&qem, &q)?);
    let mut closed = 0f64;
    for j in 0..64 {
        let phi = -PI + 2.0 * PI * j as f64 / 64.0;
        let expect = 2.0 * t * (em.a + em.c * (0.5 * phi).sin().powi(2));
        closed = closed.max((symbol_delta(&em, phi).map_err(|e| e.to_string())? - expect).abs());
    }
    require(
        identity < 1e-8 && gap < 1e-6 && closed < 1e-8,
        format!("v-identity {identity:.2e}, two-route {gap:.2e}, closed form {closed:.2e}"),
    )
}

fn b_structure() -> Outcome {
    let g = Potential::gww(2.0);
    let em = solve_support(&g).map_err(|e| e.to_string())?;
    let gww = b_coeffs(&fourier_v(&g, em.theta(), 208), 50).map_err(|e| e.to_string())?;
    let gww_max = gww.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let q = quartic();
    let b50 = b_coeffs(&fourier_v(&q, QUARTIC_THETA, 208), 50).map_err(|e| e.to_string())?;
    let b100 = b_coeffs(&fourier_v(&q, QUARTIC_THETA, 408), 100).map_err(|e| e.to_string())?;
    let bound = b50.decay_bound(5, 50);
    let doubled = b100.decay_bound(5, 100);
    let stable = bound.is_finite() && (doubled - bound).abs() <= 0.1 * bound.max(doubled);
    require(
        gww_max < 1e-10 && stable,
        format!("GWW max |B| {gww_max:.2e}, quartic bound {bound:.3e} -> {doubled:.3e}"),
    )
}

fn gww2_ladder(window: usize) -> Result<Vec<VerblunskySequence>, String> {
    let p = Potential::gww(2.0);
    LADDER
        .iter()
        .map(|&n| verblunsky(&p, n, n + window + 1).map_err(|e| e.to_string()))
        .collect()
}

fn offsets(w: i64) -> Vec<i64> {
    (-w..=w).collect()
}

fn zero_order_law() -> Outcome {
    let em = solve_support(&Potential::gww(2.0)).map_err(|e| e.to_string())?;
    let seqs = gww2_ladder(5)?;
    let mut devs = Vec::new();
    let mut unanimous = true;
    for vs in &seqs {
        let alphas: Vec<(i64, f64)> = offsets(5)
            .into_iter()
            .map(|m| (m, vs.alpha((vs.n as i64 + m) as usize)))
            .collect();
        unanimous &= sign_vote(vs.n, &alphas).is_ok();
        devs.push(zero_order_deviation(vs, em.theta(), vs.n, &offsets(5)));
    }
    require(
        unanimous && decreasing(&devs) && devs[2] < 0.08,
        format!("unanimous {unanimous}, deviations {devs:.4?}"),
    )
}

fn first_order_law() -> Outcome {
    let em = solve_support(&Potential::gww(2.0)).map_err(|e| e.to_string())?;
    let model = AsymptoticModel::new(&em).map_err(|e| e.to_string())?;
    let target = 1.0 / SQRT_2;
    let mut slopes = Vec::new();
    let mut intercepts = Vec::new();
    for vs in &gww2_ladder(5)? {
        let fit = fit_prediction(vs, &model, vs.n, &offsets(5)).map_err(|e| e.to_string())?;
        slopes.push(fit.slope);
        intercepts.push(fit.intercept);
    }
    let errors: Vec<f64> = slopes.iter().map(|s| (s - target).abs()).collect();
    let relative = errors[2] / target;
    require(
        relative < 0.15 && decreasing(&errors) && intercepts[2].abs() < 0.05,
        format!(
            "slopes {slopes:.4?} vs {target:.5}, relative error at n=80 {relative:.3}, intercept {:.2e}",
            intercepts[2]
        ),
    )
}

fn whole_circle_regime() -> Outcome {
    let p = Potential::gww(0.5);
    let em = solve_support(&p).map_err(|e| e.to_string())?;
    let mut maxima = Vec::new();
    for n in [20, 80] {
        let vs = verblunsky(&p, n, n + 4).map_err(|e| e.to_string())?;
        maxima.push(whole_circle_check(&vs, n, &offsets(3)).max_abs_alpha);
    }
    require(
        em.arc.whole_circle && decreasing(&maxima) && maxima[1] < 0.1,
        format!("whole circle {}, max |alpha| {:.3e} -> {:.3e}", em.arc.whole_circle, maxima[0], maxima[1]),
    )
}

fn kernel_density_convergence() -> Outcome {
    let p = Potential::gww(2.0);
    let em = solve_support(&p).map_err(|e| e.to_string())?;
    let grid: Vec<f64> = (0..41).map(|j| em.theta() * (-0.8 + 1.6 * j as f64 / 40.0)).collect();
    let mut distances = Vec::new();
    let mut mass_err = 0f64;
    for n in [20, 80] {
        let vs = verblunsky(&p, n, n).map_err(|e| e.to_string())?;
        let basis = OrthonormalBasis::new(&p, &vs);
        let mut sup = 0f64;
        for &l in &grid {
            sup = sup.max((basis.kernel_density(n, l) - em.rho_at(l).map_err(|e| e.to_string())?).abs());
        }
        distances.push(sup);
        let mass = periodic_trapezoid_f64(|l| basis.kernel_density(n, l), -PI, 1e-12).map_err(|e| e.to_string())?;
        mass_err = mass_err.max((mass - 1.0).abs());
    }
    require(
        distances[1] < distances[0] && mass_err < 1e-8,
        format!("sup distance {distances:.4?}, mass error {mass_err:.2e}"),
    )
}

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timings.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (run_id, jobs) in [(0, 1), (1, 4), (2, 4)] {
        let cfg = ExperimentConfig {
            out: tmp.path().join(format!("run{run_id}")),
            jobs: Some(jobs),
            ..ExperimentConfig::default()
        };
        run(&cfg, Command::Report).map_err(|e| format!("{e:#}"))?;
        outputs.push(data_files(&cfg.out));
    }
    let count = outputs[0].len();
    let identical = outputs.iter().all(|o| *o == outputs[0]);
    require(
        identical && count > 5,
        format!("{count} files compared across 3 runs (1, 4, 4 workers), identical {identical}"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("exact identities", exact_identities),
        ("equilibrium closed form", equilibrium_closed_form),
        ("v-identity and symbol identity", v_and_symbol_identities),
        ("B-coefficient structure", b_structure),
        ("zero-order law", zero_order_law),
        ("first-order law", first_order_law),
        ("whole-circle regime", whole_circle_regime),
        ("kernel-density convergence", kernel_density_convergence),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail}) [{secs:.1}s]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {} {name}: FAIL ({detail}) [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
