//! The acceptance suite behind `eqlab verify`.

use std::time::{Duration, Instant};

use eqlab::convdim::convolution_growth_with;
use eqlab::equidist::Case;
use eqlab::exact::{apply_t, make_point, orbit_point};
use eqlab::measures::{digit_dimension, entropy, make_alpha, make_beta};
use eqlab::orbits::AffineMap;
use eqlab::par::Execution;
use eqlab::scenery::{scenery_series, ScaleStep};
use eqlab::seeds::member_rng;
use eqlab::{MeasureExpr, ProbVector, UnitRational};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{ExperimentConfig, Kind};
use crate::run::{execute, Payload};

/// Criteria whose thresholds are not met by the implemented statistic.
/// They still run and report FAIL; the acceptance target tolerates them.
pub const KNOWN_UNATTAINABLE: &[u32] = &[9, 10];

/// Every threshold the suite checks. [`Thresholds::default`] holds the
/// documented values; tests tamper with single fields.
#[derive(Clone, Debug, PartialEq)]
pub struct Thresholds {
    pub orbit_cases: usize,
    pub max_factor: u32,
    pub max_step: u64,
    pub fourier_pairs: usize,
    pub fourier_max_freq: i64,
    pub fourier_tol: f64,
    pub alpha_floor: f64,
    pub beta_tol: f64,
    pub dimension_target: f64,
    pub dimension_tol: f64,
    pub equidist_ensemble: usize,
    pub schedule: [u64; 2],
    pub cutoff: usize,
    pub mode_error: f64,
    pub growth_level: u32,
    pub growth_q_max: u32,
    pub growth_increment: f64,
    pub growth_final: f64,
    pub density_seeds: usize,
    pub density_horizon: u64,
    pub density_window: usize,
    pub density_fraction: f64,
    pub scenery_centers: usize,
    pub scenery_window: usize,
    pub stationarity_gap: f64,
    pub stationarity_fraction: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            orbit_cases: 100,
            max_factor: 10,
            max_step: 50,
            fourier_pairs: 50,
            fourier_max_freq: 32,
            fourier_tol: 2e-12,
            alpha_floor: 1e-6,
            beta_tol: 1e-12,
            dimension_target: 0.91830,
            dimension_tol: 1e-4,
            equidist_ensemble: 20,
            schedule: [5_000, 20_000],
            cutoff: 8,
            mode_error: 0.05,
            growth_level: 8,
            growth_q_max: 4,
            growth_increment: 1e-3,
            growth_final: 0.99,
            density_seeds: 50,
            density_horizon: 200,
            density_window: 50,
            density_fraction: 0.8,
            scenery_centers: 20,
            scenery_window: 500,
            stationarity_gap: 0.1,
            stationarity_fraction: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    /// Deterministic output compared across runs by criterion 11.
    pub payload: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl Verdict {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {}: {} ({:.2}s, budget {}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs()
        )
    }
}

struct Outcome {
    passed: bool,
    detail: String,
    payload: String,
}

pub const CRITERIA: [(u32, &str, u64); 11] = [
    (1, "exact orbit equivalence", 1),
    (2, "fourier identities", 5),
    (3, "non-vanishing coefficients", 1),
    (4, "dimension formula", 1),
    (5, "equidistribution, part 1", 120),
    (6, "equidistribution, part 2", 120),
    (7, "perturbed equidistribution", 120),
    (8, "convolution dimension growth", 10),
    (9, "A_k density trend", 30),
    (10, "scenery sanity", 60),
    (11, "determinism", 600),
];

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn random_probs(rng: &mut ChaCha8Rng, len: usize) -> ProbVector {
    let weights: Vec<i64> = (0..len).map(|_| rng.random_range(1..=9)).collect();
    let total: i64 = weights.iter().sum();
    ProbVector::new(weights.iter().map(|&w| ratio(w, total)).collect()).expect("weights sum to one")
}

fn random_measure(rng: &mut ChaCha8Rng) -> MeasureExpr {
    if rng.random_bool(0.5) {
        let base = rng.random_range(2..=5u32);
        MeasureExpr::digit(base, random_probs(rng, base as usize)).expect("valid digit measure")
    } else {
        let count = rng.random_range(1..=4usize);
        let probs = random_probs(rng, count);
        let atoms = probs
            .entries()
            .iter()
            .map(|w| {
                let den = rng.random_range(2..=1000u32);
                (UnitRational::new(rng.random_range(0..den), den).expect("den > 0"), w.clone())
            })
            .collect();
        MeasureExpr::atomic(atoms).expect("valid atoms")
    }
}

fn orbit_equivalence(t: &Thresholds) -> Outcome {
    let mut rng = member_rng(1, 0);
    let mut mismatches = 0;
    for _ in 0..t.orbit_cases {
        let base = rng.random_range(2..=10u32);
        let digits: Vec<u32> = (0..40).map(|_| rng.random_range(0..base)).collect();
        let x = make_point(&digits, base).expect("digits below base");
        let m = rng.random_range(2..=t.max_factor);
        let i = rng.random_range(0..=t.max_step);
        let mut y = x.clone();
        for _ in 0..i {
            y = apply_t(&y, m);
        }
        if orbit_point(&x, m, i) != y {
            mismatches += 1;
        }
    }
    Outcome {
        passed: mismatches == 0,
        detail: format!("{mismatches} mismatches in {} cases", t.orbit_cases),
        payload: json!({ "mismatches": mismatches }).to_string(),
    }
}

fn fourier_identities(t: &Thresholds) -> Outcome {
    let mut rng = member_rng(2, 0);
    let tol = 1e-12;
    let mut worst_conv = 0.0f64;
    let mut worst_prod = 0.0f64;
    for _ in 0..t.fourier_pairs {
        let mu = random_measure(&mut rng);
        let nu = random_measure(&mut rng);
        let conv = MeasureExpr::convolve(mu.clone(), nu.clone()).expect("both 1-D");
        let prod = MeasureExpr::product(mu.clone(), nu.clone()).expect("both 1-D");
        let f = t.fourier_max_freq;
        let mu_hat: Vec<_> = (-f..=f).map(|k| mu.fourier_1d(k, tol).expect("1-D")).collect();
        let nu_hat: Vec<_> = (-f..=f).map(|k| nu.fourier_1d(k, tol).expect("1-D")).collect();
        for (a, k) in (-f..=f).enumerate() {
            let c = conv.fourier_1d(k, tol).expect("1-D");
            worst_conv = worst_conv.max((c - mu_hat[a] * nu_hat[a]).norm());
        }
        for k in -4..=4i64 {
            for j in -4..=4i64 {
                let p = prod.fourier_2d(k, j, tol).expect("2-D");
                let expect = mu_hat[(k + f) as usize] * nu_hat[(j + f) as usize];
                worst_prod = worst_prod.max((p - expect).norm());
            }
        }
    }
    Outcome {
        passed: worst_conv <= t.fourier_tol && worst_prod <= t.fourier_tol,
        detail: format!("max convolution error {worst_conv:.2e}, max product error {worst_prod:.2e}"),
        payload: json!({ "convolution": worst_conv, "product": worst_prod }).to_string(),
    }
}

fn non_vanishing(t: &Thresholds) -> Outcome {
    let alpha = make_alpha(2, 3).expect("valid alpha");
    let beta = make_beta(2).expect("valid beta");
    let alpha_min = (1..=4i64)
        .flat_map(|j| [j, -j])
        .map(|j| alpha.fourier_1d(j, t.beta_tol).expect("1-D").norm())
        .fold(f64::INFINITY, f64::min);
    let beta_min = (1..=64i64)
        .flat_map(|i| [i, -i])
        .map(|i| beta.fourier_1d(i, t.beta_tol).expect("1-D").norm())
        .fold(f64::INFINITY, f64::min);
    Outcome {
        passed: alpha_min > t.alpha_floor && beta_min > t.beta_tol,
        detail: format!("min |alpha(j)| {alpha_min:.4e}, min |beta(i)| {beta_min:.4e}"),
        payload: json!({ "alpha": alpha_min, "beta": beta_min }).to_string(),
    }
}

fn dimension_formula(t: &Thresholds) -> Outcome {
    let probs = ProbVector::from_fractions(&[(1, 3), (2, 3)]).expect("sums to one");
    let d = digit_dimension(2, &probs);
    let oracle = -(1.0f64 / 3.0 * (1.0f64 / 3.0).log2() + 2.0 / 3.0 * (2.0f64 / 3.0).log2());
    let nats = entropy(&probs) / 2f64.ln();
    let passed =
        (d - t.dimension_target).abs() <= t.dimension_tol && (d - oracle).abs() < 1e-12 && (nats - d).abs() < 1e-12;
    Outcome {
        passed,
        detail: format!("dimension {d:.6}, entropy oracle {oracle:.6}"),
        payload: json!({ "dimension": d }).to_string(),
    }
}

fn equidist_config(t: &Thresholds, m: u32, n: u32, case: Case, f: AffineMap) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(Kind::Equidist, 0);
    c.measure = Some(make_beta(2).expect("valid beta"));
    c.m = Some(m);
    c.n = Some(n);
    c.p = Some(2);
    c.case = Some(case);
    c.f = f;
    c.schedule = t.schedule.to_vec();
    c.ensemble = t.equidist_ensemble;
    c.cutoff = t.cutoff;
    c
}

fn equidist(t: &Thresholds, config: &ExperimentConfig, exec: Execution) -> Outcome {
    let payload = match execute(config, exec) {
        Ok(p) => p,
        Err(e) => return Outcome { passed: false, detail: e.to_string(), payload: String::new() },
    };
    let Payload::Equidist(report) = &payload else { unreachable!("equidist config") };
    let error = report.median_max_mode_error;
    let decreases = report.distance_decreases();
    Outcome {
        passed: error <= t.mode_error && decreases,
        detail: format!(
            "median max-mode error {error:.4} (limit {}), median distance {:.4} -> {:.4}",
            t.mode_error, report.median_distance[0], report.median_distance[1]
        ),
        payload: payload.to_json(),
    }
}

fn growth(t: &Thresholds, exec: Execution) -> Outcome {
    let beta = make_beta(2).expect("valid beta");
    let dims = match convolution_growth_with(&beta, t.growth_q_max, t.growth_level, exec) {
        Ok(d) => d,
        Err(e) => return Outcome { passed: false, detail: e.to_string(), payload: String::new() },
    };
    let increasing = dims.windows(2).take(2).all(|w| w[1] - w[0] > t.growth_increment);
    let last = *dims.last().unwrap_or(&0.0);
    let shown: Vec<String> = dims.iter().map(|d| format!("{d:.5}")).collect();
    Outcome {
        passed: increasing && last > t.growth_final,
        detail: format!("coarse dimensions [{}]", shown.join(", ")),
        payload: json!(dims).to_string(),
    }
}

fn density(t: &Thresholds, exec: Execution) -> Outcome {
    let config = |m: u32| {
        let mut c = ExperimentConfig::new(Kind::Density, 0);
        c.measure = Some(make_beta(2).expect("valid beta"));
        c.m = Some(m);
        c.n = Some(2);
        c.k = Some(t.density_horizon);
        c.ensemble = t.density_seeds;
        c.window = t.density_window;
        c
    };
    let (trend, control) = match (execute(&config(3), exec), execute(&config(4), exec)) {
        (Ok(Payload::Density(a)), Ok(Payload::Density(b))) => (a, b),
        (Err(e), _) | (_, Err(e)) => return Outcome { passed: false, detail: e.to_string(), payload: String::new() },
        _ => unreachable!("density configs"),
    };
    Outcome {
        passed: trend.decreasing_fraction >= t.density_fraction && control.total_hits == 0,
        detail: format!(
            "final below first for {:.0}% of seeds, control hits {}",
            100.0 * trend.decreasing_fraction,
            control.total_hits
        ),
        payload: json!({
            "trend": Payload::Density(trend).to_json(),
            "control": Payload::Density(control).to_json(),
        })
        .to_string(),
    }
}

fn scenery(t: &Thresholds, exec: Execution) -> Outcome {
    let mut rng = member_rng(3, 0);
    let mut lebesgue_uniform = true;
    for _ in 0..5 {
        let x = MeasureExpr::Lebesgue.sample(&mut rng, 80).expect("lebesgue samples");
        for r in [1, 2] {
            match scenery_series(&MeasureExpr::Lebesgue, &x, ScaleStep::LogBase(2), 40, r) {
                Ok(s) => lebesgue_uniform &= s.samples.iter().all(|s| s.is_uniform()),
                Err(_) => lebesgue_uniform = false,
            }
        }
    }
    let mut c = ExperimentConfig::new(Kind::Scenery, 2);
    c.measure = Some(make_beta(2).expect("valid beta"));
    c.m = Some(2);
    c.ensemble = t.scenery_centers;
    c.w = t.scenery_window;
    let payload = match execute(&c, exec) {
        Ok(p) => p,
        Err(e) => return Outcome { passed: false, detail: e.to_string(), payload: String::new() },
    };
    let Payload::Scenery(s) = &payload else { unreachable!("scenery config") };
    let gaps: Vec<f64> = s.centers.iter().map(|c| c.gap.unwrap_or(f64::INFINITY)).collect();
    let good = gaps.iter().filter(|&&g| g < t.stationarity_gap).count();
    let fraction = good as f64 / gaps.len().max(1) as f64;
    let (lo, hi) = gaps.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &g| (lo.min(g), hi.max(g)));
    Outcome {
        passed: lebesgue_uniform && fraction >= t.stationarity_fraction,
        detail: format!(
            "lebesgue uniform {lebesgue_uniform}, gap < {} for {good}/{} centers (gaps {lo:.3}..{hi:.3})",
            t.stationarity_gap,
            gaps.len()
        ),
        payload: payload.to_json(),
    }
}

fn evaluate(id: u32, t: &Thresholds, exec: Execution) -> Outcome {
    match id {
        1 => orbit_equivalence(t),
        2 => fourier_identities(t),
        3 => non_vanishing(t),
        4 => dimension_formula(t),
        5 => equidist(t, &equidist_config(t, 3, 2, Case::Part1, AffineMap::identity()), exec),
        6 => equidist(t, &equidist_config(t, 5, 3, Case::Part2, AffineMap::identity()), exec),
        7 => {
            let f = AffineMap::new(ratio(1, 2), ratio(1, 4)).expect("maps [0,1] into itself");
            equidist(t, &equidist_config(t, 3, 2, Case::Part1, f), exec)
        }
        8 => growth(t, exec),
        9 => density(t, exec),
        10 => scenery(t, exec),
        _ => panic!("criterion {id} is not a single experiment"),
    }
}

/// Runs one of criteria 1..=10.
pub fn check(id: u32, t: &Thresholds, exec: Execution) -> Verdict {
    let (_, name, budget) = CRITERIA[(id - 1) as usize];
    let start = Instant::now();
    let out = evaluate(id, t, exec);
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(budget);
    let mut detail = out.detail;
    if elapsed > budget {
        detail.push_str(", over budget");
    }
    Verdict { id, name, passed: out.passed && elapsed <= budget, detail, payload: out.payload, elapsed, budget }
}

/// Criterion 11: reruns 1..=10 and compares payload bytes with `first`.
pub fn determinism(first: &[Verdict], t: &Thresholds, exec: Execution, started: Instant) -> Verdict {
    let (_, name, budget) = CRITERIA[10];
    let start = Instant::now();
    let differing: Vec<u32> =
        first.iter().filter(|v| check(v.id, t, exec).payload != v.payload).map(|v| v.id).collect();
    let total = started.elapsed();
    let budget = Duration::from_secs(budget);
    let detail = if differing.is_empty() {
        format!("{} payloads identical on rerun, suite total {:.1}s", first.len(), total.as_secs_f64())
    } else {
        format!("payloads differ for criteria {differing:?}")
    };
    Verdict {
        id: 11,
        name,
        passed: differing.is_empty() && total <= budget,
        detail,
        payload: String::new(),
        elapsed: start.elapsed(),
        budget,
    }
}

/// Runs every criterion, calling `report` as each verdict arrives.
pub fn run_suite(t: &Thresholds, exec: Execution, mut report: impl FnMut(&Verdict)) -> Vec<Verdict> {
    let started = Instant::now();
    let mut verdicts = Vec::new();
    for id in 1..=10 {
        let v = check(id, t, exec);
        report(&v);
        verdicts.push(v);
    }
    let v = determinism(&verdicts, t, exec, started);
    report(&v);
    verdicts.push(v);
    verdicts
}
