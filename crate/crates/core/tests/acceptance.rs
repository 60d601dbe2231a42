//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.
//!
//!     cargo test -p subaudit-core --test acceptance [-- 2 5]
//!
//! Positional arguments select criteria by number; none runs them all.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use subaudit_core::cohort::{partition, Race, Sex, SubgroupKey};
use subaudit_core::featspace::{kde, pca_fit, Bandwidth, FeatureMatrix};
use subaudit_core::hyptest::{
    benjamini_yekutieli, conover_iman, kruskal_wallis, ks_statistic, ks_two_sample, levene, shapiro_wilk, Centering,
};
use subaudit_core::numerics::{
    chisq_sf, f_sf, kolmogorov_sf, normal_sf, reg_incomplete_beta, reg_incomplete_gamma_q, student_t_sf,
};
use subaudit_core::pipeline::{calibrate, run_audit, ArmSelection, AuditConfig, AuditReport, CalibrationConfig};
use subaudit_core::report::write_outputs;
use subaudit_core::synth::{generate_cohort, CohortSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

/// Fails the criterion when the check did not hold.
fn all(checks: &[(bool, String)]) -> Outcome {
    let failed: Vec<&str> = checks.iter().filter(|(ok, _)| !ok).map(|(_, m)| m.as_str()).collect();
    if failed.is_empty() {
        let detail: Vec<&str> = checks.iter().map(|(_, m)| m.as_str()).collect();
        Outcome::new(true, detail.join("; "))
    } else {
        Outcome::new(false, failed.join("; "))
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Box-Muller, kept separate from the library's sampler.
fn normal(r: &mut ChaCha8Rng) -> f64 {
    let u: f64 = 1.0 - r.random::<f64>();
    let v: f64 = r.random::<f64>();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

// ---------------------------------------------------------------- 1

fn exactness() -> Outcome {
    let kw = kruskal_wallis(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]]).unwrap();
    let by = benjamini_yekutieli(&[0.01, 0.02, 0.03, 0.04]).unwrap();
    let target = 0.04 * (1.0 + 0.5 + 1.0 / 3.0 + 0.25);
    let ks = ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[1.5, 2.5, 3.5, 4.5]).unwrap();
    all(&[
        ((kw.statistic - 7.2).abs() <= 1e-9, format!("H = {}", kw.statistic)),
        (
            (kw.p_value.get() - (-3.6f64).exp()).abs() <= 1e-9,
            format!("p = {:e} vs e^-3.6 = {:e}", kw.p_value.get(), (-3.6f64).exp()),
        ),
        (
            by.iter().all(|q| (q.get() - target).abs() <= 1e-12),
            format!("BY = {:?}", by.iter().map(|q| q.get()).collect::<Vec<_>>()),
        ),
        (ks.statistic == 0.25, format!("D = {}", ks.statistic)),
    ])
}

// ---------------------------------------------------------------- 2

#[derive(Deserialize)]
struct OracleFile {
    scipy: String,
    scikit_posthocs: String,
    datasets: Vec<OracleSet>,
}

#[derive(Deserialize)]
struct OracleSet {
    seed: u64,
    tied: bool,
    groups: Vec<Vec<f64>>,
    shapiro_p: Vec<f64>,
    conover_p: Vec<Vec<f64>>,
}

const PERMUTATIONS: usize = 100_000;

/// Midranks of the pooled values.
fn pooled_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// `Σ R_i² / n_i`; with ranks fixed, H is increasing in it.
fn rank_score(ranks: &[f64], labels: &[usize], k: usize) -> f64 {
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (r, &l) in ranks.iter().zip(labels) {
        sums[l] += r;
        counts[l] += 1;
    }
    sums.iter().zip(&counts).map(|(s, &n)| s * s / n as f64).sum()
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn split(values: &[f64], labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); k];
    for (&v, &l) in values.iter().zip(labels) {
        groups[l].push(v);
    }
    groups
}

/// `|x - median|` within each group.
fn deviations(groups: &[Vec<f64>]) -> Vec<Vec<f64>> {
    groups
        .iter()
        .map(|g| {
            let m = median(&mut g.clone());
            g.iter().map(|x| (x - m).abs()).collect()
        })
        .collect()
}

/// One-way ANOVA F of already-centred deviations.
fn anova_f(z: &[Vec<f64>]) -> f64 {
    let k = z.len();
    let n: f64 = z.iter().map(|g| g.len()).sum::<usize>() as f64;
    let means: Vec<f64> = z.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
    let grand = z.iter().flatten().sum::<f64>() / n;
    let between: f64 = z
        .iter()
        .zip(&means)
        .map(|(g, m)| g.len() as f64 * (m - grand).powi(2))
        .sum();
    let within: f64 = z
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|x| (x - m).powi(2)).sum::<f64>())
        .sum();
    (n - k as f64) / (k as f64 - 1.0) * between / within
}

/// Share of label permutations whose statistic reaches the observed one.
fn permutation_p(labels: &[usize], seed: u64, stat: impl Fn(&[usize]) -> f64) -> f64 {
    let observed = stat(labels);
    let slack = 1e-12 * observed.abs().max(1.0);
    let mut r = rng(seed);
    let mut perm = labels.to_vec();
    let mut hits = 0usize;
    for _ in 0..PERMUTATIONS {
        perm.shuffle(&mut r);
        if stat(&perm) >= observed - slack {
            hits += 1;
        }
    }
    (hits + 1) as f64 / (PERMUTATIONS + 1) as f64
}

fn oracle_equivalence() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/oracle.json");
    let file: OracleFile = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let (mut kw_worst, mut lev_worst, mut kw_n, mut lev_n) = (0.0f64, 0.0f64, 0, 0);
    let (mut sw_worst, mut cv_worst, mut lev_raw_worst) = (0.0f64, 0.0f64, 0.0f64);
    let mut misses = Vec::new();
    for set in &file.datasets {
        let k = set.groups.len();
        let values: Vec<f64> = set.groups.iter().flatten().copied().collect();
        let labels: Vec<usize> = set
            .groups
            .iter()
            .enumerate()
            .flat_map(|(g, v)| vec![g; v.len()])
            .collect();

        let kw = kruskal_wallis(&set.groups).unwrap().p_value.get();
        let ranks = pooled_ranks(&values);
        let kw_oracle = permutation_p(&labels, set.seed, |l| rank_score(&ranks, l, k));
        if (0.01..=0.99).contains(&kw_oracle) {
            kw_n += 1;
            let d = (kw - kw_oracle).abs();
            kw_worst = kw_worst.max(d);
            if d > 0.01 {
                misses.push(format!(
                    "KW set {} tied={} p={kw:.4} perm={kw_oracle:.4}",
                    set.seed, set.tied
                ));
            }
        }

        let lev = levene(&set.groups, Centering::Median).unwrap().p_value.get();
        // deviations are fixed and relabelled, the ANOVA form of the test
        let z: Vec<f64> = deviations(&set.groups).into_iter().flatten().collect();
        let lev_oracle = permutation_p(&labels, set.seed + 1000, |l| anova_f(&split(&z, l, k)));
        // raw values relabelled and re-centred, for the record
        let raw = permutation_p(&labels, set.seed + 2000, |l| {
            anova_f(&deviations(&split(&values, l, k)))
        });
        if (0.01..=0.99).contains(&raw) {
            lev_raw_worst = lev_raw_worst.max((lev - raw).abs());
        }
        if (0.01..=0.99).contains(&lev_oracle) {
            lev_n += 1;
            let d = (lev - lev_oracle).abs();
            lev_worst = lev_worst.max(d);
            if d > 0.01 {
                misses.push(format!(
                    "Levene set {} tied={} p={lev:.4} perm={lev_oracle:.4}",
                    set.seed, set.tied
                ));
            }
        }

        for (g, expected) in set.groups.iter().zip(&set.shapiro_p) {
            let d = (shapiro_wilk(g).unwrap().p_value.get() - expected).abs();
            sw_worst = sw_worst.max(d);
            if d > 1e-3 {
                misses.push(format!("SW set {} n={} |dp|={d:.2e}", set.seed, g.len()));
            }
        }

        let labels: Vec<String> = (0..k).map(|g| g.to_string()).collect();
        let cv = conover_iman(&set.groups, &labels).unwrap();
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                let d = (cv.p_matrix[i][j].get() - set.conover_p[i][j]).abs();
                cv_worst = cv_worst.max(d);
                if d > 1e-3 {
                    misses.push(format!("Conover set {} ({i},{j}) |dp|={d:.2e}", set.seed));
                }
            }
        }
    }
    let detail = format!(
        "{} sets; KW max|dp| {kw_worst:.4} over {kw_n}, Levene max|dp| {lev_worst:.4} over {lev_n} \
         ({PERMUTATIONS} permutations; {lev_raw_worst:.4} when raw values are relabelled); SW max|dp| {sw_worst:.1e}, Conover max|dp| {cv_worst:.1e} \
         vs scipy {} / scikit-posthocs {}",
        file.datasets.len(),
        file.scipy,
        file.scikit_posthocs
    );
    if misses.is_empty() {
        Outcome::new(true, detail)
    } else {
        Outcome::new(false, format!("{detail}; misses: {}", misses.join(", ")))
    }
}

// ---------------------------------------------------------------- 3

fn calibration() -> Outcome {
    let config = CalibrationConfig {
        seed: 2024,
        ..CalibrationConfig::default()
    };
    let summary = calibrate(&config).unwrap();
    let outside: Vec<String> = summary
        .rates
        .iter()
        .filter(|r| !(0.035..=0.065).contains(&r.rate))
        .map(|r| format!("{} {:.3}", r.test, r.rate))
        .collect();
    let lo = summary.rates.iter().map(|r| r.rate).fold(f64::INFINITY, f64::min);
    let hi = summary.rates.iter().map(|r| r.rate).fold(0.0, f64::max);
    let detail = format!(
        "{} trials, {} tests, rates in [{lo:.3}, {hi:.3}]",
        config.trials,
        summary.rates.len()
    );
    if outside.is_empty() {
        Outcome::new(true, detail)
    } else {
        Outcome::new(
            false,
            format!("{detail}; outside [0.035, 0.065]: {}", outside.join(", ")),
        )
    }
}

// ---------------------------------------------------------------- 4

const POWER_SEEDS: u64 = 200;
const GROUP: usize = 126;

/// Tie-free H from scratch.
fn h_statistic(groups: &[Vec<f64>]) -> f64 {
    let values: Vec<f64> = groups.iter().flatten().copied().collect();
    let labels: Vec<usize> = groups.iter().enumerate().flat_map(|(g, v)| vec![g; v.len()]).collect();
    let n = values.len() as f64;
    let score = rank_score(&pooled_ranks(&values), &labels, groups.len());
    12.0 / (n * (n + 1.0)) * score - 3.0 * (n + 1.0)
}

/// Upper 5% point of chi-square with 5 degrees of freedom.
const CHISQ5_95: f64 = 11.070497693516351;

fn power_oracle(reps: usize) -> f64 {
    let mut r = rng(99);
    let mut hits = 0;
    for _ in 0..reps {
        let groups: Vec<Vec<f64>> = (0..6)
            .map(|g| {
                let bias = if g == 2 { 1.0 } else { 0.0 };
                (0..GROUP).map(|_| (bias + 2.0 * normal(&mut r)).abs()).collect()
            })
            .collect();
        if h_statistic(&groups) > CHISQ5_95 {
            hits += 1;
        }
    }
    hits as f64 / reps as f64
}

fn power_performance() -> Outcome {
    let reps = 4000;
    let oracle = power_oracle(reps);
    let config = AuditConfig {
        seed: 1,
        ..AuditConfig::default()
    };
    let mut detected = 0;
    for seed in 0..POWER_SEEDS {
        let mut spec = CohortSpec::uniform(GROUP, seed);
        spec.features.dim = 2;
        for s in &mut spec.subgroups {
            s.error.sd = 2.0;
        }
        spec.subgroup_mut(SubgroupKey::new(Race::Black, Sex::Female))
            .unwrap()
            .error
            .bias = 1.0;
        let (records, _) = generate_cohort(&spec).unwrap();
        let part = partition(records).unwrap();
        let cfg = AuditConfig { seed, ..config.clone() };
        let report = run_audit(&part, None, &cfg, ArmSelection::PERFORMANCE, vec![], false).unwrap();
        let balanced = report.performance.present().unwrap().balanced.as_ref().unwrap();
        if balanced.battery.kruskal.p_value.get() < 0.05 {
            detected += 1;
        }
    }
    let rate = detected as f64 / POWER_SEEDS as f64;
    // 3 binomial SDs of the difference between two independent estimates
    let sd = (oracle * (1.0 - oracle) * (1.0 / reps as f64 + 1.0 / POWER_SEEDS as f64)).sqrt();
    let agrees = (rate - oracle).abs() <= 3.0 * sd;
    Outcome::new(
        rate >= 0.90,
        format!(
            "balanced KW detection {rate:.3} over {POWER_SEEDS} seeds (target >= 0.90); \
             Monte Carlo oracle of the same model {oracle:.3} over {reps} reps; \
             pipeline {} the oracle within 3 SD",
            if agrees { "matches" } else { "DIFFERS FROM" }
        ),
    )
}

fn power_features() -> Outcome {
    let dim = 8;
    let mut flagged = 0;
    let mut other_modes = 0;
    for seed in 0..POWER_SEEDS {
        let mut spec = CohortSpec::uniform(GROUP, seed);
        spec.features.dim = dim;
        spec.features.loading = 0.0;
        let mut offset = vec![0.0; dim];
        offset[0] = spec.features.noise_sd;
        for s in &mut spec.subgroups {
            if s.race == Race::Black {
                s.feature_offset = offset.clone();
            }
        }
        let (records, features) = generate_cohort(&spec).unwrap();
        let part = partition(records).unwrap();
        let cfg = AuditConfig {
            seed,
            ..AuditConfig::default()
        };
        let report = run_audit(&part, Some(&features), &cfg, ArmSelection::FEATURES, vec![], false).unwrap();
        let table = &report.features.present().unwrap().all_subjects;
        let hit = |mode: usize| {
            ["White/Black", "Black/Asian"]
                .iter()
                .any(|c| table.cell(mode, c).is_some_and(|r| r.significant))
        };
        if hit(1) {
            flagged += 1;
        }
        if (2..=4).any(hit) {
            other_modes += 1;
        }
    }
    let rate = flagged as f64 / POWER_SEEDS as f64;
    Outcome::new(
        rate >= 0.90,
        format!(
            "mode 1 flagged after BY in {rate:.3} of {POWER_SEEDS} seeds (target >= 0.90); \
             Black comparisons flagged on modes 2-4 in {other_modes} seeds"
        ),
    )
}

// ---------------------------------------------------------------- 5

const PROPERTY_CASES: usize = 100_000;

fn pca_properties() -> (bool, String) {
    let (n, d) = (300, 12);
    let mut r = rng(5);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|j| normal(&mut r) * (1.0 + j as f64 * 0.3)).collect())
        .collect();
    let x = FeatureMatrix::from_rows(&rows).unwrap();
    let m = pca_fit(&x, d).unwrap();
    let mut ortho = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let dot: f64 = m.components[i].iter().zip(&m.components[j]).map(|(a, b)| a * b).sum();
            ortho = ortho.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    let descending = m.explained_variance.windows(2).all(|w| w[0] >= w[1]);
    let mut recon = 0.0f64;
    for row in &rows {
        let back = m.reconstruct_row(&m.project_row(row));
        for (a, b) in back.iter().zip(row) {
            recon = recon.max((a - b).abs());
        }
    }
    (
        ortho <= 1e-10 && descending && recon <= 1e-8,
        format!("PCA max|VVt-I| {ortho:.1e}, descending {descending}, reconstruction {recon:.1e}"),
    )
}

/// One random tail case: `(lower, upper)` evaluated at `x1 <= x2`, with
/// `decreasing` true for survival functions.
fn tail_case(r: &mut ChaCha8Rng) -> (&'static str, f64, f64, bool) {
    let a: f64 = r.random_range(0.0..60.0);
    let b: f64 = r.random_range(0.0..60.0);
    let (x1, x2) = if a <= b { (a, b) } else { (b, a) };
    match r.random_range(0..7) {
        0 => {
            let df = r.random_range(1..200u32);
            (
                "chisq",
                chisq_sf(x1, df).unwrap().get(),
                chisq_sf(x2, df).unwrap().get(),
                true,
            )
        }
        1 => {
            let df = r.random_range(0.5..500.0);
            let (t1, t2) = (x1 - 30.0, x2 - 30.0);
            (
                "t",
                student_t_sf(t1, df).unwrap().get(),
                student_t_sf(t2, df).unwrap().get(),
                true,
            )
        }
        2 => {
            let d1 = r.random_range(1..100u32);
            let d2 = r.random_range(1..1000u32);
            let (f1, f2) = (x1 / 6.0, x2 / 6.0);
            (
                "F",
                f_sf(f1, d1, d2).unwrap().get(),
                f_sf(f2, d1, d2).unwrap().get(),
                true,
            )
        }
        3 => {
            let (k1, k2) = (x1 / 20.0, x2 / 20.0);
            (
                "kolmogorov",
                kolmogorov_sf(k1).unwrap().get(),
                kolmogorov_sf(k2).unwrap().get(),
                true,
            )
        }
        4 => {
            let (z1, z2) = (x1 / 2.0 - 15.0, x2 / 2.0 - 15.0);
            ("normal", normal_sf(z1).get(), normal_sf(z2).get(), true)
        }
        5 => {
            let s = r.random_range(0.01..100.0);
            let q1 = reg_incomplete_gamma_q(s, x1 * 2.0).unwrap().get();
            let q2 = reg_incomplete_gamma_q(s, x2 * 2.0).unwrap().get();
            ("gamma Q", q1, q2, true)
        }
        _ => {
            let p = r.random_range(0.01..50.0);
            let q = r.random_range(0.01..50.0);
            let (u1, u2) = (x1 / 60.0, x2 / 60.0);
            let i1 = reg_incomplete_beta(p, q, u1).unwrap().get();
            let i2 = reg_incomplete_beta(p, q, u2).unwrap().get();
            ("beta I", i1, i2, false)
        }
    }
}

fn tail_properties() -> (bool, String) {
    let mut r = rng(17);
    let mut bad: BTreeMap<&str, usize> = BTreeMap::new();
    for _ in 0..PROPERTY_CASES {
        let (name, v1, v2, decreasing) = tail_case(&mut r);
        let in_range = (0.0..=1.0).contains(&v1) && (0.0..=1.0).contains(&v2);
        let ordered = if decreasing { v1 >= v2 } else { v1 <= v2 };
        if !(in_range && ordered) {
            *bad.entry(name).or_default() += 1;
        }
    }
    (
        bad.is_empty(),
        if bad.is_empty() {
            format!("{PROPERTY_CASES} tail cases monotone and in [0, 1]")
        } else {
            format!("tail violations {bad:?} in {PROPERTY_CASES} cases")
        },
    )
}

fn kde_properties() -> (bool, String) {
    let mut r = rng(8);
    let mut worst = 0.0f64;
    for n in [2usize, 5, 30, 500] {
        for rule in [Bandwidth::Scott, Bandwidth::Silverman, Bandwidth::Fixed(0.7)] {
            let v: Vec<f64> = (0..n).map(|_| normal(&mut r) * 3.0 + 10.0).collect();
            let c = kde(&v, 128, rule).unwrap();
            worst = worst.max((c.integral() - 1.0).abs());
        }
    }
    (worst <= 0.01, format!("KDE max|integral-1| {worst:.1e}"))
}

fn rank_invariance() -> (bool, String) {
    let mut r = rng(9);
    let mut broken = 0;
    let cases = 200;
    for _ in 0..cases {
        let groups: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..20).map(|_| (normal(&mut r) * 4.0).round() / 4.0).collect())
            .collect();
        let moved: Vec<Vec<f64>> = groups
            .iter()
            .map(|g| g.iter().map(|x| (x / 3.0).exp() + 7.0).collect())
            .collect();
        let h = kruskal_wallis(&groups).unwrap().statistic;
        let h2 = kruskal_wallis(&moved).unwrap().statistic;
        let d = ks_statistic(&groups[0], &groups[1]).unwrap();
        let d2 = ks_statistic(&moved[0], &moved[1]).unwrap();
        if h.to_bits() != h2.to_bits() || d.to_bits() != d2.to_bits() {
            broken += 1;
        }
    }
    (
        broken == 0,
        format!(
            "KW/KS bit-identical under exp transform in {}/{cases} cases",
            cases - broken
        ),
    )
}

fn numerical_properties() -> Outcome {
    all(&[pca_properties(), tail_properties(), kde_properties(), rank_invariance()])
}

// ---------------------------------------------------------------- 6

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn audit_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let spec = {
        let mut s = CohortSpec::uniform(80, 4);
        s.subgroup_mut(SubgroupKey::new(Race::Asian, Sex::Male)).unwrap().count = 45;
        s.other.count = 9;
        s.features.dim = 24;
        s
    };
    let (records, features) = generate_cohort(&spec).unwrap();
    let part = partition(records).unwrap();
    let config = AuditConfig {
        seed: 31,
        ..AuditConfig::default()
    };
    let report: AuditReport = run_audit(&part, Some(&features), &config, ArmSelection::ALL, vec![], false).unwrap();
    write_outputs(&report, dir).unwrap();
    let mut files = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        files.insert(
            e.file_name().to_string_lossy().into_owned(),
            std::fs::read(e.path()).unwrap(),
        );
    }
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let runs: Vec<BTreeMap<String, Vec<u8>>> = [1usize, 1, 4]
        .iter()
        .enumerate()
        .map(|(i, &t)| in_pool(t, || audit_files(&tmp.path().join(format!("run{i}")))))
        .collect();
    let svg = runs[0].keys().filter(|k| k.ends_with(".svg")).count();
    let same_audit = runs[1..].iter().all(|r| r == &runs[0]);

    let cal = |t| {
        in_pool(t, || {
            let c = CalibrationConfig {
                trials: 100,
                group_size: 30,
                feature_dim: 6,
                seed: 3,
                ..Default::default()
            };
            serde_json::to_string(&calibrate(&c).unwrap()).unwrap()
        })
    };
    let same_cal = cal(1) == cal(4);
    all(&[
        (
            same_audit && runs[0].contains_key("report.json") && svg >= 5,
            format!(
                "audit: {} files ({svg} SVG) identical over pools 1, 1, 4",
                runs[0].len()
            ),
        ),
        (same_cal, "calibration summary identical over pools 1, 4".into()),
    ])
}

// ---------------------------------------------------------------- 7

fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn scale() -> Outcome {
    let mut spec = CohortSpec::default();
    spec.features.dim = 512;
    let extra = 50_000 - spec.total();
    spec.subgroups[0].count += extra / 2;
    spec.subgroups[1].count += extra - extra / 2;
    assert_eq!(spec.total(), 50_000);
    let t0 = Instant::now();
    let (records, features) = generate_cohort(&spec).unwrap();
    let generated = t0.elapsed();
    let tmp = tempfile::tempdir().unwrap();
    let t1 = Instant::now();
    let part = partition(records).unwrap();
    let config = AuditConfig {
        seed: 1,
        ..AuditConfig::default()
    };
    let report = run_audit(&part, Some(&features), &config, ArmSelection::ALL, vec![], false).unwrap();
    write_outputs(&report, tmp.path()).unwrap();
    let audit = t1.elapsed();
    let peak = peak_rss_kib();
    let peak_gib = peak.map(|k| k as f64 / (1024.0 * 1024.0));
    let threads = rayon::current_num_threads();
    Outcome::new(
        audit < Duration::from_secs(60) && peak_gib.is_some_and(|g| g < 4.0),
        format!(
            "50000 x 512 audit + outputs {:.1}s (generation {:.1}s), peak RSS {} on {threads} thread(s)",
            audit.as_secs_f64(),
            generated.as_secs_f64(),
            peak_gib.map_or("unknown".into(), |g| format!("{g:.2} GiB"))
        ),
    )
}

// ---------------------------------------------------------------- 8

fn shape_snapshot(report: &AuditReport) -> String {
    let mut s = String::new();
    let perf = report.performance.present().unwrap();
    let mut pass = |name: &str, p: &subaudit_core::pipeline::PerformancePass| {
        s.push_str(&format!(
            "{name}: shapiro {} levene 1 kruskal 1 race {:?} {} pairs sex {:?} {} pair\n",
            p.shapiro.len(),
            p.posthoc_race.labels,
            p.posthoc_race.pairs().len(),
            p.posthoc_sex.labels,
            p.posthoc_sex.pairs().len()
        ));
    };
    pass("full", perf.full.as_ref().unwrap());
    let b = perf.balanced.as_ref().unwrap();
    pass("balanced", &b.battery);
    s.push_str(&format!(
        "balanced n {} repeats {}\n",
        b.sample_size, b.repeated.repeats
    ));
    let f = report.features.present().unwrap();
    for (name, t) in [
        ("ks all", &f.all_subjects),
        ("ks balanced", &f.balanced.as_ref().unwrap().table),
    ] {
        let adjusted = t.rows.iter().filter(|r| r.adjusted_p.is_some()).count();
        s.push_str(&format!(
            "{name}: modes {:?} comparisons {:?} adjusted {adjusted}/{}\n",
            t.modes,
            t.comparisons,
            t.rows.len()
        ));
    }
    s
}

const SHAPE: &str = "\
full: shapiro 6 levene 1 kruskal 1 race [\"White\", \"Black\", \"Asian\"] 3 pairs sex [\"Female\", \"Male\"] 1 pair
balanced: shapiro 6 levene 1 kruskal 1 race [\"White\", \"Black\", \"Asian\"] 3 pairs sex [\"Female\", \"Male\"] 1 pair
balanced n 126 repeats 10
ks all: modes [1, 2, 3, 4] comparisons [\"Age 40-60/60-90\", \"Asian/White\", \"Black/Asian\", \"White/Black\", \"Female/Male\"] adjusted 20/20
ks balanced: modes [1, 2, 3, 4] comparisons [\"Age 40-60/60-90\", \"Asian/White\", \"Black/Asian\", \"White/Black\", \"Female/Male\"] adjusted 20/20
";

fn workflow_shape() -> Outcome {
    let mut spec = CohortSpec::default();
    spec.features.dim = 16;
    let (records, features) = generate_cohort(&spec).unwrap();
    let part = partition(records).unwrap();
    let config = AuditConfig {
        seed: 8,
        ..AuditConfig::default()
    };
    let report = run_audit(&part, Some(&features), &config, ArmSelection::ALL, vec![], false).unwrap();
    let snap = shape_snapshot(&report);
    if snap == SHAPE {
        Outcome::new(true, "default cohort battery matches the snapshot")
    } else {
        Outcome::new(false, format!("snapshot differs:\n{snap}"))
    }
}

// ----------------------------------------------------------------

type Criterion = (&'static str, &'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("1", "hand-derived exactness", Duration::from_secs(1), exactness),
        ("2", "oracle equivalence", Duration::from_secs(300), oracle_equivalence),
        ("3", "null calibration", Duration::from_secs(600), calibration),
        (
            "4a",
            "power, performance arm",
            Duration::from_secs(600),
            power_performance,
        ),
        ("4b", "power, feature arm", Duration::from_secs(600), power_features),
        (
            "5",
            "numerical properties",
            Duration::from_secs(600),
            numerical_properties,
        ),
        ("6", "determinism", Duration::from_secs(600), determinism),
        ("7", "scale", Duration::from_secs(600), scale),
        ("8", "workflow shape", Duration::from_secs(600), workflow_shape),
    ];
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected = |id: &str| wanted.is_empty() || wanted.iter().any(|w| id.starts_with(w.as_str()));
    let mut failed = 0;
    let mut run = 0;
    for (id, name, budget, f) in criteria {
        if !selected(id) {
            continue;
        }
        let t = Instant::now();
        let mut outcome = f();
        let elapsed = t.elapsed();
        if elapsed > budget {
            outcome.pass = false;
            outcome
                .detail
                .push_str(&format!("; over the {}s budget", budget.as_secs()));
        }
        run += 1;
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "{} {id:<2} {name} [{:.1}s] {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            outcome.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", run - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
