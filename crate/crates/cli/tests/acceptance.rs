//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero when a criterion fails that is not listed in [`KNOWN_RED`].
//!
//! Run with `cargo test -p claimscore-cli --test acceptance`. Pass criterion
//! numbers as arguments to run a subset, e.g. `-- 1 5 8`.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use claimscore::claim_score::step;
use claimscore::fitter::{fit_pirls, penalized_loglik, score_vector};
use claimscore::gini::{argmin_row_maxima, gini_index, minimax_select, ordered_lorenz, ratio_gini};
use claimscore::model::{expected_losses, fit_component, fit_model, lr_test, Component, Experience, ScoreTables};
use claimscore::optimizer::{enumerate_grid, feasible};
use claimscore::portfolio::{simulate, History};
use claimscore::{
    ClaimScoreConfig, ConstrainedBasis, Design, Family, FitSettings, GridSpec, ModelSpec, Portfolio, Schema, ScoreState,
    SimulationConfig, SplineBasis,
};
use claimscore_cli::{run, Cli, Command, CommonArgs};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};

/// Criteria that cannot pass as written, with the reason. They still print
/// `FAIL`; they just do not fail the test binary.
const KNOWN_RED: &[(u8, &str)] = &[(
    8,
    "the stated total 4048 contradicts the stated rules: sum over s=3..25 of (s-1)(s-2) is 4600; 4048 is the sum to s=24",
)];

struct Check {
    notes: Vec<String>,
    failed: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Self { notes: Vec::new(), failed: Vec::new() }
    }

    fn expect(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if ok {
            self.notes.push(what);
        } else {
            self.failed.push(what);
        }
    }
}

type Criterion = (u8, &'static str, Duration, fn(&mut Check));

fn main() {
    let selected: BTreeSet<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: &[Criterion] = &[
        (1, "claim-score suite", Duration::from_secs(1), claim_score_suite),
        (2, "spline suite", Duration::from_secs(5), spline_suite),
        (3, "fitter correctness", Duration::from_secs(120), fitter_suite),
        (4, "gini suite", Duration::from_secs(60), gini_suite),
        (5, "mini-max anchor", Duration::from_secs(1), minimax_anchor),
        (6, "likelihood-ratio degrees of freedom", Duration::from_secs(120), lr_dof_anchor),
        (7, "end-to-end discrimination", Duration::from_secs(900), discrimination),
        (8, "grid bookkeeping", Duration::from_secs(1), grid_bookkeeping),
        (9, "determinism", Duration::from_secs(600), determinism),
    ];
    let mut unexpected = Vec::new();
    for &(id, name, budget, body) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let mut check = Check::new();
        let outcome = catch_unwind(AssertUnwindSafe(|| body(&mut check)));
        let elapsed = start.elapsed();
        if let Err(panic) = outcome {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            check.failed.push(format!("panicked: {msg}"));
        }
        check.expect(elapsed <= budget, format!("runtime {:.2}s within {}s", elapsed.as_secs_f64(), budget.as_secs()));
        let pass = check.failed.is_empty();
        let detail = if pass { check.notes.join("; ") } else { check.failed.join("; ") };
        println!("{} {id} {name} ({:.2}s): {detail}", if pass { "PASS" } else { "FAIL" }, elapsed.as_secs_f64());
        if !pass {
            match KNOWN_RED.iter().find(|(k, _)| *k == id) {
                Some((_, why)) => println!("     known failure: {why}"),
                None => unexpected.push(id),
            }
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// 1

fn claim_score_suite(c: &mut Check) {
    let cfg = |psi, s, l0| ClaimScoreConfig::new(psi, s, l0).unwrap();
    let go = |l: f64, e: f64, n: u32, k: &ClaimScoreConfig| step(ScoreState::new(l, k).unwrap(), e, n, k).unwrap().level();
    let worked = [
        (go(2.0, 1.0, 0, &cfg(2, 5, 2)), 3.0),
        (go(5.0, 1.0, 0, &cfg(2, 5, 2)), 5.0),
        (go(2.0, 1.0, 1, &cfg(2, 5, 2)), 1.0),
        (go(3.0, 0.5, 1, &cfg(1, 5, 2)), 1.0),
    ];
    c.expect(worked.iter().all(|(got, want)| got == want), format!("worked examples {:?}", worked.map(|w| w.0)));

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut bad = 0;
    for _ in 0..100_000 {
        let s = rng.random_range(3..=25u32);
        let k = cfg(rng.random_range(1..s), s, rng.random_range(2..s));
        let l = rng.random_range(1.0..=s as f64);
        let e = rng.random_range(1e-3..=1.0);
        let n = rng.random_range(0..6u32);
        let next = go(l, e, n, &k);
        if !(1.0..=s as f64).contains(&next) {
            bad += 1;
        }
    }
    c.expect(bad == 0, format!("1e5 random steps in [1, s] ({bad} violations)"));
}

// ---------------------------------------------------------------------------
// 2

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut sum = f(a) + f(b);
    for i in 1..panels {
        sum += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

fn spline_suite(c: &mut Check) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let bases: Vec<SplineBasis> = [3u32, 5, 10, 25]
        .iter()
        .flat_map(|&s| [SplineBasis::cubic(4, 1.0, s as f64).unwrap(), SplineBasis::linear(4, 1.0, s as f64).unwrap()])
        .chain([SplineBasis::cubic(9, 1.0, 25.0).unwrap()])
        .collect();

    let mut worst = 0.0f64;
    for b in &bases {
        let (lo, hi) = b.domain();
        for _ in 0..1000 {
            let sum: f64 = b.evaluate(rng.random_range(lo..=hi)).unwrap().iter().sum();
            worst = worst.max((sum - 1.0).abs());
        }
    }
    c.expect(worst < 1e-10, format!("partition of unity, worst {worst:.1e}"));

    let min_eig = bases
        .iter()
        .map(|b| b.penalty_matrix().entries().clone().symmetric_eigen().eigenvalues.min())
        .fold(f64::INFINITY, f64::min);
    c.expect(min_eig >= -1e-10, format!("penalty PSD, min eigenvalue {min_eig:.1e}"));

    let linear_zero = bases.iter().filter(|b| b.degree() == 1).all(|b| b.penalty_matrix().entries().iter().all(|&v| v == 0.0));
    c.expect(linear_zero, "degree-1 penalty identically zero");

    let mut anchor_worst = 0.0f64;
    for s in 3..=25u32 {
        for l0 in 2..s {
            let cb = ConstrainedBasis::new(SplineBasis::cubic(4, 1.0, s as f64).unwrap(), l0 as f64).unwrap();
            let coefs: Vec<f64> = (0..cb.num_params()).map(|_| rng.random_range(-5.0..5.0)).collect();
            anchor_worst = anchor_worst.max(cb.value(&coefs, l0 as f64).unwrap().abs());
        }
    }
    c.expect(anchor_worst < 1e-10, format!("f(l0) = 0, worst {anchor_worst:.1e}"));

    let basis = SplineBasis::from_knots(3, (0..8).map(f64::from).collect()).unwrap();
    let (lo, hi) = basis.domain();
    let s = basis.penalty_matrix();
    let mut entry_worst = 0.0f64;
    for a in 0..basis.num_params() {
        for b in 0..basis.num_params() {
            let oracle = simpson(
                |x| {
                    let d = basis.evaluate_derivative(x, 2).unwrap();
                    d[a] * d[b]
                },
                lo,
                hi,
                10_000,
            );
            entry_worst = entry_worst.max((oracle - s.entries()[(a, b)]).abs());
        }
    }
    c.expect(entry_worst < 1e-8, format!("penalty vs Simpson, worst {entry_worst:.1e}"));
}

// ---------------------------------------------------------------------------
// 3

fn intercept_design(y: &[f64]) -> Design {
    let n = y.len();
    Design::new(vec![1.0; n], y.to_vec(), vec![0.0; n], vec![1.0; n], vec!["Constant".into()]).unwrap()
}

/// `n` rows, intercept plus `p − 1` uniform covariates, responses drawn
/// from `family` at mean `exp(xᵀβ)`.
fn random_glm(rng: &mut ChaCha8Rng, n: usize, beta: &[f64], family: Family) -> Design {
    let p = beta.len();
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|j| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) }).collect();
        let mu: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>().exp();
        y.push(match family {
            Family::Poisson => Poisson::new(mu).unwrap().sample(rng),
            Family::Gamma => Gamma::new(2.0, mu / 2.0).unwrap().sample(rng),
            _ => rand_distr::InverseGaussian::new(mu, 4.0).unwrap().sample(rng),
        });
        x.extend(row);
    }
    let names = (0..p).map(|j| format!("x{j}")).collect();
    Design::new(x, y, vec![0.0; n], vec![1.0; n], names).unwrap()
}

fn fitter_suite(c: &mut Check) {
    let settings = FitSettings::default();
    // (a) closed-form MLEs: log of the sample mean
    let pois = fit_pirls(&intercept_design(&[0.0, 1.0, 2.0, 5.0]), Family::Poisson, &settings).unwrap();
    let gam = fit_pirls(&intercept_design(&[2.0, 4.0, 9.0]), Family::Gamma, &settings).unwrap();
    let (ep, eg) = ((pois.coefficients[0] - 2f64.ln()).abs(), (gam.coefficients[0] - 5f64.ln()).abs());
    c.expect(ep < 1e-8 && eg < 1e-8, format!("(a) intercept MLEs, errors {ep:.1e}/{eg:.1e}"));

    // (b) analytic score against central differences
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let beta = [0.3, -0.4, 0.2, 0.5, -0.1];
    let mut worst = 0.0f64;
    for point in 0..20 {
        let family = [Family::Poisson, Family::Gamma, Family::InverseGaussian][point % 3];
        let d = random_glm(&mut rng, 200, &beta, family);
        let delta: Vec<f64> = beta.iter().map(|b| b + rng.random_range(-0.3..0.3)).collect();
        let g = score_vector(&delta, &d, &family, &[]).unwrap();
        for j in 0..5 {
            let h = 1e-6;
            let (mut up, mut dn) = (delta.clone(), delta.clone());
            up[j] += h;
            dn[j] -= h;
            let fd = (penalized_loglik(&up, &d, &family, &[]).unwrap() - penalized_loglik(&dn, &d, &family, &[]).unwrap()) / (2.0 * h);
            worst = worst.max((fd - g[j]).abs() / g[j].abs().max(1.0));
        }
    }
    c.expect(worst < 1e-5, format!("(b) score vs finite differences, worst relative {worst:.1e}"));

    // (c) monotone objective, with and without a penalized spline block
    let mut violations = 0;
    for inst in 0..50 {
        let family = [Family::Poisson, Family::Gamma, Family::InverseGaussian][inst % 3];
        let d = random_glm(&mut rng, 300, &beta, family);
        let (d, settings) = if inst % 2 == 0 {
            let penalty = SplineBasis::cubic(5, -1.0, 1.0).unwrap().penalty_matrix().into_inner();
            let sub = penalty.view((0, 0), (4, 4)).into_owned();
            let d = d.with_smooth(1, sub).unwrap();
            (d, FitSettings { penalties: vec![rng.random_range(0.1..10.0)], ..FitSettings::default() })
        } else {
            (d, FitSettings::default())
        };
        let fit = fit_pirls(&d, family, &settings).unwrap();
        if fit.trace.windows(2).any(|w| w[1] < w[0] - 1e-12 * (1.0 + w[0].abs())) {
            violations += 1;
        }
    }
    c.expect(violations == 0, format!("(c) objective non-decreasing on 50 instances ({violations} violations)"));

    // (d) coverage of ±3 standard errors
    let truth = [-1.0, 0.5, -0.3, 0.2];
    let mut covered = 0;
    for rep in 0..100u64 {
        let mut r = ChaCha8Rng::seed_from_u64(1000 + rep);
        let d = random_glm(&mut r, 10_000, &truth, Family::Poisson);
        let fit = fit_pirls(&d, Family::Poisson, &settings).unwrap();
        let se = fit.std_errors();
        if fit.coefficients.iter().zip(&truth).zip(&se).all(|((b, t), s)| (b - t).abs() <= 3.0 * s) {
            covered += 1;
        }
    }
    c.expect(covered >= 95, format!("(d) all coefficients within 3 SE in {covered}/100 replicates"));
}

// ---------------------------------------------------------------------------
// 4

fn gini_suite(c: &mut Check) {
    let p = [3.0, 1.0, 4.0, 1.5, 9.0, 2.6];
    let l = [0.0, 2.0, 7.0, 0.0, 1.0, 8.0];
    let self_gini = ratio_gini(&p, &p, &l).unwrap().gini;
    c.expect(self_gini == 0.0, format!("self comparison {self_gini}"));

    let g1 = gini_index(&ordered_lorenz(&[1.0, 1.0], &[0.0, 2.0], &[0.5, 2.0]).unwrap());
    let g2 = gini_index(&ordered_lorenz(&[1.0, 1.0], &[1.0, 3.0], &[1.0, 2.0]).unwrap());
    c.expect(g1 == 0.5 && g2 == 0.25, format!("trapezoid examples {g1}, {g2}"));

    let alt = [2.0, 1.5, 3.0, 0.5, 12.0, 5.0];
    let base = ratio_gini(&p, &alt, &l).unwrap();
    let dup = |v: &[f64]| v.iter().chain(v).copied().collect::<Vec<_>>();
    let doubled = ratio_gini(&dup(&p), &dup(&alt), &dup(&l)).unwrap();
    c.expect(doubled.curve == base.curve && doubled.gini == base.gini, "duplication invariance");
    let scale = |v: &[f64], k: f64| v.iter().map(|x| x * k).collect::<Vec<_>>();
    // a power of two rescales without rounding, so the curve is identical
    let exact = ratio_gini(&scale(&p, 8.0), &scale(&alt, 8.0), &l).unwrap();
    let rounded = ratio_gini(&scale(&p, 7.5), &scale(&alt, 7.5), &l).unwrap();
    let close = rounded.curve.points().len() == base.curve.points().len()
        && rounded.curve.points().iter().zip(base.curve.points()).all(|(a, b)| (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    c.expect(exact.curve == base.curve && close, "joint rescaling invariance");

    // standard error against a policy-level bootstrap
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 500;
    let (mut pb, mut pa, mut loss) = (Vec::new(), Vec::new(), Vec::new());
    let noise: Normal<f64> = Normal::new(0.0, 0.5).unwrap();
    for _ in 0..h {
        let bench: f64 = (5.0 + 0.3 * noise.sample(&mut rng)).exp();
        let risk_ratio: f64 = noise.sample(&mut rng).exp();
        let alt = bench * (0.8 * risk_ratio.ln() + 0.3 * noise.sample(&mut rng)).exp();
        let claims = Poisson::new(0.3 * risk_ratio).unwrap().sample(&mut rng) as usize;
        let total: f64 = (0..claims).map(|_| Gamma::new(1.5, bench / 0.3 / 1.5).unwrap().sample(&mut rng)).sum();
        pb.push(bench);
        pa.push(alt);
        loss.push(total);
    }
    let est = ratio_gini(&pb, &pa, &loss).unwrap();
    let reps = 2000;
    let mut boot = Vec::with_capacity(reps);
    for _ in 0..reps {
        let idx: Vec<usize> = (0..h).map(|_| rng.random_range(0..h)).collect();
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        if let Ok(g) = ratio_gini(&pick(&pb), &pick(&pa), &pick(&loss)) {
            boot.push(g.gini);
        }
    }
    let mean = boot.iter().sum::<f64>() / boot.len() as f64;
    let sd = (boot.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (boot.len() - 1) as f64).sqrt();
    let ratio = est.std_error / sd;
    c.expect((0.75..=1.25).contains(&ratio), format!("SE {:.4} vs bootstrap {:.4} (ratio {ratio:.3})", est.std_error, sd));
}

// ---------------------------------------------------------------------------
// 5

fn minimax_anchor(c: &mut Check) {
    let maxima = [10.38, 10.43, 0.28, 0.55];
    let idx = argmin_row_maxima(&maxima).unwrap();
    // a matrix whose off-diagonal row maxima are the published values
    let matrix: Vec<Vec<f64>> = maxima
        .iter()
        .enumerate()
        .map(|(b, &m)| (0..4).map(|a| if a == b { 0.0 } else if a == (b + 1) % 4 { m } else { m - 1.0 }).collect())
        .collect();
    let from_matrix = minimax_select(&matrix).unwrap();
    c.expect(idx == 2 && from_matrix == 2, format!("selected index {idx} / {from_matrix} (GLM-NBG is 2)"));
}

// ---------------------------------------------------------------------------
// 6, 9: the command-line pipeline

fn cli(command: Command, out: &Path, config: &Path, jobs: usize, models: Option<&[&str]>) {
    let cli = Cli {
        command,
        common: CommonArgs {
            config: Some(config.to_path_buf()),
            out: Some(out.to_path_buf()),
            jobs: Some(jobs),
            models: models.map(|m| m.iter().map(|s| s.to_string()).collect()),
            ..CommonArgs::default()
        },
    };
    let outcome = run(&cli).unwrap_or_else(|e| panic!("{command:?} failed: {e}"));
    assert_eq!(outcome.status, 0, "{command:?} warnings: {:?}", outcome.warnings);
}

fn write_config(dir: &Path, customers: usize, s_max: u32) -> std::path::PathBuf {
    let path = dir.join("run.json");
    let cfg = serde_json::json!({
        "seed": 42,
        "simulation": { "num_customers": customers },
        "grid": { "s_min": 3, "s_max": s_max },
    });
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

fn lr_dof_anchor(c: &mut Check) {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), 1500, 6);
    let out = dir.path().join("out");
    let models = ["GLM-PG", "GLM-PG-One", "GAM-PG-One", "GLM-PG-Multi", "GAM-PG-Multi"];
    cli(Command::Simulate, &out, &config, 1, None);
    cli(Command::Evaluate, &out, &config, 1, Some(&models));
    let mut rdr = csv::Reader::from_path(out.join("evaluate/lr_tests.full.csv")).unwrap();
    let want = [("GLM-PG", "GAM-PG-One", 3), ("GLM-PG", "GLM-PG-One", 1), ("GAM-PG-One", "GAM-PG-Multi", 9), ("GLM-PG-One", "GLM-PG-Multi", 3)];
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    for (null, alt, dof) in want {
        let found: BTreeSet<&str> = rows.iter().filter(|r| &r[1] == null && &r[2] == alt).map(|r| r.get(4).unwrap()).collect();
        let expected = dof.to_string();
        c.expect(found.len() == 1 && found.contains(expected.as_str()), format!("{alt} vs {null}: dof {found:?}"));
    }
    c.expect(rows.len() == 16, format!("{} LR rows for 4 products", rows.len()));
}

fn determinism(c: &mut Check) {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), 2000, 8);
    let pipeline = |name: &str, jobs: usize| {
        let out = dir.path().join(name);
        for cmd in [Command::Simulate, Command::Report, Command::Optimize, Command::Fit, Command::Evaluate] {
            cli(cmd, &out, &config, jobs, None);
        }
        out
    };
    let a = pipeline("a", 1);
    let b = pipeline("b", 1);
    let d = pipeline("c", 8);
    let files = |root: &Path| -> Vec<std::path::PathBuf> {
        let mut v = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(p) = stack.pop() {
            for e in std::fs::read_dir(&p).unwrap() {
                let path = e.unwrap().path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    v.push(path.strip_prefix(root).unwrap().to_path_buf());
                }
            }
        }
        v.sort();
        v
    };
    let list = files(&a);
    c.expect(list == files(&b) && list == files(&d), format!("{} files in each run", list.len()));
    let differ = |x: &Path| list.iter().filter(|f| std::fs::read(a.join(f)).unwrap() != std::fs::read(x.join(f)).unwrap()).count();
    let (rerun, jobs) = (differ(&b), differ(&d));
    c.expect(rerun == 0, format!("rerun: {rerun} differing files"));
    c.expect(jobs == 0, format!("--jobs 1 vs 8: {jobs} differing files"));
}

// ---------------------------------------------------------------------------
// 7

fn one_product_spec(abbr: &str, product: usize, cfg: ClaimScoreConfig, products: usize) -> ModelSpec {
    ModelSpec::parse(abbr, product).unwrap().with_configs((0..products).map(|j| (j, cfg)).collect())
}

/// Kolmogorov–Smirnov test of `sample` against U(0, 1), with Stephens'
/// small-sample correction of the asymptotic distribution.
fn ks_uniform(sample: &[f64]) -> (f64, f64) {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| ((i as f64 + 1.0) / n - v).max(v - i as f64 / n))
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let p: f64 = (1..=100).map(|k| 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k as f64 * lambda).powi(2)).exp()).sum();
    (d, p.clamp(0.0, 1.0))
}

fn discrimination(c: &mut Check) {
    let sim = SimulationConfig { seed: 42, num_customers: 20_000, ..SimulationConfig::default() };
    let (full, history) = simulate(&sim).unwrap();
    let products = full.schema().num_products();
    let cfg = ClaimScoreConfig::new(2, 8, 2).unwrap();
    let configs = (0..products).map(|j| (j, cfg)).collect();
    let tables = ScoreTables::build(&Experience::new(&full), &history, &configs).unwrap();
    let (train, test) = full.train_test_split().unwrap();
    let settings = FitSettings::default();
    let empty = ScoreTables::default();
    for j in 0..products {
        let name = full.schema().product_name(j).to_string();
        let (bf, bs) = fit_model(&ModelSpec::parse("GLM-PG", j).unwrap(), &train, &empty, &settings).unwrap();
        let bench = expected_losses(&bf, &bs, &test, &empty).unwrap();
        let one = fit_component(&one_product_spec("GAM-PG-One", j, cfg, products), Component::Frequency, &train, &tables, &settings).unwrap();
        let counts = one.predict(&test, &tables).unwrap();
        let sev = bs.predict(&test, &empty).unwrap();
        let alt: Vec<f64> = counts.iter().zip(&sev).map(|(n, s)| n * s).collect();
        let losses: Vec<f64> = test.product_records(j).map(|r| r.claim_total).collect();
        let g = ratio_gini(&bench, &alt, &losses).unwrap();
        let lower = g.gini - 1.96 * g.std_error;
        c.expect(lower > 0.0, format!("{name}: Gini {:.2}% (95% lower {:.2}%)", 100.0 * g.gini, 100.0 * lower));

        let multi =
            fit_component(&one_product_spec("GAM-PG-Multi", j, cfg, products), Component::Frequency, &train, &tables, &settings).unwrap();
        let lr = lr_test(&one, &multi).unwrap();
        c.expect(multi.loglik() > one.loglik() && lr.p_value < 0.05, format!("{name}: Multi vs One LR p {:.2e}", lr.p_value));
    }

    // frailty off: score effects are pure noise, LR p-values uniform
    let reps = 200;
    let mut pvalues = Vec::with_capacity(reps);
    for rep in 0..reps as u64 {
        let sim = SimulationConfig { seed: 10_000 + rep, num_customers: 2000, frailty_variance: 0.0, ..SimulationConfig::default() };
        let (full, history) = simulate(&sim).unwrap();
        let products = full.schema().num_products();
        let configs = (0..products).map(|j| (j, cfg)).collect();
        let tables = ScoreTables::build(&Experience::new(&full), &history, &configs).unwrap();
        let (train, _) = full.train_test_split().unwrap();
        let stat = fit_component(&ModelSpec::parse("GLM-PG", 0).unwrap(), Component::Frequency, &train, &empty, &settings).unwrap();
        let one = fit_component(&one_product_spec("GAM-PG-One", 0, cfg, products), Component::Frequency, &train, &tables, &settings).unwrap();
        pvalues.push(lr_test(&stat, &one).unwrap().p_value);
    }
    let (d, p) = ks_uniform(&pvalues);
    c.expect(p > 0.01, format!("frailty off: KS D {d:.3}, p {p:.3} over {reps} replicates"));
}

// ---------------------------------------------------------------------------
// 8

fn grid_bookkeeping(c: &mut Check) {
    let grid = enumerate_grid(&GridSpec::default());
    let closed_form: usize = (3..=25usize).map(|s| (s - 1) * (s - 2)).sum();
    c.expect(grid.len() == closed_form, format!("grid matches the closed-form sum ({closed_form})"));
    c.expect(grid.len() == 4048, format!("grid size {} equals the stated 4048", grid.len()));

    // claim-free portfolio; pre-sample history with claims lets some
    // customers start below the entry level
    let schema = Schema::new(vec![claimscore::portfolio::ProductSchema { name: "A".into(), covariates: vec![] }]).unwrap();
    let years = 4;
    let mut records = "customer_id,product,calendar_year,exposure,claim_count,claim_total\n".to_string();
    let mut hist = "customer_id,product,year,exposure,claim_count\n".to_string();
    let mut prior: Vec<Vec<u32>> = Vec::new();
    for i in 0..30u32 {
        for y in 0..years {
            records.push_str(&format!("c{i},A,{},1,0,0\n", 2020 + y));
        }
        let claims: Vec<u32> = match i % 5 {
            0 => vec![],
            1 => vec![1],
            2 => vec![0, 2],
            3 => vec![3, 0, 0],
            _ => vec![0; 6],
        };
        for (k, n) in claims.iter().enumerate() {
            hist.push_str(&format!("c{i},A,{},1,{n}\n", 2010 + k));
        }
        prior.push(claims);
    }
    let portfolio = Portfolio::read_csv(records.as_bytes(), &schema, "records").unwrap();
    let history = History::read_csv(hist.as_bytes(), &portfolio, "history").unwrap();

    // oracle: integer walk, one step per year, levels seen entering each year
    let oracle = |k: &ClaimScoreConfig| -> bool {
        let (psi, s, l0) = (k.psi() as i64, k.max_level() as i64, k.entry_level() as i64);
        let mut seen = BTreeSet::new();
        for claims in &prior {
            let mut l = l0;
            for &n in claims {
                l = (l + i64::from(n == 0) - psi * n as i64).clamp(1, s);
            }
            for _ in 0..years {
                seen.insert(l);
                l = (l + 1).min(s);
            }
        }
        (1..=s).all(|v| seen.contains(&v))
    };
    let mut agree = 0;
    let mut feasible_count = 0;
    let mut oracle_count = 0;
    for k in &grid {
        let table = claimscore::model::ScoreTable::from_portfolio(&portfolio, &history, 0, *k).unwrap();
        let f = feasible(&table, &portfolio, 1e-4).unwrap().feasible;
        let o = oracle(k);
        feasible_count += f as usize;
        oracle_count += o as usize;
        agree += (f == o) as usize;
    }
    c.expect(
        agree == grid.len() && feasible_count == oracle_count,
        format!("feasibility agrees with the walk oracle on {agree}/{} configs ({feasible_count} feasible)", grid.len()),
    );
}
