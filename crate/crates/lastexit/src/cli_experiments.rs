//! Experiment registry behind the `lastexit` binary.
//!
//! Each subcommand resolves its settings (config file values overridden by
//! CLI flags, with per-experiment defaults), runs deterministically from the
//! master seed, and emits a JSON report plus plot-ready CSV files. Rows tied
//! to an acceptance criterion carry a pass/fail verdict; the process exit
//! code is 0 only if all of them pass.

use std::fmt::Write as _;
use std::path::{Path as FsPath, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::bangbang::{self, BangBangResolvent};
use crate::closed_form_models::{
    self as cfm, bm_excursion_rate_integral, BmWithDrift, LogisticSde, OuProcess,
};
use crate::ctmc_lab::{self, TruncatedChain, WalkMode, WalkParams, WalkSimConfig};
use crate::diffusion_core::Interval;
use crate::fd_generator::{self, BoundaryMode, Grid};
use crate::htransform::{h_hit, transform_characteristics, RepresentingMeasure};
use crate::mc_engine::{
    self, LocalTimeBand, PathConfig, PathModel, RngPolicy,
};
use crate::quadrature::{self, Tol};
use crate::stats;
use crate::{Error, Result};

/// The eight experiments and the acceptance criteria each one carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    CtmcVerify,
    CtmcMc,
    BmResolvent,
    BmThm12,
    OuH,
    LogisticDrift,
    FdValidate,
    LocaltimeCond,
}

pub const ALL_EXPERIMENTS: [Experiment; 8] = [
    Experiment::CtmcVerify,
    Experiment::CtmcMc,
    Experiment::BmResolvent,
    Experiment::BmThm12,
    Experiment::OuH,
    Experiment::LogisticDrift,
    Experiment::FdValidate,
    Experiment::LocaltimeCond,
];

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::CtmcVerify => "ctmc-verify",
            Experiment::CtmcMc => "ctmc-mc",
            Experiment::BmResolvent => "bm-resolvent",
            Experiment::BmThm12 => "bm-thm12",
            Experiment::OuH => "ou-h",
            Experiment::LogisticDrift => "logistic-drift",
            Experiment::FdValidate => "fd-validate",
            Experiment::LocaltimeCond => "localtime-cond",
        }
    }

    /// Acceptance criteria (by number) this experiment decides.
    pub fn criteria(&self) -> &'static [u32] {
        match self {
            Experiment::CtmcVerify => &[1, 2],
            Experiment::CtmcMc => &[3],
            Experiment::BmResolvent => &[4, 5],
            Experiment::BmThm12 => &[6, 7],
            Experiment::OuH => &[8],
            Experiment::LogisticDrift => &[],
            Experiment::FdValidate => &[10],
            Experiment::LocaltimeCond => &[9],
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        ALL_EXPERIMENTS.iter().copied().find(|e| e.name() == name)
    }
}

/// Raw config-file contents (flat TOML).
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment_id: Option<String>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub mu: Option<f64>,
    pub gamma: Option<f64>,
    pub logistic_mu: Option<f64>,
    pub logistic_kappa: Option<f64>,
    pub logistic_sigma: Option<f64>,
    pub logistic_a: Option<f64>,
    pub lambda_ladder: Option<Vec<f64>>,
    pub n_paths: Option<usize>,
    pub dt: Option<f64>,
    pub epsilon: Option<f64>,
    pub escape_delta: Option<f64>,
    pub master_seed: Option<u64>,
}

impl ConfigFile {
    pub fn load(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Flag-level overrides from the CLI.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_paths: Option<usize>,
    pub quick: bool,
}

/// Fully resolved settings echoed into every report.
#[derive(Clone, Debug, Serialize)]
pub struct Settings {
    pub experiment_id: String,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub gamma: f64,
    pub logistic_mu: f64,
    pub logistic_kappa: f64,
    pub logistic_sigma: f64,
    pub logistic_a: f64,
    pub lambda_ladder: Vec<f64>,
    pub dt: f64,
    pub epsilon: f64,
    pub escape_delta: f64,
    pub master_seed: u64,
    pub quick: bool,
    /// Explicit path-count override; experiments otherwise use their
    /// specified ensemble sizes (divided by 20 in quick mode).
    pub n_paths: Option<usize>,
}

impl Settings {
    pub fn resolve(exp: Experiment, file: &ConfigFile, over: &Overrides) -> Result<Self> {
        let dt_default = match exp {
            Experiment::OuH => 2e-4,
            Experiment::LocaltimeCond => 2e-4,
            _ => 1e-3,
        };
        let eps_default = match exp {
            Experiment::LocaltimeCond => 0.01,
            _ => 0.02,
        };
        let ladder_default = match exp {
            Experiment::CtmcVerify => vec![1.0, 0.3, 0.1, 0.03, 0.01],
            Experiment::BmThm12 => vec![0.5, 0.2, 0.05],
            Experiment::LocaltimeCond => vec![0.5, 0.1],
            _ => vec![1.0, 0.1, 0.01],
        };
        let s = Settings {
            experiment_id: file
                .experiment_id
                .clone()
                .unwrap_or_else(|| exp.name().to_string()),
            alpha: file.alpha.unwrap_or(1.0),
            beta: file.beta.unwrap_or(2.0),
            mu: file.mu.unwrap_or(1.0),
            gamma: file.gamma.unwrap_or(-1.0),
            logistic_mu: file.logistic_mu.unwrap_or(0.3),
            logistic_kappa: file.logistic_kappa.unwrap_or(0.1),
            logistic_sigma: file.logistic_sigma.unwrap_or(1.0),
            logistic_a: file.logistic_a.unwrap_or(1.0),
            lambda_ladder: file.lambda_ladder.clone().unwrap_or(ladder_default),
            dt: file.dt.unwrap_or(dt_default),
            epsilon: file.epsilon.unwrap_or(eps_default),
            escape_delta: file.escape_delta.unwrap_or(1e-4),
            master_seed: over.seed.or(file.master_seed).unwrap_or(DEFAULT_SEED),
            quick: over.quick,
            n_paths: over.n_paths.or(file.n_paths),
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("mu", self.mu),
            ("logistic_mu", self.logistic_mu),
            ("logistic_kappa", self.logistic_kappa),
            ("logistic_sigma", self.logistic_sigma),
            ("logistic_a", self.logistic_a),
            ("dt", self.dt),
            ("epsilon", self.epsilon),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("field `{name}` must be positive, got {v}")));
            }
        }
        if !(self.alpha < self.beta) {
            return Err(Error::Config(format!(
                "field `beta` must exceed `alpha`: {} vs {}",
                self.beta, self.alpha
            )));
        }
        if !(self.gamma < 0.0) {
            return Err(Error::Config(format!(
                "field `gamma` must be negative (transient OU), got {}",
                self.gamma
            )));
        }
        if !(self.escape_delta > 0.0 && self.escape_delta < 1.0) {
            return Err(Error::Config("field `escape_delta` must be in (0,1)".into()));
        }
        if self.lambda_ladder.is_empty()
            || !self.lambda_ladder.windows(2).all(|w| w[0] > w[1])
            || self.lambda_ladder.iter().any(|&l| l <= 0.0)
        {
            return Err(Error::Config(
                "field `lambda_ladder` must be a strictly decreasing list of positive rates"
                    .into(),
            ));
        }
        Ok(())
    }

    /// Ensemble size: explicit override wins, quick mode shrinks 20x.
    pub fn paths(&self, spec_n: usize) -> usize {
        if let Some(n) = self.n_paths {
            return n;
        }
        if self.quick {
            (spec_n / 20).max(2_000)
        } else {
            spec_n
        }
    }
}

/// Default master seed; reports echo it so every run is reproducible.
pub const DEFAULT_SEED: u64 = 0x1a57_e517_2026_0809;

/// One statistics row of a report.
#[derive(Clone, Debug, Serialize)]
pub struct StatRow {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Present exactly on acceptance-criterion rows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criterion: Option<u32>,
}

/// Self-describing experiment report.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub experiment_id: String,
    pub artifact_version: String,
    pub config: Settings,
    pub rows: Vec<StatRow>,
    pub passed: bool,
}

impl Report {
    fn new(settings: &Settings) -> Self {
        Report {
            experiment_id: settings.experiment_id.clone(),
            artifact_version: format!("lastexit-{}", env!("CARGO_PKG_VERSION")),
            config: settings.clone(),
            rows: Vec::new(),
            passed: true,
        }
    }

    fn info(&mut self, name: &str, value: f64) {
        self.rows.push(StatRow {
            name: name.to_string(),
            value,
            stderr: None,
            tolerance: None,
            pass: None,
            criterion: None,
        });
    }

    fn check(&mut self, criterion: u32, name: &str, value: f64, tolerance: f64, pass: bool) {
        self.rows.push(StatRow {
            name: name.to_string(),
            value,
            stderr: None,
            tolerance: Some(tolerance),
            pass: Some(pass),
            criterion: Some(criterion),
        });
        self.passed &= pass;
    }

    fn check_stderr(
        &mut self,
        criterion: u32,
        name: &str,
        value: f64,
        stderr: f64,
        tolerance: f64,
        pass: bool,
    ) {
        self.rows.push(StatRow {
            name: name.to_string(),
            value,
            stderr: Some(stderr),
            tolerance: Some(tolerance),
            pass: Some(pass),
            criterion: Some(criterion),
        });
        self.passed &= pass;
    }

    /// Formatted pass/fail lines for terminal output.
    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for row in &self.rows {
            let mut line = String::new();
            match row.pass {
                Some(true) => write!(line, "[PASS] ").unwrap(),
                Some(false) => write!(line, "[FAIL] ").unwrap(),
                None => write!(line, "[info] ").unwrap(),
            }
            write!(line, "{}: value {:.6e}", row.name, row.value).unwrap();
            if let Some(se) = row.stderr {
                write!(line, " (se {se:.2e})").unwrap();
            }
            if let Some(tol) = row.tolerance {
                write!(line, " tol {tol:.2e}").unwrap();
            }
            out.push(line);
        }
        out
    }
}

/// Plot-ready CSV payload.
#[derive(Clone, Debug)]
pub struct CsvFile {
    pub name: String,
    pub header: String,
    pub rows: Vec<String>,
}

impl CsvFile {
    fn new(name: &str, header: &str) -> Self {
        CsvFile {
            name: name.to_string(),
            header: header.to_string(),
            rows: Vec::new(),
        }
    }

    fn push_row(&mut self, row: String) {
        self.rows.push(row);
    }

    pub fn contents(&self) -> String {
        let mut s = String::with_capacity(self.rows.len() * 32 + self.header.len() + 1);
        s.push_str(&self.header);
        s.push('\n');
        for r in &self.rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }
}

/// Run an experiment and write its report and CSVs under `out_dir`.
pub fn run(exp: Experiment, settings: &Settings, out_dir: &FsPath) -> Result<Report> {
    let (report, csvs) = dispatch(exp, settings)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    let report_path: PathBuf = out_dir.join(format!("{}_report.json", exp.name()));
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Config(format!("serialize report: {e}")))?;
    std::fs::write(&report_path, json + "\n")
        .map_err(|e| Error::Config(format!("write {}: {e}", report_path.display())))?;
    for csv in &csvs {
        let path = out_dir.join(format!("{}_{}.csv", exp.name(), csv.name));
        std::fs::write(&path, csv.contents())
            .map_err(|e| Error::Config(format!("write {}: {e}", path.display())))?;
    }
    Ok(report)
}

/// Run an experiment without touching the filesystem.
pub fn dispatch(exp: Experiment, settings: &Settings) -> Result<(Report, Vec<CsvFile>)> {
    match exp {
        Experiment::CtmcVerify => ctmc_verify(settings),
        Experiment::CtmcMc => ctmc_mc(settings),
        Experiment::BmResolvent => bm_resolvent(settings),
        Experiment::BmThm12 => bm_thm12(settings),
        Experiment::OuH => ou_h_experiment(settings),
        Experiment::LogisticDrift => logistic_drift(settings),
        Experiment::FdValidate => fd_validate(settings),
        Experiment::LocaltimeCond => localtime_cond(settings),
    }
}

// ---------------------------------------------------------------------------
// ctmc-verify: exact identities on the walk (criteria 1 and 2)
// ---------------------------------------------------------------------------

fn ctmc_verify(s: &Settings) -> Result<(Report, Vec<CsvFile>)> {
    let mut report = Report::new(s);
    let p = WalkParams::new(s.alpha, s.beta)?;
    let (lo, hi) = (-40i64, 80i64);
    let bb = TruncatedChain::bangbang_walk(&p, lo, hi, true);

    let mut kernel_csv = CsvFile::new("kernels", "t,x,y,limit_kernel,bangbang_kernel,abs_error");
    let mut max_err: f64 = 0.0;
    let mut max_defect_err: f64 = 0.0;
    for &t in &[0.5, 1.0, 2.0] {
        for x in -10i64..=10 {
            let lim = ctmc_lab::limit_row(&p, x, t, lo, hi)?;
            let row = bb.transition_row(x, t)?;
            max_defect_err = max_defect_err.max((lim.killed - row.killed).abs());
            for y in -10i64..=10 {
                let err = (lim.prob(y) - row.prob(y)).abs();
                max_err = max_err.max(err);
                kernel_csv.push_row(format!(
                    "{t},{x},{y},{:e},{:e},{:e}",
                    lim.prob(y),
                    row.prob(y),
                    err
                ));
            }
        }
    }
    report.check(
        1,
        "exact identity: limit kernel vs bang-bang semigroup, max abs error",
        max_err,
        1e-10,
        max_err < 1e-10,
    );
    report.info("exact identity: death-mass max abs error", max_defect_err);

    // Criterion 2: TV(conditioned(lambda), limit) at (x,t) = (0,1).
    let mut tv_csv = CsvFile::new("tv_ladder", "lambda,tv");
    let lim = ctmc_lab::limit_row(&p, 0, 1.0, lo, hi)?;
    // TV of the state marginals (the location kernels the limit theorem is
    // about); the residual death-mass gap e^{-lambda t} is reported alongside.
    let mut tvs = Vec::new();
    let mut death_gap = 0.0;
    for &lambda in &s.lambda_ladder {
        let cond = ctmc_lab::conditioned_row(&p, lambda, 0, 1.0, lo, hi)?;
        let mut tv = 0.0;
        for y in lo..=hi {
            tv += (cond.prob(y) - lim.prob(y)).abs();
        }
        tv *= 0.5;
        tvs.push(tv);
        death_gap = (cond.killed - lim.killed).abs();
        tv_csv.push_row(format!("{lambda},{tv:e}"));
    }
    report.info("death-mass gap at smallest lambda", death_gap);
    let monotone = tvs.windows(2).all(|w| w[0] >= w[1]);
    let last = *tvs.last().unwrap();
    report.check(
        2,
        "TV(conditioned, limit) monotone along the lambda ladder",
        if monotone { 1.0 } else { 0.0 },
        1.0,
        monotone,
    );
    report.check(2, "TV(conditioned, limit) at smallest lambda", last, 0.01, last < 0.01);

    Ok((report, vec![kernel_csv, tv_csv]))
}

// ---------------------------------------------------------------------------
// ctmc-mc: Gillespie checks (criterion 3)
// ---------------------------------------------------------------------------

fn ctmc_mc(s: &Settings) -> Result<(Report, Vec<CsvFile>)> {
    let mut report = Report::new(s);
    let p = WalkParams::new(s.alpha, s.beta)?;
    let policy = RngPolicy::new(s.master_seed);
    let cfg = WalkSimConfig::default();

    // Law of N over Gillespie paths from 0.
    let n_paths = s.paths(100_000);
    let counts: Vec<usize> = {
        use rayon::prelude::*;
        (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let mut rng = policy.substream(i as u64);
                let path =
                    ctmc_lab::simulate_walk(&p, 0, WalkMode::Base, &cfg, &mut rng).unwrap();
                ctmc_lab::excursion_decomposition(&path).unwrap().len()
            })
            .collect()
    };
    let max_n = 40usize;
    let mut observed = vec![0.0f64; max_n];
    for &c in &counts {
        observed[(c - 1).min(max_n - 1)] += 1.0;
    }
    // Bin the tail so every expected count is at least 5.
    let mut expected = Vec::new();
    let mut obs_binned = Vec::new();
    let mut tail_exp = n_paths as f64;
    let mut tail_obs: f64 = observed.iter().sum();
    for k in 0..max_n {
        let e = ctmc_lab::n_law(&p, k as u32 + 1)? * n_paths as f64;
        if tail_exp - e < 5.0 || e < 5.0 {
            break;
        }
        expected.push(e);
        obs_binned.push(observed[k]);
        tail_exp -= e;
        tail_obs -= observed[k];
    }
    expected.push(tail_exp);
    obs_binned.push(tail_obs);
    let (chi2, pval) = stats::chi_square_test(&obs_binned, &expected, 0);
    report.info("law of N: chi-square statistic", chi2);
    report.check(3, "law of N: chi-square p-value", pval, 0.01, pval > 0.01);
    let mut n_csv = CsvFile::new("n_law", "n,observed,expected");
    for (k, (&o, &e)) in obs_binned.iter().zip(&expected).enumerate() {
        n_csv.push_row(format!("{},{o},{e}", k + 1));
    }

    // Gillespie sampler exactness: empirical kernel at t=1 vs uniformization.
    let n_kernel = s.paths(1_000_000);
    let chain = TruncatedChain::walk(&p, -40, 80);
    let exact_row = chain.transition_row(0, 1.0)?;
    let emp: Vec<f64> = {
        use rayon::prelude::*;
        let counts = (0..n_kernel)
            .into_par_iter()
            .fold(
                || vec![0u64; 61],
                |mut acc, i| {
                    let mut rng = policy.substream(1_000_000 + i as u64);
                    let path =
                        ctmc_lab::simulate_walk(&p, 0, WalkMode::Base, &cfg, &mut rng).unwrap();
                    if let Some(state) = path.state_at(1.0) {
                        if (-30..=30).contains(&state) {
                            acc[(state + 30) as usize] += 1;
                        }
                    }
                    acc
                },
            )
            .reduce(
                || vec![0u64; 61],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            );
        counts.iter().map(|&c| c as f64 / n_kernel as f64).collect()
    };
    let mut max_z: f64 = 0.0;
    let mut chi2_obs = Vec::new();
    let mut chi2_exp = Vec::new();
    let mut kernel_csv = CsvFile::new("gillespie_kernel", "y,empirical,exact");
    for y in -30i64..=30 {
        let pe = exact_row.prob(y);
        let pm = emp[(y + 30) as usize];
        kernel_csv.push_row(format!("{y},{pm:e},{pe:e}"));
        if pe * n_kernel as f64 >= 5.0 {
            let se = stats::binomial_std_error(pe, n_kernel);
            max_z = max_z.max((pm - pe).abs() / se);
            chi2_obs.push(pm * n_kernel as f64);
            chi2_exp.push(pe * n_kernel as f64);
        }
    }
    // Remaining mass bin keeps the chi-square well-posed.
    let rest_obs = n_kernel as f64 - chi2_obs.iter().sum::<f64>();
    let rest_exp = (n_kernel as f64 - chi2_exp.iter().sum::<f64>()).max(1e-9);
    chi2_obs.push(rest_obs);
    chi2_exp.push(rest_exp);
    let (_, gill_p) = stats::chi_square_test(&chi2_obs, &chi2_exp, 0);
    report.info("gillespie vs uniformization: max |z| over states", max_z);
    report.info("gillespie vs uniformization: chi-square p-value", gill_p);
    if gill_p <= 0.001 {
        report.passed = false;
    }

    // Conditioned rejection sampler vs bang-bang-killed walk: TV of the
    // time-1 marginals (including the dead mass) at the smallest ladder rate.
    let lambda = *s.lambda_ladder.last().unwrap();
    let n_tv = s.paths(1_000_000);
    use rayon::prelude::*;
    let marginals = |mode: WalkMode, offset: u64| -> (Vec<f64>, f64) {
        let counts = (0..n_tv)
            .into_par_iter()
            .fold(
                || (vec![0u64; 61], 0u64),
                |mut acc, i| {
                    let mut rng = policy.substream(offset + i as u64);
                    let path = ctmc_lab::simulate_walk(&p, 0, mode, &cfg, &mut rng).unwrap();
                    match path.state_at(1.0) {
                        Some(state) if (-30..=30).contains(&state) => {
                            acc.0[(state + 30) as usize] += 1
                        }
                        Some(_) => {}
                        None => acc.1 += 1,
                    }
                    acc
                },
            )
            .reduce(
                || (vec![0u64; 61], 0u64),
                |mut a, b| {
                    for (x, y) in a.0.iter_mut().zip(b.0) {
                        *x += y;
                    }
                    (a.0, a.1 + b.1)
                },
            );
        let probs = counts.0.iter().map(|&c| c as f64 / n_tv as f64).collect();
        (probs, counts.1 as f64 / n_tv as f64)
    };
    let (cond_m, cond_dead) = marginals(WalkMode::Conditioned { lambda }, 3_000_000);
    let (bb_m, bb_dead) = marginals(WalkMode::BangBangKilled, 7_000_000);
    let mut tv = (cond_dead - bb_dead).abs();
    for i in 0..61 {
        tv += (cond_m[i] - bb_m[i]).abs();
    }
    tv *= 0.5;
    let bound = 0.01 + 3.0 / (n_tv as f64).sqrt();
    report.info("conditioned vs bang-bang-killed: lambda", lambda);
    report.check_stderr(
        3,
        "conditioned vs bang-bang-killed walk: TV of time-1 marginals",
        tv,
        (1.0 / n_tv as f64).sqrt(),
        bound,
        tv < bound,
    );
    let mut tv_csv = CsvFile::new("two_ensembles", "y,conditioned,bangbang_killed");
    for y in -30i64..=30 {
        tv_csv.push_row(format!(
            "{y},{:e},{:e}",
            cond_m[(y + 30) as usize],
            bb_m[(y + 30) as usize]
        ));
    }

    Ok((report, vec![n_csv, kernel_csv, tv_csv]))
}

// ---------------------------------------------------------------------------
// bm-resolvent: bang-bang resolvent structure (criteria 4 and 5)
// ---------------------------------------------------------------------------

fn bm_resolvent(s: &Settings) -> Result<(Report, Vec<CsvFile>)> {
    let mut report = Report::new(s);
    let model = BmWithDrift::new(s.mu)?;
    let bb = BangBangResolvent::new(bangbang::bm_resolvent_oracle(&model), 0.0)?;
    let mut rng = ChaCha12Rng::seed_from_u64(s.master_seed);

    // Symmetry of the m^h-referenced density at 200 random triples.
    let mut max_asym: f64 = 0.0;
    for _ in 0..200 {
        let lambda = rng.random_range(0.05..4.0);
        let x = rng.random_range(-3.0..3.0);
        let y = rng.random_range(-3.0..3.0);
        let d1 = bb.density_mh(lambda, x, y)?;
        let d2 = bb.density_mh(lambda, y, x)?;
        max_asym = max_asym.max((d1 - d2).abs() / d1.abs().max(1e-300));
    }
    report.check(
        4,
        "bang-bang density symmetry (m^h reference), max relative asymmetry",
        max_asym,
        1e-10,
        max_asym < 1e-10,
    );

    // Resolvent equation residuals at 20 sampled tuples.
    let oracle = bb.oracle_m();
    let mut max_res: f64 = 0.0;
    let mut res_csv = CsvFile::new("resolvent_equation", "lambda,chi,x,y,residual");
    for _ in 0..20 {
        let lambda = rng.random_range(0.2..2.5);
        let chi = lambda + rng.random_range(0.2..2.0);
        let x = rng.random_range(-1.5..1.5);
        let y = rng.random_range(-1.5..1.5);
        let res = bangbang::check_resolvent_equation(&oracle, lambda, chi, x, y)?.abs();
        res_csv.push_row(format!("{lambda},{chi},{x},{y},{res:e}"));
        max_res = max_res.max(res);
    }
    report.check(
        4,
        "bang-bang resolvent equation, max |residual|",
        max_res,
        1e-5,
        max_res < 1e-5,
    );

    // Divergence as lambda -> 0.
    let mut prev = 0.0;
    let mut monotone = true;
    let mut div_csv = CsvFile::new("lambda_divergence", "lambda,density");
    for &lambda in &[1.0, 0.1, 0.01] {
        let v = bb.density_m(lambda, 0.3, -0.2)?;
        div_csv.push_row(format!("{lambda},{v:e}"));
        monotone &= v > prev;
        prev = v;
    }
    report.check(
        4,
        "bang-bang density diverges along lambda -> 0",
        if monotone { 1.0 } else { 0.0 },
        1.0,
        monotone,
    );

    // Criterion 5: excursion-rate integral = mu/lambda on the 3x3 grid.
    let mut max_err: f64 = 0.0;
    let mut exc_csv = CsvFile::new("excursion_rate", "mu,lambda,integral,expected");
    for &mu in &[0.5, 1.0, 2.0] {
        let m = BmWithDrift::new(mu)?;
        for &lambda in &[0.5, 1.0, 2.0] {
            let v = bm_excursion_rate_integral(&m, lambda)?;
            exc_csv.push_row(format!("{mu},{lambda},{v:e},{:e}", mu / lambda));
            max_err = max_err.max((v - mu / lambda).abs());
        }
    }
    report.check(
        5,
        "excursion-rate integral vs mu/lambda, max abs error",
        max_err,
        1e-8,
        max_err < 1e-8,
    );

    Ok((report, vec![res_csv, div_csv, exc_csv]))
}

// ---------------------------------------------------------------------------
// bm-thm12: the statistical suites (criteria 6 and 7)
// ---------------------------------------------------------------------------

struct Thm12Ensembles {
    last_exit: Vec<mc_engine::Path>,
    bang_bang: Vec<mc_engine::Path>,
    rate: f64,
}

fn thm12_ensembles(s: &Settings, n: usize) -> Result<Thm12Ensembles> {
    let model = BmWithDrift::new(s.mu)?;
    let chars = model.characteristics();
    let h = h_hit(&chars, 0.0)?;
    let band = LocalTimeBand::new(0.0, s.epsilon, |y| chars.speed_density(y))?;
    let config = PathConfig {
        dt: s.dt,
        epsilon: s.epsilon,
        escape_delta: s.escape_delta,
        probe_times: vec![0.5],
        ..PathConfig::default()
    };
    let policy = RngPolicy::new(s.master_seed);
    let bm = PathModel::Bm(model);
    let last_exit = mc_engine::run_ensemble(n, &policy, |i, rng| {
        mc_engine::run_to_last_exit(&bm, &h, 0.0, &band, &config, rng, i)
    })?;
    // Self-calibrated clock rate: the statistical claim never touches the
    // local-time normalization constant.
    let totals = mc_engine::local_time_totals(&last_exit);
    let rate = 1.0 / stats::mean(&totals);

    let spec = model.spec();
    let h_drift = h.clone();
    let drift: crate::diffusion_core::StateFn =
        std::sync::Arc::new(move |x| crate::htransform::transformed_drift(&spec, &h_drift, x));
    let bang_bang_model = PathModel::Generic {
        interval: Interval::real_line(),
        drift,
        dispersion: std::sync::Arc::new(|_| 1.0),
    };
    let policy_b = RngPolicy::new(s.master_seed ^ 0x9e37_79b9_7f4a_7c15);
    let bang_bang = mc_engine::run_ensemble(n, &policy_b, |i, rng| {
        mc_engine::kill_at_local_time_clock(&bang_bang_model, 0.0, &band, rate, &config, rng, i)
    })?;
    Ok(Thm12Ensembles {
        last_exit,
        bang_bang,
        rate,
    })
}

fn bm_thm12(s: &Settings) -> Result<(Report, Vec<CsvFile>)> {
    let mut report = Report::new(s);
    let n = s.paths(100_000);
    let ens = thm12_ensembles(s, n)?;
    report.info("self-calibrated local-time clock rate", ens.rate);

    let mut ens_csv = CsvFile::new(
        "thm12_ensembles",
        "ensemble,path_index,death_time,death_cause,local_time_total,state_at_0p5",
    );
    for (tag, paths) in [("last_exit", &ens.last_exit), ("bang_bang", &ens.bang_bang)] {
        for p in paths.iter() {
            ens_csv.push_row(format!(
                "{tag},{},{:e},{:?},{:e},{}",
                p.index,
                p.death_time,
                p.cause,
                p.local_time_total,
                p.probes[0].map_or("dead".to_string(), |v| format!("{v:e}")),
            ));
        }
    }

    // Criterion 6: three KS comparisons.
    let (d_life, p_life) = stats::ks_two_sample(
        &mc_engine::lifetimes(&ens.last_exit),
        &mc_engine::lifetimes(&ens.bang_bang),
    );
    report.info("thm 1.2 lifetime KS statistic", d_life);
    report.check(6, "thm 1.2 lifetime KS p-value", p_life, 0.01, p_life > 0.01);

    let ma = mc_engine::probe_marginal(&ens.last_exit, 0);
    let mb = mc_engine::probe_marginal(&ens.bang_bang, 0);
    let (d_m, p_m) = stats::ks_two_sample(&ma, &mb);
    report.info("thm 1.2 time-0.5 marginal KS statistic", d_m);
    report.check(6, "thm 1.2 time-0.5 marginal KS p-value", p_m, 0.01, p_m > 0.01);

    let (d_l, p_l) = stats::ks_two_sample(
        &mc_engine::local_time_totals(&ens.last_exit),
        &mc_engine::local_time_totals(&ens.bang_bang),
    );
    report.info("thm 1.2 total local time KS statistic", d_l);
    report.check(6, "thm 1.2 total local time KS p-value", p_l, 0.01, p_l > 0.01);

    // Criterion 7: condition-near-point ladder against the last-exit
    // ensemble's time-0.5 marginal. BM increments are exact in law at any
    // step, so proposals run on a coarse grid aligned with the probe.
    let model = BmWithDrift::new(s.mu)?;
    let chars = model.characteristics();
    let band = LocalTimeBand::new(0.0, s.epsilon, |y| chars.speed_density(y))?;
    let bm = PathModel::Bm(model);
    let cond_config = PathConfig {
        dt: 0.05,
        probe_times: vec![0.5],
        ..PathConfig::default()
    };
    let mut ladder_csv = CsvFile::new("thm11_ladder", "lambda,ks_statistic,ks_p,acceptance_rate");
    let mut ks_ladder = Vec::new();
    let mut p_final = 0.0;
    for (li, &lambda) in s.lambda_ladder.iter().enumerate() {
        let policy = RngPolicy::new(s.master_seed ^ (0xabc0 + li as u64));
        let paths = mc_engine::run_ensemble(n, &policy, |i, rng| {
            mc_engine::condition_near_point(&bm, 0.0, lambda, 0.05, &band, &cond_config, rng, i, 0.0)
        })?;
        let mc = mc_engine::probe_marginal(&paths, 0);
        let (d, p) = stats::ks_two_sample(&mc, &ma);
        let attempts: f64 = paths.iter().map(|q| q.attempts as f64).sum();
        let acc = paths.len() as f64 / attempts;
        ladder_csv.push_row(format!("{lambda},{d:e},{p:e},{acc:e}"));
        ks_ladder.push(d);
        p_final = p;
    }
    let monotone = ks_ladder.windows(2).all(|w| w[0] >= w[1]);
    report.info(
        "thm 1.1 KS statistic at smallest lambda",
        *ks_ladder.last().unwrap(),
    );
    report.check(
        7,
        "thm 1.1 conditioned vs last-exit, KS p at smallest lambda",
        p_final,
        0.01,
        p_final > 0.01,
    );
    report.check(
        7,
        "thm 1.1 KS statistic nonincreasing along ladder",
        if monotone { 1.0 } else { 0.0 },
        1.0,
        monotone,
    );

    Ok((report, vec![ens_csv, ladder_csv]))
}

// ---------------------------------------------------------------------------
// ou-h: hit probabilities of the transient OU process (criterion 8)
// ---------------------------------------------------------------------------

fn ou_h_experiment(s: &Settings) -> Result<(Report, Vec<CsvFile>)> {
    let mut report = Report::new(s);
    let model = OuProcess::new(s.gamma)?;
    let gamma = s.gamma;
    let ou = PathModel::Generic {
        interval: Interval::real_line(),
        drift: std::sync::Arc::new(move |x| -gamma * x),
        dispersion: std::sync::Arc::new(|_| 1.0),
    };
    let config = PathConfig {
        dt: s.dt,
        horizon: 400.0,
        ..PathConfig::default()
    };
    // Beyond |x| = barrier the remaining hit probability is erfc(barrier) ~
    // 1.5e-8: negligible against the binomial error.
    let barrier = 4.0 / s.gamma.abs().sqrt();
    let n = s.paths(100_000);
    let policy = RngPolicy::new(s.master_seed);
    let mut csv = CsvFile::new("hit_prob", "x,empirical,erfc,binomial_se");
    let mut all_pass = true;
    let mut worst_z: f64 = 0.0;
    use rayon::prelude::*;
    for (xi, &x0) in [0.5, 1.0, 2.0].iter().enumerate() {
        let hits: usize = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = policy.substream((xi * n) as u64 + i as u64);
                mc_engine::hits_level_before_escape(
                    &ou, x0, 0.0, -barrier, barrier, &config, &mut rng,
                )
                .map(usize::from)
                .unwrap_or(0)
            })
            .sum();
        let emp = hits as f64 / n as f64;
        let expect = cfm::ou_h(&model, x0);
        let se = stats::binomial_std_error(expect, n);
        let z = (emp - expect).abs() / se;
        worst_z = worst_z.max(z);
        all_pass &= z < 3.0;
        csv.push_row(format!("{x0},{emp:e},{expect:e},{se:e}"));
    }
    report.check(
        8,
        "OU hit probability vs erfc, max |z| over x in {0.5, 1, 2}",
        worst_z,
        3.0,
        all_pass,
    );

    // The bang-bang OU speed is not an OU speed.
    let residual = bangbang::ou_bb_not_ou_residual(&model);
    report.check(
        8,
        "bang-bang OU speed: quadratic log-fit residual at x = 3",
        residual,
        0.1,
        residual > 0.1,
    );
    let mut speed_csv = CsvFile::new("bb_speed", "x,m_h_density");
    for i in 0..=300 {
        let x = -3.0 + 6.0 * i as f64 / 300.0;
        speed_csv.push_row(format!("{x},{:e}", bangbang::ou_bb_speed_density(&model, x)));
    }

    Ok((report, vec![csv, speed_csv]))
}

// ---------------------------------------------------------------------------
// logistic-drift: both drift conventions side by side, with an MC check
// ---------------------------------------------------------------------------

fn logistic_drift(s: &Settings) -> Result<(Report, Vec<CsvFile>)> {
    let mut report = Report::new(s);
    let model = LogisticSde::new(s.logistic_mu, s.logistic_kappa, s.logistic_sigma)?;
    let a = s.logistic_a;

    let mut drift_csv = CsvFile::new("drifts", "x,h,base_drift,drift_sigma_scaled,drift_unscaled");
    for i in 1..=400 {
        let x = 2.0 * a * i as f64 / 400.0;
        let h = cfm::logistic_h(&model, a, x)?;
        let base = s.logistic_mu * x - s.logistic_kappa * x * x;
        let scaled = cfm::logistic_conditioned_drift(&model, a, x)?;
        let unscaled = cfm::logistic_conditioned_drift_unscaled(&model, a, x)?;
        drift_csv.push_row(format!("{x},{h:e},{base:e},{scaled:e},{unscaled:e}"));
    }

    // MC check of h itself: P^x{T_a < inf} for x = a/2, simulated in
    // log-space (the drift is globally Lipschitz there).
    let x_probe = a / 2.0;
    let h_exact = cfm::logistic_h(&model, a, x_probe)?;
    let (lmu, lkappa, lsigma) = (s.logistic_mu, s.logistic_kappa, s.logistic_sigma);
    let log_model = PathModel::Generic {
        interval: Interval::real_line(),
        drift: std::sync::Arc::new(move |y: f64| lmu - lsigma * lsigma / 2.0 - lkappa * y.exp()),
        dispersion: std::sync::Arc::new(move |_| lsigma),
    };
    // Escape floor: below y_low the remaining hit probability is < 1e-3 of
    // the target scale.
    let mut x_low = x_probe;
    while cfm::logistic_h(&model, a, x_low)? > 1e-3 {
        x_low *= 0.5;
        if x_low < 1e-12 {
            break;
        }
    }
    let y_low = x_low.ln();
    let n = s.paths(20_000);
    let config = PathConfig {
        dt: 1e-3,
        horizon: 2000.0,
        ..PathConfig::default()
    };
    let policy = RngPolicy::new(s.master_seed);
    use rayon::prelude::*;
    let hits: usize = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = policy.substream(i as u64);
            mc_engine::hits_level_before_escape(
                &log_model,
                x_probe.ln(),
                a.ln(),
                y_low,
                a.ln() + 30.0,
                &config,
                &mut rng,
            )
            .map(usize::from)
            .unwrap_or(0)
        })
        .sum();
    let emp = hits as f64 / n as f64;
    let se = stats::binomial_std_error(h_exact, n);
    let tol = 3.0 * se + 1.5e-3;
    let pass = (emp - h_exact).abs() < tol;
    report.check_stderr(
        0,
        "logistic h(a/2) quadrature vs Monte Carlo",
        emp - h_exact,
        se,
        tol,
        pass,
    );
    report.info("logistic h(a/2) quadrature value", h_exact);

    Ok((report, vec![drift_csv]))
}

// ---------------------------------------------------------------------------
// fd-validate: discrete conditioned generator vs analytic oracle and MC
// (criterion 10)
// ---------------------------------------------------------------------------

/// `(lambda - G^h)^{-1} f` for the killed bang-bang process of BM(-mu),
/// evaluated by quadrature through the h-transform identity
/// `R^h_lambda f(x) = (1/h(x)) int r_lambda(x,y) h(y) f(y) m'(y) dy`.
fn bm_killed_resolvent_exact<F: Fn(f64) -> f64 + Copy>(
    model: &BmWithDrift,
    lambda: f64,
    f: F,
    x: f64,
) -> Result<f64> {
    let mu = model.mu();
    let h = |y: f64| (2.0 * mu * y.min(0.0)).exp();
    let integrand = move |y: f64| {
        model.resolvent_kernel_m(lambda, x, y) * h(y) * f(y) * 2.0 * (-2.0 * mu * y).exp()
    };
    let tol = Tol::new(1e-12, 1e-10);
    // Split at the kinks of the integrand (y = x and y = 0).
    let mut cuts = vec![x, 0.0];
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut total = quadrature::integrate_from_neg_inf(integrand, cuts[0], tol)?;
    total += quadrature::integrate(integrand, cuts[0], cuts[1], tol)?;
    total += quadrature::integrate_to_inf(integrand, cuts[1], tol)?;
    Ok(total / h(x))
}

fn fd_operator(s: &Settings, dx: f64, half_width: f64) -> Result<fd_generator::DiscreteOperator> {
    let model = BmWithDrift::new(s.mu)?;
    let chars = model.characteristics();
    let h = h_hit(&chars, 0.0)?;
    let tc = transform_characteristics(&chars, &h, &RepresentingMeasure::point_mass(0.0))?;
    let grid = Grid::uniform_around(0.0, half_width, half_width, dx)?;
    fd_generator::build_operator(&tc, grid, BoundaryMode::Absorbing)
}

fn fd_validate(s: &Settings) -> Result<(Report, Vec<CsvFile>)> {
    let mut report = Report::new(s);
    let model = BmWithDrift::new(s.mu)?;
    let lambda = 2.0;
    let source = |y: f64| (-y * y).exp();
    let half_width = 16.0;

    // Grid-refinement study of the resolvent solve.
    let mut interior_err = Vec::new();
    let mut at_a_err = Vec::new();
    let mut conv_csv = CsvFile::new("fd_convergence", "dx,interior_linf_error,error_at_a");
    let dxs = [0.08, 0.04, 0.02, 0.01];
    for &dx in &dxs {
        let op = fd_operator(s, dx, half_width)?;
        let nodes = op.grid().nodes().to_vec();
        let f: Vec<f64> = nodes.iter().map(|&x| source(x)).collect();
        let u = fd_generator::resolvent_solve(&op, lambda, &f)?;
        let mut linf: f64 = 0.0;
        let mut err_a = 0.0;
        for (i, &x) in nodes.iter().enumerate() {
            if x.abs() > 4.0 {
                continue;
            }
            let exact = bm_killed_resolvent_exact(&model, lambda, source, x)?;
            let e = (u[i] - exact).abs();
            if x == 0.0 {
                err_a = e;
            } else if x.abs() > 0.5 {
                linf = linf.max(e);
            }
        }
        conv_csv.push_row(format!("{dx},{linf:e},{err_a:e}"));
        interior_err.push(linf);
        at_a_err.push(err_a);
    }
    let interior_ratio = interior_err[interior_err.len() - 2] / interior_err[interior_err.len() - 1];
    let at_a_ratio = at_a_err[at_a_err.len() - 2] / at_a_err[at_a_err.len() - 1];
    report.check(
        10,
        "FD resolvent interior error doubling ratio (expect ~4)",
        interior_ratio,
        4.6,
        (3.4..=4.6).contains(&interior_ratio),
    );
    report.check(
        10,
        "FD resolvent error-at-a doubling ratio (expect ~2)",
        at_a_ratio,
        2.3,
        (1.7..=2.3).contains(&at_a_ratio),
    );

    // Semigroup marginal at t = 1 from a delta at the conditioning point vs
    // the Monte Carlo conditioned ensemble.
    let dx = 0.01;
    let op = fd_operator(s, dx, 8.0)?;
    let u0 = op.delta_density(op.grid().a_index());
    let steps = 4000;
    let u1 = fd_generator::semigroup_evolve(&op, 1.0, &u0, steps)?;
    let nodes = op.grid().nodes().to_vec();
    let masses: Vec<f64> = u1
        .iter()
        .zip(op.weights())
        .map(|(&v, &w)| (v * w).max(0.0))
        .collect();
    let alive: f64 = masses.iter().sum();
    report.info("FD alive mass at t = 1", alive);
    let mut dens_csv = CsvFile::new("fd_t1_density", "x,mass");
    for (i, &x) in nodes.iter().enumerate() {
        dens_csv.push_row(format!("{x},{:e}", masses[i]));
    }
    // Piecewise-linear CDF of the FD density (cell masses at node centers).
    let mut cum = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    for &m in &masses {
        acc += m;
        cum.push(acc / alive);
    }
    let fd_cdf = move |x: f64| -> f64 {
        match nodes.binary_search_by(|probe| probe.partial_cmp(&x).unwrap()) {
            Ok(i) => cum[i],
            Err(0) => 0.0,
            Err(i) if i >= cum.len() => 1.0,
            Err(i) => {
                let frac = (x - nodes[i - 1]) / (nodes[i] - nodes[i - 1]);
                cum[i - 1] + frac * (cum[i] - cum[i - 1])
            }
        }
    };

    let n = s.paths(100_000);
    let chars = model.characteristics();
    let h = h_hit(&chars, 0.0)?;
    let band = LocalTimeBand::new(0.0, s.epsilon, |y| chars.speed_density(y))?;
    let config = PathConfig {
        dt: s.dt,
        epsilon: s.epsilon,
        escape_delta: s.escape_delta,
        probe_times: vec![1.0],
        ..PathConfig::default()
    };
    let bm = PathModel::Bm(model);
    let policy = RngPolicy::new(s.master_seed);
    let paths = mc_engine::run_ensemble(n, &policy, |i, rng| {
        mc_engine::run_to_last_exit(&bm, &h, 0.0, &band, &config, rng, i)
    })?;
    let alive_states = mc_engine::probe_marginal(&paths, 0);
    report.info("MC alive fraction at t = 1", alive_states.len() as f64 / n as f64);
    let (d, p) = stats::ks_one_sample(&alive_states, fd_cdf);
    report.info("FD vs MC t=1 marginal KS statistic", d);
    report.check(
        10,
        "FD semigroup vs MC conditioned marginal at t = 1, KS p-value",
        p,
        0.01,
        p > 0.01,
    );

    Ok((report, vec![conv_csv, dens_csv]))
}

// ---------------------------------------------------------------------------
// localtime-cond: the alternative conditioning (criterion 9)
// ---------------------------------------------------------------------------

fn localtime_cond(s: &Settings) -> Result<(Report, Vec<CsvFile>)> {
    let mut report = Report::new(s);
    let model = BmWithDrift::new(s.mu)?;
    let chars = model.characteristics();
    let h = h_hit(&chars, 0.0)?;
    let band = LocalTimeBand::new(0.0, s.epsilon, |y| chars.speed_density(y))?;
    let config = PathConfig {
        dt: s.dt,
        epsilon: s.epsilon,
        escape_delta: s.escape_delta,
        ..PathConfig::default()
    };
    let bm = PathModel::Bm(model);
    // nu = 1/r_0(0,0) in the m-normalization used by the band estimator.
    let nu = bangbang::bb_kill_rate(&bangbang::bm_resolvent_oracle(&model), 0.0)?;
    report.info("infinite-excursion local-time rate nu = 1/r0(0,0)", nu);

    let n = s.paths(100_000);
    let mut csv = CsvFile::new("death_local_time", "lambda,ks_statistic,ks_p,acceptance_rate,mean");
    let mut all_pass = true;
    for (li, &lambda) in s.lambda_ladder.iter().enumerate() {
        let policy = RngPolicy::new(s.master_seed ^ (0x10ca1 + li as u64));
        let paths = mc_engine::run_ensemble(n, &policy, |i, rng| {
            mc_engine::condition_on_local_time(&bm, &h, lambda, &band, &config, rng, i, 0.0)
        })?;
        // Death local time is the accepted clock draw itself; the theorem
        // says it is Exp(lambda + nu).
        let sample: Vec<f64> = paths.iter().map(|p| p.local_time_exact).collect();
        let rate = lambda + nu;
        let (d, p) = stats::ks_one_sample(&sample, |x| 1.0 - (-rate * x).exp());
        let attempts: f64 = paths.iter().map(|q| q.attempts as f64).sum();
        let acc = paths.len() as f64 / attempts;
        csv.push_row(format!("{lambda},{d:e},{p:e},{acc:e},{:e}", stats::mean(&sample)));
        report.check(
            9,
            &format!("death local time ~ Exp(lambda+nu) at lambda = {lambda}: KS p"),
            p,
            0.01,
            p > 0.01,
        );
        all_pass &= p > 0.01;
    }
    let _ = all_pass;

    Ok((report, vec![csv]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_exhaustive_and_disjoint() {
        let mut seen = std::collections::BTreeSet::new();
        for exp in ALL_EXPERIMENTS {
            for &c in exp.criteria() {
                assert!(seen.insert(c), "criterion {c} owned by two subcommands");
            }
        }
        let expected: std::collections::BTreeSet<u32> = (1..=10).collect();
        assert_eq!(seen, expected, "criteria registry must cover 1..=10 exactly once");
    }

    #[test]
    fn experiment_names_round_trip() {
        for exp in ALL_EXPERIMENTS {
            assert_eq!(Experiment::from_name(exp.name()), Some(exp));
        }
        assert_eq!(Experiment::from_name("nope"), None);
    }

    #[test]
    fn settings_validation() {
        let mut file = ConfigFile::default();
        let over = Overrides::default();
        assert!(Settings::resolve(Experiment::CtmcVerify, &file, &over).is_ok());
        file.beta = Some(0.5);
        assert!(matches!(
            Settings::resolve(Experiment::CtmcVerify, &file, &over),
            Err(Error::Config(_))
        ));
        file.beta = None;
        file.lambda_ladder = Some(vec![0.1, 0.5]);
        assert!(Settings::resolve(Experiment::CtmcVerify, &file, &over).is_err());
    }

    #[test]
    fn config_file_rejects_unknown_fields() {
        let dir = std::env::temp_dir().join("lastexit_cfg_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.toml");
        std::fs::write(&path, "alpha = 1.0\nbogus_field = 3\n").unwrap();
        assert!(matches!(ConfigFile::load(&path), Err(Error::Config(_))));
        let good = dir.join("good.toml");
        std::fs::write(&good, "alpha = 1.5\nbeta = 3.0\nmaster_seed = 7\n").unwrap();
        let cfg = ConfigFile::load(&good).unwrap();
        assert_eq!(cfg.alpha, Some(1.5));
        assert_eq!(cfg.master_seed, Some(7));
    }

    #[test]
    fn quick_mode_scales_ensembles() {
        let file = ConfigFile::default();
        let over = Overrides {
            quick: true,
            ..Overrides::default()
        };
        let s = Settings::resolve(Experiment::BmThm12, &file, &over).unwrap();
        assert_eq!(s.paths(100_000), 5_000);
        let over = Overrides {
            n_paths: Some(123),
            ..Overrides::default()
        };
        let s = Settings::resolve(Experiment::BmThm12, &file, &over).unwrap();
        assert_eq!(s.paths(100_000), 123);
    }

    #[test]
    fn ctmc_verify_passes_quickly() {
        let file = ConfigFile::default();
        let over = Overrides::default();
        let s = Settings::resolve(Experiment::CtmcVerify, &file, &over).unwrap();
        let (report, csvs) = dispatch(Experiment::CtmcVerify, &s).unwrap();
        assert!(report.passed, "rows: {:#?}", report.rows);
        assert!(!csvs.is_empty());
    }
}
