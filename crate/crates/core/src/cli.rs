//! Command-line front end.
//!
//! Settings come from an optional JSON document (`--config`) and are overridden
//! by flags. The seed falls back to `NLGLASS_SEED`, then 0. Exit status: 0 all
//! checks pass, 1 a check failed, 2 usage or configuration error, 3 a check was
//! inconclusive and none failed.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{block_layout, GibbsRequest};
use crate::mc::MCConfig;
use crate::model::{realize, ModelSpec};
use crate::theory;
use crate::verify::{self, CheckReport, Engine, Status, VerifyPolicy};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

pub const CHECKS: [&str; 14] = [
    "nishimori",
    "internal-energy",
    "p-mono",
    "n-mono",
    "lemma5",
    "lemma6",
    "lemma7",
    "lemma8-chain",
    "thm2-couplings",
    "thm2-correlations",
    "thm3-decay",
    "dq-dt",
    "mc-crosscheck",
    "beta-mono",
];

#[derive(Parser, Debug)]
#[command(name = "nlglass", version, about = "Gaussian spin glasses on the Nishimori line: exact, Monte Carlo and closed-form checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one named check, or all of them
    Verify(Common),
    /// Tabulate the closed-form bounds over an (alpha, beta) grid
    Scan(ScanArgs),
    /// Disorder-averaged pair correlations and block moments by enumeration
    Exact(Common),
    /// Disorder-averaged pair correlations and block moments by Monte Carlo
    Mc(Common),
    /// Dump one disorder realization as a bond table
    Sample(SampleArgs),
}

#[derive(Args, Debug, Default, Clone)]
struct Common {
    /// JSON configuration document
    #[arg(long)]
    config: Option<PathBuf>,
    /// Check name (verify only)
    #[arg(long)]
    check: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Hierarchy levels of the Dyson model
    #[arg(long = "N")]
    levels: Option<u32>,
    /// Sites of the long-range chain; selects that family
    #[arg(long = "L")]
    sites: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory, created if absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// exact | mc
    #[arg(long)]
    engine: Option<String>,
    /// Total Monte Carlo sweeps per chain
    #[arg(long)]
    sweeps: Option<u64>,
    #[arg(long)]
    burn_in: Option<u64>,
}

#[derive(Args, Debug, Clone)]
struct ScanArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha_min: Option<f64>,
    #[arg(long)]
    alpha_max: Option<f64>,
    #[arg(long)]
    alpha_step: Option<f64>,
    #[arg(long)]
    beta_min: Option<f64>,
    #[arg(long)]
    beta_max: Option<f64>,
    /// Number of log-spaced beta values
    #[arg(long)]
    beta_points: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SampleArgs {
    #[command(flatten)]
    common: Common,
    /// Disorder sample index
    #[arg(long, default_value_t = 0)]
    index: u64,
}

/// Grid for the `scan` command. Alpha is linear and inclusive, beta log-spaced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanGrid {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_step: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_points: usize,
}

impl Default for ScanGrid {
    fn default() -> Self {
        Self { alpha_min: 1.05, alpha_max: 1.45, alpha_step: 0.05, beta_min: 0.05, beta_max: 16.0, beta_points: 24 }
    }
}

impl ScanGrid {
    pub fn alphas(&self) -> Result<Vec<f64>> {
        if !(self.alpha_step > 0.0) || !(self.alpha_max >= self.alpha_min) {
            return Err(Error::InvalidArgument("empty alpha grid".into()));
        }
        let n = ((self.alpha_max - self.alpha_min) / self.alpha_step + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|k| self.alpha_min + k as f64 * self.alpha_step).collect())
    }

    pub fn betas(&self) -> Result<Vec<f64>> {
        if self.beta_points == 0 || !(self.beta_min > 0.0) || !(self.beta_max >= self.beta_min) {
            return Err(Error::InvalidArgument("empty beta grid".into()));
        }
        if self.beta_points == 1 {
            return Ok(vec![self.beta_min]);
        }
        let (a, b) = (self.beta_min.ln(), self.beta_max.ln());
        let m = (self.beta_points - 1) as f64;
        Ok((0..self.beta_points).map(|k| (a + (b - a) * k as f64 / m).exp()).collect())
    }
}

/// The JSON configuration document. Every field is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub check: Option<String>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    #[serde(rename = "N")]
    pub levels: Option<u32>,
    #[serde(rename = "L")]
    pub sites: Option<usize>,
    /// Full model description for `exact`, `mc` and `sample`; overrides `N`, `L`, `alpha`.
    pub model: Option<ModelSpec>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub engine: Option<Engine>,
    pub k_sigma: Option<f64>,
    pub exact_tol: Option<f64>,
    pub cap: Option<usize>,
    pub mc: Option<MCConfig>,
    /// Site pairs, numbered from 1.
    pub pairs: Option<Vec<(usize, usize)>>,
    /// Block level for `n-mono`.
    pub p: Option<u32>,
    /// Interpolation parameter for `dq-dt`.
    pub t: Option<f64>,
    /// Chain lengths for `thm3-decay`.
    pub lengths: Option<Vec<usize>>,
    /// Larger inverse temperature for `beta-mono`.
    pub beta_hi: Option<f64>,
    /// Realizations for `mc-crosscheck`.
    pub realizations: Option<usize>,
    pub scan: Option<ScanGrid>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    fn apply(&mut self, c: &Common) -> Result<()> {
        macro_rules! over {
            ($($f:ident <- $g:ident),*) => { $( if c.$g.is_some() { self.$f = c.$g.clone(); } )* };
        }
        over!(check <- check, alpha <- alpha, beta <- beta, levels <- levels, sites <- sites,
              samples <- samples, seed <- seed, workers <- workers, out <- out);
        if let Some(e) = &c.engine {
            self.engine = Some(e.parse()?);
        }
        if c.sweeps.is_some() || c.burn_in.is_some() {
            let mut mc = self.mc.clone().unwrap_or_default();
            if let Some(s) = c.sweeps {
                mc.sweeps = s;
            }
            if let Some(b) = c.burn_in {
                mc.burn_in = b;
            } else if c.sweeps.is_some() {
                mc.burn_in = mc.sweeps / 10;
            }
            self.mc = Some(mc);
        }
        // An explicit size flag picks its family over the file's choice.
        if c.levels.is_some() && c.sites.is_none() {
            self.sites = None;
        }
        if c.levels.is_some() || c.sites.is_some() || c.alpha.is_some() {
            self.model = None;
        }
        Ok(())
    }

    fn from_common(c: &Common) -> Result<Self> {
        let mut cfg = match &c.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(c)?;
        Ok(cfg)
    }

    /// Seed from the configuration, else `NLGLASS_SEED`, else 0.
    pub fn resolved_seed(&self) -> Result<u64> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var("NLGLASS_SEED") {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("NLGLASS_SEED is not an unsigned integer: '{v}'"))),
            Err(_) => Ok(0),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(1.25)
    }

    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(1.0)
    }

    pub fn levels(&self) -> u32 {
        self.levels.unwrap_or(3)
    }

    pub fn policy(&self) -> Result<VerifyPolicy> {
        let mut p = VerifyPolicy { seed: self.resolved_seed()?, ..VerifyPolicy::default() };
        if let Some(n) = self.samples {
            p.n_samples = n;
        }
        if let Some(w) = self.workers {
            p.workers = w;
        }
        if let Some(e) = self.engine {
            p.engine = e;
        }
        if let Some(k) = self.k_sigma {
            p.k_sigma = k;
        }
        if let Some(t) = self.exact_tol {
            p.exact_tol = t;
        }
        if let Some(c) = self.cap {
            p.cap = c;
        }
        if let Some(mc) = &self.mc {
            p.mc = mc.clone();
        }
        p.validate()?;
        Ok(p)
    }

    /// Model for `exact`, `mc` and `sample`: `model`, else `L` (long-range),
    /// else `N` (Dyson).
    pub fn model(&self) -> Result<ModelSpec> {
        let spec = match (&self.model, self.sites) {
            (Some(m), _) => {
                let mut m = m.clone();
                if let Some(b) = self.beta {
                    m.beta = b;
                }
                m
            }
            (None, Some(l)) => ModelSpec::long_range(l, self.alpha(), self.beta()),
            (None, None) => ModelSpec::dyson(self.levels(), self.alpha(), self.beta()),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Pairs as 0-based indices, or `default` when none are configured.
    fn pairs_or(&self, n: usize, default: Vec<(usize, usize)>) -> Result<Vec<(usize, usize)>> {
        match &self.pairs {
            None => Ok(default),
            Some(list) => list
                .iter()
                .map(|&(i, j)| {
                    if i == 0 || j == 0 || i > n || j > n || i == j {
                        Err(Error::InvalidArgument(format!("pair ({i}, {j}) invalid for {n} sites")))
                    } else {
                        Ok((i - 1, j - 1))
                    }
                })
                .collect(),
        }
    }
}

/// Run one check by name.
pub fn run_check(name: &str, cfg: &RunConfig, policy: &VerifyPolicy) -> Result<CheckReport> {
    let (a, b, n) = (cfg.alpha(), cfg.beta(), cfg.levels());
    let dyson_or_chain = || -> ModelSpec {
        match cfg.sites {
            Some(l) => ModelSpec::long_range(l, a, b),
            None => ModelSpec::dyson(n, a, b),
        }
    };
    match name {
        "nishimori" => {
            let spec = dyson_or_chain();
            let pair = cfg.pairs_or(spec.site_count(), vec![(0, 1)])?[0];
            verify::check_nishimori_identity(&spec, pair, policy)
        }
        "internal-energy" => verify::check_internal_energy(&dyson_or_chain(), policy),
        "p-mono" => verify::check_block_monotonicity(&dyson_or_chain(), policy),
        "n-mono" => verify::check_growth_monotonicity(
            &ModelSpec::dyson(n, a, b),
            &ModelSpec::dyson(n + 1, a, b),
            cfg.p.unwrap_or(1),
            policy,
        ),
        "lemma5" => verify::check_lemma5(n, a, b, policy),
        "lemma6" => verify::check_lemma6(n, a, b, policy),
        "lemma7" => verify::check_lemma7(n, a, b, policy),
        "lemma8-chain" => verify::check_lemma8_chain(n, a, b, policy),
        "thm2-couplings" => verify::check_thm2_couplings(n, a, policy),
        "thm2-correlations" => {
            let size = 1usize << n;
            let default = vec![(0, 1), (0, size - 1), (size / 2 - 1, size / 2)];
            let pairs = cfg.pairs_or(size, default)?;
            verify::check_thm2_correlations(n, a, b, &pairs, policy)
        }
        "thm3-decay" => {
            let lengths = cfg.lengths.clone().unwrap_or_else(|| vec![8, 12, 16]);
            let beta = match cfg.beta {
                Some(b) => b,
                None => 0.5 * theory::thm3_threshold(a)?,
            };
            verify::check_thm3_decay(&lengths, a, beta, policy)
        }
        "dq-dt" => verify::check_dq_dt(n, a, b, cfg.t.unwrap_or(0.5), policy),
        "mc-crosscheck" => {
            // Single-flip chains freeze on the strongly coupled side, so the
            // defaults sit at moderate coupling with long chains.
            let b = cfg.beta.unwrap_or(0.4);
            let spec = match cfg.sites {
                Some(l) => ModelSpec::long_range(l, a, b),
                None if cfg.levels.is_some() => ModelSpec::dyson(n, a, b),
                None => ModelSpec::long_range(12, a, b),
            };
            let mut policy = policy.clone();
            if cfg.mc.is_none() {
                policy.mc = MCConfig::new(100_000, 10_000, 0);
            }
            verify::check_mc_crosscheck(&spec, cfg.realizations.unwrap_or(4), &policy)
        }
        "beta-mono" => {
            let spec = dyson_or_chain();
            let pairs = cfg.pairs_or(spec.site_count(), vec![(0, 1)])?;
            verify::check_beta_monotonicity(&spec, b, cfg.beta_hi.unwrap_or(2.0 * b), &pairs, policy)
        }
        other => Err(Error::InvalidArgument(format!("unknown check '{other}'"))),
    }
}

fn status_exit(reports: &[CheckReport]) -> i32 {
    match reports.iter().map(|r| r.status).max() {
        Some(Status::Fail) => EXIT_FAIL,
        Some(Status::Inconclusive) => EXIT_INCONCLUSIVE,
        _ => EXIT_PASS,
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn cmd_verify(c: &Common, out: &mut dyn Write) -> Result<i32> {
    let cfg = RunConfig::from_common(c)?;
    let name = cfg
        .check
        .clone()
        .ok_or_else(|| Error::InvalidArgument(format!("--check is required; one of: {}, all", CHECKS.join(", "))))?;
    let names: Vec<&str> = if name == "all" {
        CHECKS.to_vec()
    } else if CHECKS.contains(&name.as_str()) {
        vec![name.as_str()]
    } else {
        return Err(Error::InvalidArgument(format!("unknown check '{name}'; one of: {}, all", CHECKS.join(", "))));
    };
    let policy = cfg.policy()?;
    let mut reports = Vec::new();
    for n in &names {
        match run_check(n, &cfg, &policy) {
            Ok(r) => {
                writeln!(out, "{}", r.summary_line())?;
                reports.push(r);
            }
            // A batch skips checks whose preconditions the shared settings miss.
            Err(e) if names.len() > 1 => writeln!(out, "{:<12} {:<18} {e}", "SKIPPED", n)?,
            Err(e) => return Err(e),
        }
    }
    if let Some(dir) = &cfg.out {
        ensure_dir(dir)?;
        for r in &reports {
            fs::write(dir.join(format!("{}.json", r.check)), serde_json::to_string_pretty(r)? + "\n")?;
        }
        let mut table = String::from("check,status,margin\n");
        for r in &reports {
            table.push_str(&format!("{},{},{:e}\n", r.check, r.status, r.margin));
        }
        fs::write(dir.join("summary.csv"), table)?;
    }
    Ok(status_exit(&reports))
}

/// Rows of the scan table: `alpha,beta,thm1_valid,thm1_total,thm3_threshold,below_threshold`.
pub fn scan_rows(grid: &ScanGrid) -> Result<Vec<(f64, f64, bool, f64, f64, bool)>> {
    let alphas = grid.alphas()?;
    let betas = grid.betas()?;
    let mut rows = Vec::with_capacity(alphas.len() * betas.len());
    for &a in &alphas {
        let threshold = theory::thm3_threshold(a)?;
        for &b in &betas {
            let r = theory::Theorem1Report::evaluate(b, a);
            rows.push((a, b, r.validity.holds(), r.total, threshold, b < threshold));
        }
    }
    Ok(rows)
}

fn cmd_scan(s: &ScanArgs, out: &mut dyn Write) -> Result<i32> {
    let file = match &s.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut grid = file.scan.clone().unwrap_or_default();
    macro_rules! over {
        ($($f:ident),*) => { $( if let Some(v) = s.$f { grid.$f = v; } )* };
    }
    over!(alpha_min, alpha_max, alpha_step, beta_min, beta_max, beta_points);
    let rows = scan_rows(&grid)?;
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["alpha", "beta", "thm1_valid", "thm1_total", "thm3_threshold", "below_threshold"])?;
        for (a, b, valid, total, thr, below) in &rows {
            w.write_record([
                format!("{a:.6}"),
                format!("{b:e}"),
                valid.to_string(),
                format!("{total:e}"),
                format!("{thr:e}"),
                below.to_string(),
            ])?;
        }
        w.flush()?;
    }
    match s.out.as_ref().or(file.out.as_ref()) {
        Some(dir) => {
            ensure_dir(dir)?;
            let path = dir.join("scan.csv");
            fs::write(&path, &buf)?;
            writeln!(out, "{} rows written to {}", rows.len(), path.display())?;
        }
        None => out.write_all(&buf)?,
    }
    Ok(EXIT_PASS)
}

fn cmd_tables(c: &Common, engine: Engine, out: &mut dyn Write) -> Result<i32> {
    let mut cfg = RunConfig::from_common(c)?;
    cfg.engine = Some(engine);
    let policy = cfg.policy()?;
    let spec = cfg.model()?;
    let n = spec.site_count();
    if engine == Engine::Exact && n > policy.cap {
        return Err(Error::CapExceeded { needed: n, cap: policy.cap });
    }
    let layout = block_layout(n);
    let max_p = layout.last().map_or(0, |b| b.0);
    let req = GibbsRequest { block_moments: true, ..GibbsRequest::all_pairs() };
    let cols = verify::disorder_average_vec(
        &spec,
        |r| {
            let (g, _) = verify::thermal_report(r, &spec, &req, &policy, "replica-a")?;
            let mut v: Vec<f64> = g.pair_corr.iter().map(|p| p.value).collect();
            v.extend((0..=max_p).map(|p| g.mean_normalized(p).unwrap_or(f64::NAN)));
            Ok(v)
        },
        &policy,
    )?;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut pair_csv = csv::Writer::from_writer(Vec::new());
    pair_csv.write_record(["i", "j", "mean", "se", "n_samples"])?;
    for ((i, j), e) in pairs.iter().zip(&cols) {
        pair_csv.write_record([
            (i + 1).to_string(),
            (j + 1).to_string(),
            format!("{:e}", e.mean),
            format!("{:e}", e.se),
            e.n_samples.to_string(),
        ])?;
    }
    let mut f_csv = csv::Writer::from_writer(Vec::new());
    f_csv.write_record(["p", "mean", "se", "n_samples"])?;
    for (p, e) in cols[pairs.len()..].iter().enumerate() {
        f_csv.write_record([p.to_string(), format!("{:e}", e.mean), format!("{:e}", e.se), e.n_samples.to_string()])?;
    }
    let pair_bytes = pair_csv.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let f_bytes = f_csv.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    ensure_dir(&dir)?;
    fs::write(dir.join("pairs.csv"), pair_bytes)?;
    fs::write(dir.join("f.csv"), &f_bytes)?;
    out.write_all(&f_bytes)?;
    writeln!(out, "tables written to {}", dir.display())?;
    Ok(EXIT_PASS)
}

fn cmd_sample(s: &SampleArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = RunConfig::from_common(&s.common)?;
    let spec = cfg.model()?;
    let r = realize(Arc::new(spec.laws()?), cfg.resolved_seed()?, s.index)?;
    match &cfg.out {
        Some(dir) => {
            ensure_dir(dir)?;
            let path = dir.join(format!("sample_{}.csv", s.index));
            r.write_csv(fs::File::create(&path)?)?;
            writeln!(out, "{} bonds written to {}", r.couplings.len(), path.display())?;
        }
        None => r.write_csv(&mut *out)?,
    }
    Ok(EXIT_PASS)
}

/// Parse `args` (program name first) and run. Returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_PASS;
        }
    };
    let result = match &cli.command {
        Command::Verify(c) => cmd_verify(c, out),
        Command::Scan(s) => cmd_scan(s, out),
        Command::Exact(c) => cmd_tables(c, Engine::Exact, out),
        Command::Mc(c) => cmd_tables(c, Engine::Mc, out),
        Command::Sample(s) => cmd_sample(s, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if matches!(e, Error::InvalidArgument(_)) {
                let _ = writeln!(err, "run `nlglass --help` for usage");
            }
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("nlglass").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn unknown_check_is_usage_error() {
        let (code, _, err) = call(&["verify", "--check", "nope"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("unknown check"));
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(call(&["verify", "--frobnicate"]).0, EXIT_USAGE);
    }

    #[test]
    fn grid_counts() {
        let g = ScanGrid::default();
        assert_eq!(g.alphas().unwrap().len(), 9);
        assert_eq!(g.betas().unwrap().len(), 24);
        assert!((g.betas().unwrap()[23] - 16.0).abs() < 1e-12);
        assert!(ScanGrid { beta_points: 0, ..g.clone() }.betas().is_err());
        assert!(ScanGrid { alpha_max: 1.0, ..g }.alphas().is_err());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"alhpa": 1.2}"#).is_err());
        let c: RunConfig = serde_json::from_str(r#"{"alpha": 1.2, "N": 2, "engine": "mc"}"#).unwrap();
        assert_eq!(c.levels, Some(2));
        assert_eq!(c.engine, Some(Engine::Mc));
    }
}
