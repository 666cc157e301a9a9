//! Command-line front end.
//!
//! Every subcommand writes one artifact (JSON or CSV) to stdout or to
//! `--output`. Exit codes: 0 success, 1 numerical failure, 2 invalid input.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::analytic::{closed_form_errata, ErrataEntry};
use crate::cascade::{b_prime, cascade_errata, CVEntangledState, CascadeSimulator, Stage1Params};
use crate::entanglement::schmidt_negativity;
use crate::error::{Error, Result};
use crate::fock::{DelocalizedPhoton, SqueezeParam, DEFAULT_MAX_CUTOFF, DEFAULT_TAIL_EPS};
use crate::herald::{herald_distribution, HeraldSimulator, PipelineConfig};
use crate::interferometer::{validate_printed_forms, BeamSplitter, ValidationEntry};
use crate::search::{scan_grid, solve_max_negativity, verify_table2, Axis, ScanGrid, SolveOptions, Table2Report};

#[derive(Debug, Parser, Serialize)]
#[command(name = "heralded-hybrid", version, about = "Heralded hybrid and CV entangled state workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct CommonArgs {
    /// Squeezed-vacuum tail mass left outside the cutoff.
    #[arg(long, global = true, default_value_t = DEFAULT_TAIL_EPS)]
    pub tail_eps: f64,

    /// Fixed squeezed-vacuum cutoff instead of the adaptive one.
    #[arg(long, global = true)]
    pub cutoff: Option<usize>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Also write the resolved run configuration as JSON.
    #[arg(long, global = true)]
    pub emit_config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Herald a hybrid state on one outcome (or a range of outcomes).
    Herald(HeraldArgs),
    /// Negativity and probability surfaces over (r_sq, t).
    Scan(ScanArgs),
    /// Operating points of maximal negativity.
    Solve(SolveArgs),
    /// Check the printed forms and tables against the numeric pipeline.
    Verify(VerifyArgs),
    /// Second heralding stage producing a CV entangled state.
    Cascade(CascadeArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct PhotonArgs {
    /// |a1| of the delocalized photon.
    #[arg(long = "a1", default_value_t = std::f64::consts::FRAC_1_SQRT_2)]
    pub a1: f64,

    /// Phase of a1 in radians.
    #[arg(long = "a1-phase", default_value_t = 0.0, allow_negative_numbers = true)]
    pub a1_phase: f64,

    /// |a0|; inferred from normalization when absent.
    #[arg(long = "a0")]
    pub a0: Option<f64>,
}

impl PhotonArgs {
    fn photon(&self) -> Result<DelocalizedPhoton> {
        if !self.a1.is_finite() || !(0.0..=1.0).contains(&self.a1) {
            return Err(Error::InvalidParameter(format!("|a1| = {} must lie in [0, 1]", self.a1)));
        }
        let a0 = match self.a0 {
            Some(a0) if !(a0.is_finite() && a0 >= 0.0) => {
                return Err(Error::InvalidParameter(format!("|a0| = {a0} must be a non-negative number")))
            }
            Some(a0) => a0,
            None => (1.0 - self.a1 * self.a1).max(0.0).sqrt(),
        };
        DelocalizedPhoton::new(C64::new(a0, 0.0), C64::from_polar(self.a1, self.a1_phase))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct HeraldArgs {
    #[arg(long = "r-sq")]
    pub r_sq: f64,

    /// Beam-splitter transmittance.
    #[arg(long = "t")]
    pub t: f64,

    #[command(flatten)]
    pub photon: PhotonArgs,

    /// Photon number registered in the auxiliary mode.
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    pub p: i64,

    /// Emit every outcome up to this one instead of a single record.
    #[arg(long = "p-max", allow_negative_numbers = true)]
    pub p_max: Option<i64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ScanArgs {
    #[command(flatten)]
    pub photon: PhotonArgs,

    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    pub p: i64,

    #[arg(long = "r-min", default_value_t = 0.0)]
    pub r_min: f64,
    #[arg(long = "r-max", default_value_t = 1.5)]
    pub r_max: f64,
    #[arg(long = "r-steps", default_value_t = 50)]
    pub r_steps: usize,
    #[arg(long = "t-min", default_value_t = 0.02)]
    pub t_min: f64,
    #[arg(long = "t-max", default_value_t = 0.98)]
    pub t_max: f64,
    #[arg(long = "t-steps", default_value_t = 50)]
    pub t_steps: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub photon: PhotonArgs,

    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    pub p: i64,

    #[arg(long = "r-min", default_value_t = 0.0)]
    pub r_min: f64,
    #[arg(long = "r-max", default_value_t = 1.5)]
    pub r_max: f64,
    #[arg(long = "r-steps", default_value_t = 151)]
    pub r_steps: usize,
    #[arg(long = "t-min", default_value_t = 0.005)]
    pub t_min: f64,
    #[arg(long = "t-max", default_value_t = 0.98)]
    pub t_max: f64,
    #[arg(long = "t-steps", default_value_t = 196)]
    pub t_steps: usize,

    /// Residual tolerance at a root.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,

    /// Negativity deficit accepted for root-free columns; 0 disables them.
    #[arg(long = "near-max-tol", default_value_t = 1e-9)]
    pub near_max_tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Largest photon number for the beam-splitter check.
    #[arg(long = "l-max", default_value_t = 12)]
    pub l_max: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct CascadeArgs {
    #[arg(long = "r-sq")]
    pub r_sq: f64,

    #[arg(long = "t")]
    pub t: f64,

    #[command(flatten)]
    pub photon: PhotonArgs,

    /// Second-stage squeezing; defaults to the first stage's.
    #[arg(long = "r-sq2")]
    pub r_sq2: Option<f64>,

    /// Second-stage transmittance; defaults to the first stage's.
    #[arg(long = "t2")]
    pub t2: Option<f64>,

    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    pub p: i64,
}

fn outcome(p: i64) -> Result<usize> {
    usize::try_from(p).map_err(|_| Error::InvalidParameter(format!("p = {p} must be non-negative")))
}

impl CommonArgs {
    fn pipeline(&self) -> Result<PipelineConfig> {
        if !(self.tail_eps > 0.0 && self.tail_eps < 1.0) {
            return Err(Error::InvalidParameter(format!("tail_eps = {} must lie in (0, 1)", self.tail_eps)));
        }
        Ok(PipelineConfig { tail_eps: self.tail_eps, cutoff_override: self.cutoff, max_cutoff: DEFAULT_MAX_CUTOFF })
    }
}

#[derive(Serialize)]
struct RunConfig<'a> {
    #[serde(flatten)]
    cli: &'a Cli,
    pipeline: PipelineConfig,
}

/// Serialized second-stage outcome.
#[derive(Serialize)]
pub struct CascadeRecord {
    pub p: usize,
    pub probability: f64,
    pub negativity: f64,
    pub b_prime: f64,
    pub state: CVEntangledState,
}

#[derive(Serialize)]
pub struct BeamSplitterCheck {
    pub t_bs: f64,
    pub max_dev: f64,
    pub unitarity_error: f64,
    pub flagged: Vec<ValidationEntry>,
}

#[derive(Serialize)]
pub struct NormalizationCheck {
    pub r_sq: f64,
    pub t_bs: f64,
    pub a1_mag: f64,
    pub total_probability: f64,
    pub deficit: f64,
    pub flagged: bool,
}

/// Combined report of `verify`.
#[derive(Serialize)]
pub struct VerifyReport {
    pub beam_splitters: Vec<BeamSplitterCheck>,
    pub table2: Table2Report,
    pub normalization: Vec<NormalizationCheck>,
    pub errata: Vec<ErrataEntry>,
    /// Flags not covered by [`DOCUMENTED_ERRATA`].
    pub undocumented: Vec<String>,
    pub pass: bool,
}

/// Known misprints; `verify` passes when every flag is one of these.
pub const DOCUMENTED_ERRATA: [&str; 7] = ["eq17", "eq19", "eq20", "eq21", "eq25", "eq25_prose", "table2_row4"];

/// Largest tolerated probability deficit in the normalization sweep.
pub const NORMALIZATION_TOL: f64 = 1e-8;

pub fn verify_report(l_max: usize, config: &PipelineConfig) -> Result<VerifyReport> {
    let mut undocumented = Vec::new();
    let documented = |label: &str| DOCUMENTED_ERRATA.contains(&label);

    let beam_splitters = (0..10)
        .map(|i| {
            let t_bs = 0.05 + 0.1 * i as f64;
            let bs = BeamSplitter::from_transmittance(t_bs)?;
            let report = validate_printed_forms(bs, l_max);
            let oracle = crate::interferometer::bs_matrix_oracle(bs, l_max + 1 + crate::fock::ORACLE_BUFFER);
            Ok(BeamSplitterCheck {
                t_bs,
                max_dev: report.max_dev(),
                unitarity_error: oracle.interior_unitarity_error(),
                flagged: report.flagged().cloned().collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for check in &beam_splitters {
        for e in &check.flagged {
            undocumented.push(format!("beam splitter t = {}: {:?} at l = {}", check.t_bs, e.form, e.l));
        }
    }

    let table2 = verify_table2(config)?;
    for row in table2.flagged() {
        let label = format!("table2_row{}", row.row);
        if !documented(&label) || row.internal_dev > 1e-9 {
            undocumented.push(label);
        }
    }

    let mut normalization = Vec::new();
    for &r_sq in &[0.1, 0.7, 1.5] {
        for &t_bs in &[0.2, 0.5, 0.8] {
            for &a1_mag in &[0.3, 0.72] {
                let r = SqueezeParam::new(r_sq)?;
                let bs = BeamSplitter::from_transmittance(t_bs)?;
                let photon = DelocalizedPhoton::from_magnitude(a1_mag)?;
                let sim = HeraldSimulator::new(r, bs, photon, config)?;
                let dist = sim.distribution(sim.max_outcome())?;
                let flagged = !(dist.deficit.abs() <= NORMALIZATION_TOL);
                if flagged {
                    undocumented.push(format!("normalization r_sq = {r_sq}, t = {t_bs}, |a1| = {a1_mag}"));
                }
                normalization.push(NormalizationCheck {
                    r_sq,
                    t_bs,
                    a1_mag,
                    total_probability: dist.total_probability,
                    deficit: dist.deficit,
                    flagged,
                });
            }
        }
    }

    let mut errata = Vec::new();
    for &(r_sq, t_bs, a1_mag) in &[(0.5, 0.4, 0.7), (1.0, 0.6, 0.6)] {
        let r = SqueezeParam::new(r_sq)?;
        let bs = BeamSplitter::from_transmittance(t_bs)?;
        let photon = DelocalizedPhoton::from_magnitude(a1_mag)?;
        errata.extend(closed_form_errata(r, bs, &photon, 6, config)?);
    }
    let stage1 = Stage1Params {
        r_sq: SqueezeParam::new(0.4)?,
        bs: BeamSplitter::from_transmittance(0.5)?,
        photon: DelocalizedPhoton::balanced(),
    };
    errata.extend(cascade_errata(&stage1, stage1.r_sq, stage1.bs, 4, config)?);
    for e in &errata {
        if !documented(&e.equation) {
            undocumented.push(format!("{} at p = {}", e.equation, e.p));
        }
    }

    let pass = undocumented.is_empty();
    Ok(VerifyReport { beam_splitters, table2, normalization, errata, undocumented, pass })
}

/// What a command produced, plus whether it counts as a failed check.
pub struct Outcome {
    pub artifact: String,
    pub failed: bool,
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn require_json(format: Option<Format>) -> Result<()> {
    match format {
        Some(Format::Csv) => Err(Error::InvalidParameter("this command only emits json".into())),
        _ => Ok(()),
    }
}

/// Runs the parsed command and returns its artifact.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let config = cli.common.pipeline()?;
    let format = cli.common.format;
    let ok = |artifact| Ok(Outcome { artifact, failed: false });
    match &cli.command {
        Command::Herald(a) => {
            require_json(format)?;
            let r = SqueezeParam::new(a.r_sq)?;
            let bs = BeamSplitter::from_transmittance(a.t)?;
            let photon = a.photon.photon()?;
            let p = outcome(a.p)?;
            match a.p_max {
                Some(p_max) => ok(json(&herald_distribution(r, bs, photon, outcome(p_max)?, &config)?)?),
                None => ok(json(&HeraldSimulator::new(r, bs, photon, &config)?.record(p)?)?),
            }
        }
        Command::Scan(a) => {
            let grid = ScanGrid {
                r_sq: Axis::new(a.r_min, a.r_max, a.r_steps)?,
                t_bs: Axis::new(a.t_min, a.t_max, a.t_steps)?,
            };
            if a.r_min < 0.0 {
                return Err(Error::InvalidParameter(format!("r_min = {} must be non-negative", a.r_min)));
            }
            if !(a.t_min > 0.0 && a.t_max < 1.0) {
                return Err(Error::InvalidParameter("t range must lie strictly inside (0, 1)".into()));
            }
            let photon = a.photon.photon()?;
            let table = scan_grid(grid, photon.a1().norm(), outcome(a.p)?, &config)?;
            match format {
                Some(Format::Json) => ok(json(&table)?),
                _ => ok(table.to_csv()),
            }
        }
        Command::Solve(a) => {
            let photon = a.photon.photon()?;
            let opts = SolveOptions {
                r_steps: a.r_steps,
                t_steps: a.t_steps,
                tol: a.tol,
                near_max_tol: (a.near_max_tol > 0.0).then_some(a.near_max_tol),
                ..SolveOptions::default()
            };
            let points = solve_max_negativity(
                photon.a1().norm(),
                outcome(a.p)?,
                (a.r_min, a.r_max),
                (a.t_min, a.t_max),
                &opts,
                &config,
            )?;
            match format {
                Some(Format::Csv) => {
                    let mut s = String::from("r_sq,t_bs,a1_mag,p,negativity,probability,residual,kind\n");
                    for q in &points {
                        let kind = serde_json::to_value(q.kind)?;
                        s.push_str(&format!(
                            "{},{},{},{},{},{},{},{}\n",
                            q.r_sq,
                            q.t_bs,
                            q.a1_mag,
                            q.p,
                            q.negativity,
                            q.probability,
                            q.residual,
                            kind.as_str().unwrap_or_default()
                        ));
                    }
                    ok(s)
                }
                _ => ok(json(&points)?),
            }
        }
        Command::Verify(a) => {
            require_json(format)?;
            let report = verify_report(a.l_max, &config)?;
            Ok(Outcome { artifact: json(&report)?, failed: !report.pass })
        }
        Command::Cascade(a) => {
            require_json(format)?;
            let stage1 = Stage1Params {
                r_sq: SqueezeParam::new(a.r_sq)?,
                bs: BeamSplitter::from_transmittance(a.t)?,
                photon: a.photon.photon()?,
            };
            let r_sq2 = SqueezeParam::new(a.r_sq2.unwrap_or(a.r_sq))?;
            let bs2 = BeamSplitter::from_transmittance(a.t2.unwrap_or(a.t))?;
            let p = outcome(a.p)?;
            let sim = CascadeSimulator::new(&stage1.herald(&config)?, r_sq2, bs2, &config)?;
            let (state, probability) = sim.outcome(p)?;
            let negativity = schmidt_negativity(&state)?.value;
            let b_prime = b_prime(p, &stage1, r_sq2, bs2, &config)?;
            ok(json(&CascadeRecord { p, probability, negativity, b_prime, state })?)
        }
    }
}

fn write_to(path: Option<&PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(path) => std::fs::write(path, content)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

/// Runs `cli`, writes its artifacts and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = (|| -> Result<bool> {
        if let Some(path) = &cli.common.emit_config {
            let snapshot = RunConfig { cli, pipeline: cli.common.pipeline()? };
            write_to(Some(path), &json(&snapshot)?)?;
        }
        let outcome = execute(cli)?;
        write_to(cli.common.output.as_ref(), &outcome.artifact)?;
        Ok(outcome.failed)
    })();
    match result {
        Ok(false) => 0,
        Ok(true) => {
            eprintln!("error: verification flagged undocumented deviations");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}
