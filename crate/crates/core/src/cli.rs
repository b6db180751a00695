//! Command-line front end.
//!
//! Exit codes: 0 when a computation completes (including violated
//! exploratory checks), 2 when a theorem-backed check is violated, 1 on
//! usage or input errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::correct::{improved_confidence, improved_critical_value, render_table, CorrectionResult};
use crate::csvio::{read_covariance, read_hpolytope, read_polygon, read_thresholds};
use crate::error::Error;
use crate::geom::{HPolytope, Polygon2D, SymmetricBand};
use crate::lab::{self, BodyEstimator, InequalityReport, Verdict};
use crate::measure::{gauss_measure_band, gauss_measure_mc, gauss_measure_polygon};
use crate::model::{CorrelationModel, ThresholdVector};
use crate::mvn::QmcConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_THEOREM_VIOLATED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "gcilab", version, about = "Numerical checks of Gaussian correlation inequalities")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Covariance matrix CSV.
    #[arg(long, global = true)]
    cov: Option<PathBuf>,
    /// Threshold CSV (entries may be `inf`).
    #[arg(long, global = true)]
    bounds: Option<PathBuf>,
    /// Evaluations per estimate (QMC) or samples (Monte Carlo).
    #[arg(long, global = true, default_value_t = 65_536)]
    budget: usize,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// QMC randomizations.
    #[arg(long, global = true, default_value_t = QmcConfig::DEFAULT_REPLICATES)]
    replicates: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Estimator {
    Quadrature,
    Mc,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CheckName {
    Sidak,
    Refined,
    Royen,
    StrongBands,
    #[value(name = "strong-2d")]
    Strong2d,
    Slab,
    Unconditional,
    Tehranchi,
    Lattice,
    RogersShephard,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    HullRectangles,
    RotatedBoxes,
    BandTriples,
}

#[derive(Debug, Args)]
struct Bodies {
    /// Second threshold CSV.
    #[arg(long)]
    bounds2: Option<PathBuf>,
    /// Polygon vertex CSV.
    #[arg(long)]
    polygon: Option<PathBuf>,
    /// Second polygon vertex CSV
    #[arg(long)]
    polygon2: Option<PathBuf>,
    /// Halfspace CSV (`normal..., offset` per row).
    #[arg(long)]
    hpoly: Option<PathBuf>,
    /// Second halfspace CSV
    #[arg(long)]
    hpoly2: Option<PathBuf>,
    /// Measure estimator for geometric bodies.
    #[arg(long, value_enum)]
    estimator: Option<Estimator>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Gaussian measure of a band (--cov, --bounds), polygon or H-polytope.
    Measure {
        #[command(flatten)]
        bodies: Bodies,
    },
    /// Run one inequality checker.
    Check {
        #[arg(value_enum)]
        name: CheckName,
        #[command(flatten)]
        bodies: Bodies,
        /// Widening of the refined checker (`inf` allowed).
        #[arg(long)]
        a: Option<f64>,
        /// Coordinate widened by the refined checker.
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Size of the first block for the Royen checker.
        #[arg(long)]
        split: Option<usize>,
        /// Tehranchi parameter s, with 0 <= s and sqrt(s) <= t
        #[arg(long)]
        s: Option<f64>,
        /// Tehranchi parameter t, below 1
        #[arg(long)]
        t: Option<f64>,
        /// Slab normal, comma-separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        direction: Option<Vec<f64>>,
        /// Slab half-width.
        #[arg(long)]
        width: Option<f64>,
        /// Sampled pairs for the lattice check.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Reproduce a counterexample.
    Counterexample {
        #[command(subcommand)]
        which: Counterexample,
    },
    /// Search a parameterized family for negative margins.
    Search {
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Margin evaluations.
        #[arg(long, default_value_t = 120)]
        steps: usize,
    },
    /// Compare a product model's ratio with the base ratio to the N-th power.
    Tensorize {
        #[arg(long = "N")]
        copies: usize,
        /// Second threshold CSV (defaults to --bounds).
        #[arg(long)]
        bounds2: Option<PathBuf>,
    },
    /// Šidák critical value and its refinement.
    Correct {
        #[arg(long)]
        alpha: f64,
        /// Also invert the refinement into a smaller critical value.
        #[arg(long)]
        critical_value: bool,
    },
}

#[derive(Debug, Subcommand)]
enum Counterexample {
    /// Thin rectangle and its transpose under the hull inequality.
    Hull {
        #[arg(long = "N")]
        n: f64,
        #[arg(long, value_enum, default_value = "mc")]
        estimator: Estimator,
    },
}

type Outcome<T> = std::result::Result<T, Failure>;

/// A failure tagged with its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = if matches!(err, Error::PremiseViolated(_)) { EXIT_THEOREM_VIOLATED } else { EXIT_USAGE };
        Failure { code, message: err.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

fn need<'a>(path: &'a Option<PathBuf>, flag: &str) -> Outcome<&'a Path> {
    path.as_deref().ok_or_else(|| usage(format!("missing --{flag}")))
}

fn need_value<T: Copy>(v: Option<T>, flag: &str) -> Outcome<T> {
    v.ok_or_else(|| usage(format!("missing --{flag}")))
}

struct Context<'a> {
    global: &'a Global,
}

impl Context<'_> {
    fn cfg(&self) -> QmcConfig {
        QmcConfig::new(self.global.budget, self.global.seed).with_replicates(self.global.replicates)
    }

    fn model(&self) -> Outcome<CorrelationModel> {
        Ok(read_covariance(need(&self.global.cov, "cov")?)?)
    }

    fn bounds(&self) -> Outcome<ThresholdVector> {
        Ok(read_thresholds(need(&self.global.bounds, "bounds")?)?)
    }

    fn estimator(&self, chosen: Option<Estimator>, default: Estimator) -> BodyEstimator {
        match chosen.unwrap_or(default) {
            Estimator::Quadrature => BodyEstimator::Quadrature,
            Estimator::Mc => BodyEstimator::MonteCarlo { budget: self.global.budget, seed: self.global.seed },
        }
    }
}

/// What a subcommand produced.
enum Output {
    Report(Box<InequalityReport>),
    Value { json: serde_json::Value, text: String },
}

impl Output {
    fn value<T: Serialize>(v: &T, text: String) -> Outcome<Self> {
        Ok(Output::Value { json: serde_json::to_value(v).map_err(|e| usage(e.to_string()))?, text })
    }
}

fn report_text(r: &InequalityReport) -> String {
    let verdict = match r.verdict {
        Verdict::Supported => "supported",
        Verdict::Violated => "VIOLATED",
        Verdict::Inconclusive => "inconclusive",
    };
    let backing = match r.backing {
        lab::Backing::Theorem => "theorem",
        lab::Backing::Exploratory => "exploratory",
    };
    let mut out = format!(
        "{} ({backing}): {verdict}\n  lhs    = {:.10} ± {:.2e}\n  rhs    = {:.10} ± {:.2e}\n  margin = {:.3e} ± {:.2e}\n",
        r.label, r.lhs.value, r.lhs.stderr, r.rhs.value, r.rhs.stderr, r.margin, r.stderr
    );
    for t in &r.terms {
        out.push_str(&format!("    {:<16} {:.10} ± {:.2e}\n", t.name, t.estimate.value, t.estimate.stderr));
    }
    out
}

fn measure(ctx: &Context, bodies: &Bodies) -> Outcome<Output> {
    let g = ctx.global;
    let (body, estimate) = if let Some(p) = &bodies.polygon {
        let poly = read_polygon(p)?;
        let est = match ctx.estimator(bodies.estimator, Estimator::Quadrature) {
            BodyEstimator::Quadrature => gauss_measure_polygon(&poly)?,
            BodyEstimator::MonteCarlo { budget, seed } => gauss_measure_mc(&poly, budget, seed)?,
        };
        (json!({ "polygon": poly }), est)
    } else if let Some(h) = &bodies.hpoly {
        let poly = read_hpolytope(h)?;
        let est = match ctx.estimator(bodies.estimator, Estimator::Mc) {
            BodyEstimator::Quadrature => gauss_measure_polygon(&poly.to_polygon()?)?,
            BodyEstimator::MonteCarlo { budget, seed } => gauss_measure_mc(&poly, budget, seed)?,
        };
        (json!({ "hpolytope": poly }), est)
    } else if g.cov.is_some() {
        let band = SymmetricBand::new(ctx.model()?, ctx.bounds()?)?;
        let est = gauss_measure_band(&band, &ctx.cfg())?;
        (json!({ "sigma": band.model().sigma_rows(), "c": band.thresholds() }), est)
    } else {
        return Err(usage("measure needs --cov with --bounds, --polygon or --hpoly"));
    };
    let text = format!("gamma = {:.10} ± {:.2e} ({:?})\n", estimate.value, estimate.stderr, estimate.method);
    Output::value(&json!({ "body": body, "estimate": estimate }), text)
}

#[allow(clippy::too_many_arguments)]
fn check(
    ctx: &Context,
    name: CheckName,
    bodies: &Bodies,
    a: Option<f64>,
    index: usize,
    split: Option<usize>,
    s: Option<f64>,
    t: Option<f64>,
    direction: &Option<Vec<f64>>,
    width: Option<f64>,
    samples: usize,
) -> Outcome<Output> {
    let cfg = ctx.cfg();
    let polygons = || -> Outcome<(Polygon2D, Polygon2D)> {
        Ok((read_polygon(need(&bodies.polygon, "polygon")?)?, read_polygon(need(&bodies.polygon2, "polygon2")?)?))
    };
    let hpolys = || -> Outcome<(HPolytope, HPolytope)> {
        Ok((read_hpolytope(need(&bodies.hpoly, "hpoly")?)?, read_hpolytope(need(&bodies.hpoly2, "hpoly2")?)?))
    };
    let second = || -> Outcome<ThresholdVector> { Ok(read_thresholds(need(&bodies.bounds2, "bounds2")?)?) };
    let report = match name {
        CheckName::Sidak => lab::check_sidak(&ctx.model()?, &ctx.bounds()?, &cfg)?,
        CheckName::Refined => {
            lab::check_refined_sidak(&ctx.model()?, &ctx.bounds()?, need_value(a, "a")?, index, &cfg)?
        }
        CheckName::Royen => lab::check_royen(&ctx.model()?, &ctx.bounds()?, need_value(split, "split")?, &cfg)?,
        CheckName::StrongBands => lab::check_strong_gci_bands(&ctx.model()?, &ctx.bounds()?, &second()?, &cfg)?,
        CheckName::Strong2d => {
            let (p, q) = polygons()?;
            lab::check_strong_gci_2d(&p, &q, ctx.estimator(bodies.estimator, Estimator::Quadrature))?
        }
        CheckName::Slab => {
            let u = direction.as_deref().ok_or_else(|| usage("missing --direction"))?;
            let w = need_value(width, "width")?;
            if let Some(p) = &bodies.polygon {
                let [x, y] = u else {
                    return Err(usage("--direction needs 2 components for a polygon"));
                };
                let est = ctx.estimator(bodies.estimator, Estimator::Quadrature);
                lab::check_slab_polygon(&read_polygon(p)?, [*x, *y], w, est)?
            } else {
                let band = SymmetricBand::new(ctx.model()?, ctx.bounds()?)?;
                lab::check_slab_band(&band, u, w, &cfg)?
            }
        }
        CheckName::Unconditional => {
            let (k, t) = hpolys()?;
            lab::check_unconditional(&k, &t, ctx.estimator(bodies.estimator, Estimator::Quadrature))?
        }
        CheckName::Tehranchi => lab::check_tehranchi(
            &ctx.model()?,
            &ctx.bounds()?,
            &second()?,
            need_value(s, "s")?,
            need_value(t, "t")?,
            &cfg,
        )?,
        CheckName::Lattice => {
            let (k, t) = hpolys()?;
            let r = lab::check_lattice_premise(&k, &t, samples, ctx.global.seed)?;
            let text = format!("{}: {} pairs, meet ok {}, join ok {}\n", r.label, r.pairs, r.meet_ok, r.join_ok);
            return Output::value(&r, text);
        }
        CheckName::RogersShephard => {
            let (p, q) = polygons()?;
            lab::check_rogers_shephard(&p, &q)?
        }
    };
    Ok(Output::Report(Box::new(report)))
}

fn correct(ctx: &Context, alpha: f64, critical_value: bool) -> Outcome<Output> {
    #[derive(Serialize)]
    struct CorrectOutput {
        #[serde(flatten)]
        result: CorrectionResult,
        #[serde(skip_serializing_if = "Option::is_none")]
        improved_critical_value: Option<f64>,
    }
    let model = ctx.model()?;
    let cfg = ctx.cfg();
    let result = improved_confidence(&model, alpha, &cfg)?;
    let improved = if critical_value { Some(improved_critical_value(&model, alpha, &cfg)?) } else { None };
    let mut text = render_table(&result);
    if let Some(c) = improved {
        text.push_str(&format!("improved critical value = {c:.4}\n"));
    }
    Output::value(&CorrectOutput { result, improved_critical_value: improved }, text)
}

fn dispatch(cli: &Cli) -> Outcome<Output> {
    let ctx = Context { global: &cli.global };
    match &cli.command {
        Command::Measure { bodies } => measure(&ctx, bodies),
        Command::Check { name, bodies, a, index, split, s, t, direction, width, samples } => {
            check(&ctx, *name, bodies, *a, *index, *split, *s, *t, direction, *width, *samples)
        }
        Command::Counterexample { which: Counterexample::Hull { n, estimator } } => {
            let h = lab::hull_counterexample(*n, ctx.estimator(Some(*estimator), Estimator::Mc))?;
            let r = &h.reduction;
            let text = format!(
                "{}reduction: gamma_1([-N, N]) = {:.7}, gamma_1([-w, w]) = {:.7} (w = {:.7}), difference = {:.5}\n\
                 hull inside the (N + 1/N) diamond: {}\n",
                report_text(&h.report),
                r.gamma_n,
                r.gamma_half_width,
                r.half_width,
                r.difference,
                h.diamond_inclusion
            );
            Output::value(&h, text)
        }
        Command::Search { family, steps } => {
            let family = match family {
                FamilyArg::HullRectangles => lab::Family::HullRectangles,
                FamilyArg::RotatedBoxes => lab::Family::RotatedBoxes,
                FamilyArg::BandTriples => lab::Family::BandTriples,
            };
            let r = lab::search_counterexample(family, *steps, cli.global.budget, cli.global.seed)?;
            let text = format!(
                "best margin {:.3e} ± {:.2e} at {:?} after {} evaluations\nconfirmation:\n{}",
                r.best_margin,
                r.best_stderr,
                r.best_params,
                r.evaluations,
                report_text(&r.report)
            );
            Output::value(&r, text)
        }
        Command::Tensorize { copies, bounds2 } => {
            let s = ctx.bounds()?;
            let t = match bounds2 {
                Some(p) => read_thresholds(p)?,
                None => s.clone(),
            };
            let r = lab::tensorize_check(&ctx.model()?, &s, &t, *copies, &ctx.cfg())?;
            let text = format!(
                "N = {}: product ratio {:.10} ± {:.2e}, base ratio^N {:.10} ± {:.2e}, agrees: {}\n",
                r.copies,
                r.product_ratio.value,
                r.product_ratio.stderr,
                r.base_power.value,
                r.base_power.stderr,
                r.agrees
            );
            Output::value(&r, text)
        }
        Command::Correct { alpha, critical_value } => correct(&ctx, *alpha, *critical_value),
    }
}

/// Runs the command line `args` (program name first), writing results to
/// `out` and diagnostics to standard error. Returns the exit code.
pub fn run<I, T, W>(args: I, out: &mut W) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    W: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            eprint!("{e}");
            return EXIT_USAGE;
        }
    };
    let output = match dispatch(&cli) {
        Ok(o) => o,
        Err(f) => {
            eprintln!("error: {}", f.message);
            return f.code;
        }
    };
    let (json, text, code) = match output {
        Output::Report(r) => {
            let code = if r.is_theorem_violation() { EXIT_THEOREM_VIOLATED } else { EXIT_OK };
            (serde_json::to_value(&*r).unwrap_or_default(), report_text(&r), code)
        }
        Output::Value { json, text } => (json, text, EXIT_OK),
    };
    let written = if cli.global.json {
        serde_json::to_string_pretty(&json).map_err(std::io::Error::other).and_then(|s| writeln!(out, "{s}"))
    } else {
        write!(out, "{text}")
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    code
}
