//! `ylab` — command-line front end for the laboratory.
//!
//! Subcommands mirror the library modules: `cf`, `rot`, `dyn`, `grid`,
//! `ext`, `analyze`, `run`. Exit codes: 0 = pass, 1 = a verdict failed,
//! 2 = error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::FromPrimitive;

use yoccoz_lab::analysis::{
    approximant_qs, bounded_at, default_k_grid, distortion_law_sweep, fit_tail,
    inclusion_report, parabolic_grid, sample_field, synthetic_tier, tail_area, Direction, Gauge,
};
use yoccoz_lab::basemap::PFast;
use yoccoz_lab::cellmap::{yoccoz_cell_map, DilatationMode};
use yoccoz_lab::cf::{
    cf_expand, check_qn_bounds, classify, generate_sequence, ClassId, ContinuedFraction,
    RatInterval, SequenceSpec,
};
use yoccoz_lab::dynamics::{
    partition_critical, tune_parameter, verify_almost_parabolic, verify_apriori,
};
use yoccoz_lab::grid::{grid_from_rotation, render_svg};
use yoccoz_lab::pipeline::{run_pipeline, validate_manifest, ExperimentManifest, CRITICAL_Q_CAP};
use yoccoz_lab::rotation::{partition_rotation, verify_rotation_bounds};
use yoccoz_lab::{Error, Result};

#[derive(Parser)]
#[command(name = "ylab", version, about = "Yoccoz-extension laboratory")]
struct Cli {
    /// RNG seed for all sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Working precision for the tuned critical map.
    #[arg(long, global = true, default_value_t = 256)]
    precision_bits: usize,
    /// Output format where applicable.
    #[arg(long, global = true, value_enum, default_value_t = Emit::Json)]
    emit: Emit,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Json,
    Csv,
    Svg,
}

/// Where the rotation number comes from (shared by most subcommands).
#[derive(Args, Clone)]
struct CfSource {
    /// Comma-separated partial quotients, e.g. "1,2,3".
    #[arg(long)]
    terms: Option<String>,
    /// File holding a JSON array of partial quotients.
    #[arg(long)]
    cf_file: Option<PathBuf>,
    /// Generator name: golden|silver|constant|stretched-exp|square-spikes|spike.
    #[arg(long)]
    spec: Option<String>,
    /// Generator parameter (constant c, stretched-exp eps, spike size).
    #[arg(long)]
    param: Option<f64>,
    /// Spike position for --spec spike.
    #[arg(long, default_value_t = 4)]
    at: usize,
    /// Number of generated terms.
    #[arg(long, default_value_t = 24)]
    n_terms: usize,
}

impl CfSource {
    fn resolve(&self) -> Result<ContinuedFraction> {
        if let Some(s) = &self.terms {
            let terms = parse_terms(s)?;
            return Ok(ContinuedFraction::from_terms(&terms));
        }
        if let Some(path) = &self.cf_file {
            let text = std::fs::read_to_string(path)?;
            let terms: Vec<u128> = serde_json::from_str(&text)?;
            return Ok(ContinuedFraction::from_terms(&terms));
        }
        let name = self
            .spec
            .as_deref()
            .ok_or_else(|| Error::ManifestInvalid("no rotation number specified".into()))?;
        let spec = match name {
            "golden" => SequenceSpec::Constant { c: 1 },
            "silver" => SequenceSpec::Constant { c: 2 },
            "constant" => SequenceSpec::Constant { c: self.param.unwrap_or(1.0) as u128 },
            "stretched-exp" => SequenceSpec::StretchedExp { eps: self.param.unwrap_or(0.0) },
            "square-spikes" => SequenceSpec::SquareSpikes,
            "spike" => SequenceSpec::Spike {
                at: self.at,
                size: self.param.unwrap_or(100.0) as u128,
            },
            other => return Err(Error::ManifestInvalid(format!("unknown spec '{other}'"))),
        };
        Ok(ContinuedFraction::from_terms(&generate_sequence(&spec, self.n_terms)?))
    }
}

fn parse_terms(s: &str) -> Result<Vec<u128>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u128>()
                .map_err(|e| Error::ManifestInvalid(format!("bad term '{t}': {e}")))
        })
        .collect()
}

#[derive(Subcommand)]
enum Cmd {
    /// Continued-fraction arithmetic and class statistics.
    Cf {
        #[command(subcommand)]
        cmd: CfCmd,
    },
    /// Rotation-side dynamical partitions.
    Rot {
        #[command(subcommand)]
        cmd: RotCmd,
    },
    /// The tuned critical circle map.
    Dyn {
        #[command(subcommand)]
        cmd: DynCmd,
    },
    /// Half-plane grids over the partitions.
    Grid {
        #[command(subcommand)]
        cmd: GridCmd,
    },
    /// Per-cell quasiconformal extensions.
    Ext {
        #[command(subcommand)]
        cmd: ExtCmd,
    },
    /// Dilatation-field analysis.
    Analyze {
        #[command(subcommand)]
        cmd: AnalyzeCmd,
    },
    /// Run a full pipeline from a manifest.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        /// Override the manifest seed.
        #[arg(long)]
        override_seed: Option<u64>,
        /// Override the manifest output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Only validate, do not run.
        #[arg(long, default_value_t = false)]
        validate_only: bool,
    },
}

#[derive(Subcommand)]
enum CfCmd {
    /// Expand a decimal in (0, 1) into partial quotients.
    Expand {
        #[arg(long)]
        value: String,
        #[arg(long, default_value_t = 20)]
        terms: usize,
    },
    /// Finite-data class statistic (bt|pz|pz-eps|a|sd|fd).
    Classify {
        #[arg(long)]
        class: String,
        #[arg(long, default_value_t = 0.3)]
        eps: f64,
        #[command(flatten)]
        source: CfSource,
    },
    /// Generate a named sequence and print terms + statistics.
    Generate {
        #[command(flatten)]
        source: CfSource,
    },
    /// The q_n vs a_n comparison bounds and the adapted sequence.
    Bounds {
        #[command(flatten)]
        source: CfSource,
    },
}

#[derive(Subcommand)]
enum RotCmd {
    /// Level-n rotation partition (CSV: index, point, length, kind).
    Partition {
        #[arg(long)]
        level: usize,
        #[command(flatten)]
        source: CfSource,
    },
    /// The two-length and a-priori-bounds checks across levels.
    Verify {
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[command(flatten)]
        source: CfSource,
    },
}

#[derive(Subcommand)]
enum DynCmd {
    /// Tune the map parameter to the first N quotients.
    Tune {
        #[arg(long)]
        depth: usize,
        #[command(flatten)]
        source: CfSource,
    },
    /// Level-n critical partition (CSV: index, point, length, kind).
    Partition {
        #[arg(long)]
        level: usize,
        #[arg(long)]
        depth: Option<usize>,
        #[command(flatten)]
        source: CfSource,
    },
    /// Verify a-priori bounds or the almost-parabolic law.
    Verify {
        #[arg(long)]
        check: String,
        #[arg(long, default_value_t = 6)]
        depth: usize,
        #[command(flatten)]
        source: CfSource,
    },
}

#[derive(Subcommand)]
enum GridCmd {
    /// Materialize the grid and dump cells as JSON.
    Build {
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// "rotation" or "parabolic".
        #[arg(long, default_value = "rotation")]
        side: String,
        #[command(flatten)]
        source: CfSource,
    },
    /// Per-level summary (counts, length and area extremes).
    Report {
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long, default_value = "rotation")]
        side: String,
        #[command(flatten)]
        source: CfSource,
    },
    /// Render the grid as SVG (to stdout).
    Render {
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long, default_value = "rotation")]
        side: String,
        #[command(flatten)]
        source: CfSource,
    },
}

#[derive(Subcommand)]
enum ExtCmd {
    /// Evaluate one representative cell map at a point.
    Eval {
        /// Cell id "level,stratum" in the synthetic tier.
        #[arg(long)]
        cell: String,
        /// Point "x,y" in source-cell coordinates.
        #[arg(long)]
        point: String,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[command(flatten)]
        source: CfSource,
    },
    /// Per-cell sup-dilatation sweep over subdivision sizes.
    Sweep {
        /// Comma-separated subdivision sizes, e.g. "10,100,1000".
        #[arg(long)]
        a_values: String,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 6.0)]
        c_hat: f64,
    },
    /// The approximant quasisymmetry witness.
    Qs {
        #[arg(long, default_value_t = 6)]
        depth: usize,
        #[command(flatten)]
        source: CfSource,
    },
}

#[derive(Subcommand)]
enum AnalyzeCmd {
    /// Tail-area estimate and gauge fit over the synthetic tier.
    Tail {
        /// fwd | inv
        #[arg(long, default_value = "fwd")]
        direction: String,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        #[arg(long, default_value_t = 20_000)]
        budget: usize,
        /// david | sd | fd
        #[arg(long, default_value = "david")]
        gauge: String,
        #[command(flatten)]
        source: CfSource,
    },
    /// Arithmetic-class inclusion statistics for the standard family.
    Inclusion {
        #[arg(long, default_value_t = 250)]
        n_terms: usize,
    },
}

fn parse_gauge(s: &str) -> Result<Gauge> {
    match s {
        "david" => Ok(Gauge::David),
        "sd" => Ok(Gauge::StrongDavid),
        "fd" => Ok(Gauge::FiniteDistortion),
        other => Err(Error::ManifestInvalid(format!("unknown gauge '{other}'"))),
    }
}

fn parse_class(s: &str, eps: f64) -> Result<ClassId> {
    match s {
        "bt" => Ok(ClassId::Bt),
        "pz" => Ok(ClassId::Pz),
        "pz-eps" => Ok(ClassId::PzEps(eps)),
        "a" => Ok(ClassId::A),
        "sd" => Ok(ClassId::Sd),
        "fd" => Ok(ClassId::Fd),
        other => Err(Error::ManifestInvalid(format!("unknown class '{other}'"))),
    }
}

fn pretty<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn grid_for(side: &str, cf: &ContinuedFraction, depth: usize) -> Result<yoccoz_lab::grid::Grid> {
    match side {
        "rotation" => grid_from_rotation(cf, depth, CRITICAL_Q_CAP),
        "parabolic" => parabolic_grid(cf, depth, CRITICAL_Q_CAP),
        other => Err(Error::ManifestInvalid(format!("unknown side '{other}'"))),
    }
}

/// Returns Ok(true) for exit 0, Ok(false) for exit 1 (verdict fail).
fn dispatch(cli: &Cli) -> Result<bool> {
    match &cli.cmd {
        Cmd::Cf { cmd } => cf_cmd(cli, cmd),
        Cmd::Rot { cmd } => rot_cmd(cli, cmd),
        Cmd::Dyn { cmd } => dyn_cmd(cli, cmd),
        Cmd::Grid { cmd } => grid_cmd(cli, cmd),
        Cmd::Ext { cmd } => ext_cmd(cli, cmd),
        Cmd::Analyze { cmd } => analyze_cmd(cli, cmd),
        Cmd::Run { manifest, override_seed, output_dir, validate_only } => {
            let mut m = ExperimentManifest::from_path(manifest)?;
            if let Some(s) = override_seed {
                m.seed = *s;
            }
            if let Some(d) = output_dir {
                m.output_dir = d.clone();
            }
            let diags = validate_manifest(&m);
            if *validate_only {
                println!("{}", pretty(&diags)?);
                return Ok(diags.is_empty());
            }
            let bundle = run_pipeline(&m)?;
            println!("{}", bundle.verdicts_json);
            Ok(bundle.pass)
        }
    }
}

fn cf_cmd(_cli: &Cli, cmd: &CfCmd) -> Result<bool> {
    match cmd {
        CfCmd::Expand { value, terms } => {
            let x = BigRational::from_f64(
                f64::from_str(value)
                    .map_err(|e| Error::ManifestInvalid(format!("bad value: {e}")))?,
            )
            .ok_or_else(|| Error::ManifestInvalid("value not finite".into()))?;
            let cf = cf_expand(&RatInterval::point(x), *terms)?;
            println!(
                "{}",
                pretty(&serde_json::json!({
                    "terms": cf.terms(),
                    "convergents": cf.convergents().iter().take(12)
                        .map(|(p, q)| format!("{p}/{q}")).collect::<Vec<_>>(),
                }))?
            );
            Ok(true)
        }
        CfCmd::Classify { class, eps, source } => {
            let cf = source.resolve()?;
            let id = parse_class(class, *eps)?;
            let stat = classify(&cf, id, None)?;
            println!("{}", pretty(&stat)?);
            Ok(true)
        }
        CfCmd::Generate { source } => {
            let cf = source.resolve()?;
            let stats = vec![
                classify(&cf, ClassId::Pz, None)?,
                classify(&cf, ClassId::A, None)?,
            ];
            println!(
                "{}",
                pretty(&serde_json::json!({ "terms": cf.terms(), "statistics": stats }))?
            );
            Ok(true)
        }
        CfCmd::Bounds { source } => {
            let cf = source.resolve()?;
            let rep = check_qn_bounds(&cf)?;
            println!("{}", pretty(&rep)?);
            Ok(rep
                .rows
                .iter()
                .all(|r| r.lower_tightness >= 1.0 && r.upper_tightness >= 1.0))
        }
    }
}

fn rot_cmd(cli: &Cli, cmd: &RotCmd) -> Result<bool> {
    match cmd {
        RotCmd::Partition { level, source } => {
            let cf = source.resolve()?;
            let part = partition_rotation(&cf, *level, CRITICAL_Q_CAP)?;
            if cli.emit == Emit::Csv {
                println!("index,point,length,kind");
                for i in 0..part.n_points() {
                    println!(
                        "{i},{:.17e},{:.17e},{:?}",
                        part.positions_f64()[i],
                        yoccoz_lab::cf::rat_to_f64(&part.interval_length(i).midpoint()),
                        part.kinds[i]
                    );
                }
            } else {
                println!(
                    "{}",
                    pretty(&serde_json::json!({
                        "level": level,
                        "points": part.positions_f64(),
                        "kinds": part.kinds,
                    }))?
                );
            }
            Ok(true)
        }
        RotCmd::Verify { depth, source } => {
            let cf = source.resolve()?;
            let rep = verify_rotation_bounds(&cf, *depth)?;
            println!("{}", pretty(&rep)?);
            Ok(rep.pass)
        }
    }
}

fn dyn_cmd(cli: &Cli, cmd: &DynCmd) -> Result<bool> {
    match cmd {
        DynCmd::Tune { depth, source } => {
            let cf = source.resolve()?;
            let (_, diag) = tune_parameter(&cf, *depth, cli.precision_bits)?;
            println!("{}", pretty(&serde_json::json!({
                "depth": diag.depth,
                "f64_iterations": diag.f64_iterations,
                "bigfloat_iterations": diag.bigfloat_iterations,
                "bracket_width": diag.bracket_width,
            }))?);
            Ok(true)
        }
        DynCmd::Partition { level, depth, source } => {
            let cf = source.resolve()?;
            let d = depth.unwrap_or(*level);
            let (map, _) = tune_parameter(&cf, d.max(*level), cli.precision_bits)?;
            let part = partition_critical(&map, &cf, *level, CRITICAL_Q_CAP)?;
            if cli.emit == Emit::Csv {
                println!("index,point,length,kind");
                for i in 0..part.n_points() {
                    println!(
                        "{i},{:.17e},{:.17e},{:?}",
                        part.points[i],
                        part.interval_length(i),
                        part.kinds[i]
                    );
                }
            } else {
                println!(
                    "{}",
                    pretty(&serde_json::json!({
                        "level": level,
                        "points": part.points,
                        "kinds": part.kinds,
                    }))?
                );
            }
            Ok(true)
        }
        DynCmd::Verify { check, depth, source } => {
            let cf = source.resolve()?;
            let (map, _) = tune_parameter(&cf, *depth, cli.precision_bits)?;
            match check.as_str() {
                "apriori" => {
                    let rep = verify_apriori(&map, &cf, *depth, CRITICAL_Q_CAP)?;
                    println!("{}", pretty(&rep)?);
                    Ok(rep.sigma_hat < 1.0 && rep.c_adj.is_finite())
                }
                "parabolic" => {
                    let rep = verify_almost_parabolic(&map, &cf, *depth, CRITICAL_Q_CAP)?;
                    println!("{}", pretty(&rep)?);
                    Ok(rep.r_min > 0.0 && rep.r_max.is_finite())
                }
                other => Err(Error::ManifestInvalid(format!("unknown check '{other}'"))),
            }
        }
    }
}

fn grid_cmd(_cli: &Cli, cmd: &GridCmd) -> Result<bool> {
    match cmd {
        GridCmd::Build { depth, side, source } => {
            let cf = source.resolve()?;
            let grid = grid_for(side, &cf, *depth)?;
            let mut cells = Vec::new();
            for n in 0..grid.n_levels() - 1 {
                for i in 0..grid.n_cells_at(n) {
                    let c = grid.cell(n, i)?;
                    cells.push(serde_json::json!({
                        "level": n,
                        "index": i,
                        "base": [c.t0, c.tk],
                        "kind": format!("{:?}", c.kind),
                        "area": c.area(),
                        "k": c.k(),
                    }));
                }
            }
            println!("{}", pretty(&cells)?);
            Ok(true)
        }
        GridCmd::Report { depth, side, source } => {
            let cf = source.resolve()?;
            let grid = grid_for(side, &cf, *depth)?;
            let mut rows = Vec::new();
            for n in 0..grid.n_levels() - 1 {
                let mut amin = f64::MAX;
                let mut amax = 0.0f64;
                let m = grid.n_cells_at(n);
                for i in 0..m {
                    let a = grid.cell(n, i)?.area();
                    if a > 0.0 {
                        amin = amin.min(a);
                    }
                    amax = amax.max(a);
                }
                rows.push(serde_json::json!({
                    "level": n, "cells": m, "min_area": amin, "max_area": amax,
                }));
            }
            println!("{}", pretty(&rows)?);
            Ok(true)
        }
        GridCmd::Render { depth, side, source } => {
            let cf = source.resolve()?;
            let grid = grid_for(side, &cf, *depth)?;
            println!("{}", render_svg(&grid, *depth, None)?);
            Ok(true)
        }
    }
}

fn ext_cmd(_cli: &Cli, cmd: &ExtCmd) -> Result<bool> {
    match cmd {
        ExtCmd::Eval { cell, point, depth, source } => {
            let cf = source.resolve()?;
            let tier = synthetic_tier(&cf, *depth)?;
            let parse_pair = |s: &str| -> Result<(f64, f64)> {
                let parts: Vec<&str> = s.split(',').collect();
                if parts.len() != 2 {
                    return Err(Error::ManifestInvalid(format!("expected 'a,b', got '{s}'")));
                }
                Ok((
                    f64::from_str(parts[0].trim())
                        .map_err(|e| Error::ManifestInvalid(e.to_string()))?,
                    f64::from_str(parts[1].trim())
                        .map_err(|e| Error::ManifestInvalid(e.to_string()))?,
                ))
            };
            let (lvl_f, strat_f) = parse_pair(cell)?;
            let (level, stratum) = (lvl_f as usize, strat_f as usize);
            let lv = tier
                .levels
                .get(level)
                .ok_or_else(|| Error::ManifestInvalid(format!("no level {level}")))?;
            let st = lv
                .strata
                .get(stratum)
                .ok_or_else(|| Error::ManifestInvalid(format!("no stratum {stratum}")))?;
            let base = PFast::new();
            let map = yoccoz_cell_map(&st.source, &st.target, &base)?;
            let (x, y) = parse_pair(point)?;
            let z = Complex64::new(x, y);
            let w = map.apply(z)?;
            let k = map.dilatation_at(z, DilatationMode::Analytic)?;
            println!(
                "{}",
                pretty(&serde_json::json!({
                    "cell": { "level": level, "stratum": stratum,
                              "class": st.class, "k": st.source.k() },
                    "z": [z.re, z.im],
                    "image": [w.re, w.im],
                    "dilatation": k,
                    "stage_k": map.mobius_stage_dilatation(),
                }))?
            );
            Ok(true)
        }
        ExtCmd::Sweep { a_values, samples, c_hat } => {
            let a_vals: Vec<usize> = a_values
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|e| Error::ManifestInvalid(format!("bad size '{t}': {e}")))
                })
                .collect::<Result<_>>()?;
            let rows = distortion_law_sweep(&a_vals, *samples, *c_hat, 0)?;
            println!("{}", pretty(&rows)?);
            Ok(true)
        }
        ExtCmd::Qs { depth, source } => {
            let cf = source.resolve()?;
            let rep = approximant_qs(&cf, *depth)?;
            println!("{}", pretty(&rep)?);
            Ok(true)
        }
    }
}

fn analyze_cmd(cli: &Cli, cmd: &AnalyzeCmd) -> Result<bool> {
    match cmd {
        AnalyzeCmd::Tail { direction, depth, budget, gauge, source } => {
            let cf = source.resolve()?;
            let dir = match direction.as_str() {
                "fwd" => Direction::Forward,
                "inv" => Direction::Inverse,
                other => {
                    return Err(Error::ManifestInvalid(format!("unknown direction '{other}'")))
                }
            };
            let g = parse_gauge(gauge)?;
            let tier = synthetic_tier(&cf, *depth)?;
            let base = PFast::new();
            let fs = sample_field(&tier, &base, dir, *budget, cli.seed)?;
            if cli.emit == Emit::Csv {
                println!("level,x,y,k,weight");
                for s in &fs.samples {
                    println!(
                        "{},{:.17e},{:.17e},{:.17e},{:.17e}",
                        s.level, s.x, s.y, s.k_dil, s.weight
                    );
                }
                return Ok(true);
            }
            let kg = default_k_grid(&fs, 40);
            let est = tail_area(&fs, &kg)?;
            let sqrt_v = |x: f64| x.sqrt();
            let v: Option<&dyn Fn(f64) -> f64> =
                if g == Gauge::FiniteDistortion { Some(&sqrt_v) } else { None };
            let fit = fit_tail(&est, g, v).ok();
            let bounded = bounded_at(&est);
            let pass = bounded.is_some()
                || fit.as_ref().map(|f| f.passes()).unwrap_or(false);
            println!(
                "{}",
                pretty(&serde_json::json!({
                    "direction": direction,
                    "estimate": est,
                    "fit": fit,
                    "bounded_at": bounded,
                    "pass": pass,
                }))?
            );
            Ok(pass)
        }
        AnalyzeCmd::Inclusion { n_terms } => {
            let rows = inclusion_report(*n_terms)?;
            println!("{}", pretty(&rows)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
