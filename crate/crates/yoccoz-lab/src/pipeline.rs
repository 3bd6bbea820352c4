//! Experiment manifests and reproducible end-to-end runs: tune → partition
//! → grid → extend → analyze → report.
//!
//! A manifest is a small declarative JSON document; `run_pipeline` turns it
//! into a bundle of artifacts (JSON verdicts, sample CSVs, an SVG of the
//! grid, a calibration snapshot), every one of which embeds the manifest
//! hash. Runs are deterministic given (manifest, seed): rerunning the same
//! manifest produces byte-identical JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    bounded_at, default_k_grid, fit_tail, level_k_growth, parabolic_grid, sample_field,
    sample_field_grids,
    synthetic_tier, tail_area, theorem_main_harness, Direction, FieldSamples, Gauge,
    HarnessReport, TailEstimate, TailFit,
};
use crate::basemap::PFast;
use crate::cf::{classify, generate_sequence, ClassId, ClassStatistic, ContinuedFraction,
                SequenceSpec};
use crate::dynamics::{partition_critical, tune_parameter};
use crate::error::{Error, Result};
use crate::grid::{build_grid, grid_from_rotation, render_svg, GridPair};

/// Safety caps: the pipeline refuses manifests beyond these.
pub const MAX_DEPTH: usize = 64;
pub const MAX_BUDGET: usize = 100_000_000;
/// Largest q_N for which the critical tier materializes partitions.
pub const CRITICAL_Q_CAP: u128 = 100_000;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentManifest {
    pub name: String,
    /// Explicit partial quotients; takes precedence over `generator`.
    #[serde(default)]
    pub terms: Option<Vec<u128>>,
    /// Named generator: "golden", "silver", "constant", "stretched-exp",
    /// "square-spikes", "spike".
    #[serde(default)]
    pub generator: Option<String>,
    /// Generator parameter (constant c, stretched-exp eps, spike size).
    #[serde(default)]
    pub generator_param: Option<f64>,
    /// Spike position for the "spike" generator.
    #[serde(default)]
    pub spike_at: Option<usize>,
    /// Number of generated terms (raised to depth + 2 if smaller).
    #[serde(default = "default_n_terms")]
    pub n_terms: usize,
    /// "synthetic-rotation" or "critical".
    pub tier: String,
    pub depth: usize,
    pub budget: usize,
    #[serde(default = "default_precision")]
    pub precision_bits: usize,
    #[serde(default)]
    pub seed: u64,
    /// "david", "sd" or "fd".
    #[serde(default = "default_gauge")]
    pub gauge: String,
    pub output_dir: PathBuf,
}

fn default_n_terms() -> usize {
    24
}
fn default_precision() -> usize {
    256
}
fn default_gauge() -> String {
    "david".into()
}

impl ExperimentManifest {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let m: ExperimentManifest = serde_json::from_str(&text)
            .map_err(|e| Error::ManifestInvalid(format!("{}: {e}", path.display())))?;
        Ok(m)
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("manifest serializes");
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        let digest = h.finalize();
        let mut out = String::with_capacity(64);
        for b in digest {
            write!(out, "{b:02x}").unwrap();
        }
        out
    }

    pub fn resolve_cf(&self) -> Result<ContinuedFraction> {
        let n = self.n_terms.max(self.depth + 2);
        if let Some(terms) = &self.terms {
            if terms.is_empty() {
                return Err(Error::ManifestInvalid("empty term list".into()));
            }
            return Ok(ContinuedFraction::from_terms(terms));
        }
        let gen = self
            .generator
            .as_deref()
            .ok_or_else(|| Error::ManifestInvalid("no rotation number specified".into()))?;
        let spec = match gen {
            "golden" => SequenceSpec::Constant { c: 1 },
            "silver" => SequenceSpec::Constant { c: 2 },
            "constant" => SequenceSpec::Constant {
                c: self.generator_param.unwrap_or(1.0) as u128,
            },
            "stretched-exp" => SequenceSpec::StretchedExp {
                eps: self.generator_param.unwrap_or(0.0),
            },
            "square-spikes" => SequenceSpec::SquareSpikes,
            "spike" => SequenceSpec::Spike {
                at: self.spike_at.unwrap_or(4),
                size: self.generator_param.unwrap_or(100.0) as u128,
            },
            other => {
                return Err(Error::ManifestInvalid(format!("unknown generator '{other}'")))
            }
        };
        Ok(ContinuedFraction::from_terms(&generate_sequence(&spec, n)?))
    }

    pub fn parse_gauge(&self) -> Result<Gauge> {
        match self.gauge.as_str() {
            "david" => Ok(Gauge::David),
            "sd" => Ok(Gauge::StrongDavid),
            "fd" => Ok(Gauge::FiniteDistortion),
            other => Err(Error::ManifestInvalid(format!("unknown gauge '{other}'"))),
        }
    }
}

/// All cap and path checks, as diagnostics; no side effects.
pub fn validate_manifest(m: &ExperimentManifest) -> Vec<String> {
    let mut out = Vec::new();
    if m.terms.is_none() && m.generator.is_none() {
        out.push("no rotation number specified".into());
    }
    if let Some(terms) = &m.terms {
        if terms.is_empty() {
            out.push("term list is empty".into());
        } else if terms.iter().any(|&a| a == 0) {
            out.push("partial quotients must be >= 1".into());
        }
    }
    match m.tier.as_str() {
        "synthetic-rotation" | "critical" => {}
        other => out.push(format!("unknown tier '{other}'")),
    }
    if m.depth > MAX_DEPTH {
        out.push(format!("depth {} exceeds cap {MAX_DEPTH}", m.depth));
    }
    if m.budget > MAX_BUDGET {
        out.push(format!("budget {} exceeds cap {MAX_BUDGET}", m.budget));
    }
    if m.parse_gauge().is_err() {
        out.push(format!("unknown gauge '{}'", m.gauge));
    }
    if m.precision_bits < 64 || m.precision_bits > 4096 {
        out.push(format!(
            "precision {} bits outside [64, 4096]",
            m.precision_bits
        ));
    }
    if m.output_dir.as_os_str().is_empty() {
        out.push("output directory not set".into());
    }
    if m.tier == "critical" && m.terms.is_none() && m.generator.is_none() {
        // Already diagnosed above.
    } else if m.tier == "critical" {
        if let Ok(cf) = m.resolve_cf() {
            let deepest = cf.deepest_level_with_q_below(CRITICAL_Q_CAP);
            if m.depth > deepest {
                out.push(format!(
                    "q_{{{}}} exceeds the critical-tier cap {CRITICAL_Q_CAP}; \
                     deepest materializable level is {deepest} — consider tier \
                     \"synthetic-rotation\"",
                    m.depth + 1
                ));
            }
        }
    }
    out
}

/// Provenance header embedded in every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct ArtifactHeader {
    pub manifest_hash: String,
    pub calibration_id: String,
    pub versions: Vec<(String, String)>,
}

fn versions() -> Vec<(String, String)> {
    vec![("yoccoz-lab".into(), env!("CARGO_PKG_VERSION").into())]
}

/// Summary of a critical-tier (materialized grids) run.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalSummary {
    pub depth: usize,
    pub deepest_points: usize,
    pub tune_bracket_width: f64,
    pub fwd_fit: Option<TailFit>,
    pub fwd_bounded_at: Option<f64>,
    pub fwd_estimate: TailEstimate,
    pub inv_estimate: TailEstimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictsDoc {
    pub header: ArtifactHeader,
    pub manifest: ExperimentManifest,
    /// True for depth 0: the extension is the identity, all K = 1.
    pub identity: bool,
    pub arithmetic: Vec<ClassStatistic>,
    pub synthetic: Option<HarnessReport>,
    pub critical: Option<CriticalSummary>,
    /// Fit under the manifest's gauge (forward direction).
    pub gauge_fit: Option<TailFit>,
    pub verdict: String,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct RunBundle {
    pub dir: PathBuf,
    pub manifest_hash: String,
    pub verdicts_json: String,
    pub files: Vec<PathBuf>,
    pub pass: bool,
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::StageFailure {
        stage: name.to_string(),
        source: Box::new(e),
    })
}

fn samples_csv(header: &ArtifactHeader, fs: &FieldSamples) -> String {
    let mut out = String::new();
    writeln!(out, "# manifest {}", header.manifest_hash).unwrap();
    writeln!(out, "# calibration {}", header.calibration_id).unwrap();
    writeln!(out, "level,x,y,k,weight").unwrap();
    for s in &fs.samples {
        writeln!(out, "{},{:.17e},{:.17e},{:.17e},{:.17e}", s.level, s.x, s.y, s.k_dil, s.weight)
            .unwrap();
    }
    out
}

fn fd_v(x: f64) -> f64 {
    x.sqrt()
}

/// Run the full pipeline for one manifest. Deterministic given
/// (manifest, seed); artifacts land in `manifest.output_dir`.
pub fn run_pipeline(m: &ExperimentManifest) -> Result<RunBundle> {
    let diags = validate_manifest(m);
    if !diags.is_empty() {
        return Err(Error::ManifestInvalid(diags.join("; ")));
    }
    let hash = m.hash();
    fs::create_dir_all(&m.output_dir)?;
    let mut files = Vec::new();

    // Stage: arithmetic.
    let cf = stage("arithmetic", m.resolve_cf())?;
    let arithmetic = stage(
        "arithmetic",
        (|| {
            Ok(vec![
                classify(&cf, ClassId::Bt, None)?,
                classify(&cf, ClassId::Pz, None)?,
                classify(&cf, ClassId::A, None)?,
            ])
        })(),
    )?;
    let arithmetic_json = serde_json::to_string_pretty(&serde_json::json!({
        "manifest_hash": hash,
        "terms": cf.terms(),
        "statistics": arithmetic,
    }))?;
    let p = m.output_dir.join("stage_arithmetic.json");
    fs::write(&p, &arithmetic_json)?;
    files.push(p);

    let gauge = m.parse_gauge()?;
    let base = PFast::new();

    let mut synthetic: Option<HarnessReport> = None;
    let mut critical: Option<CriticalSummary> = None;
    let mut gauge_fit: Option<TailFit> = None;
    let mut fwd_csv = None;
    let mut inv_csv = None;
    let identity = m.depth == 0;
    let (verdict, pass, calibration_json);

    if identity {
        // Depth 0: nothing is subdivided, the extension is the identity.
        verdict = "identity".to_string();
        pass = true;
        calibration_json = serde_json::to_string_pretty(&serde_json::json!({
            "manifest_hash": hash,
            "identity": true,
            "k_sup": 1.0,
        }))?;
    } else if m.tier == "synthetic-rotation" {
        let rep = stage("analyze", theorem_main_harness(&cf, m.depth, m.budget, m.seed))?;
        // CSVs from a fresh deterministic resample (same seeds as the
        // harness uses internally).
        let tier = stage("tier", synthetic_tier(&cf, m.depth))?;
        let fwd = stage(
            "analyze",
            sample_field(&tier, &base, Direction::Forward, m.budget, m.seed),
        )?;
        let inv = stage(
            "analyze",
            sample_field(&tier, &base, Direction::Inverse, m.budget, m.seed.wrapping_add(1)),
        )?;
        let v: Option<&dyn Fn(f64) -> f64> = if gauge == Gauge::FiniteDistortion {
            Some(&fd_v)
        } else {
            None
        };
        gauge_fit = fit_tail(&rep.fwd_estimate, gauge, v).ok();
        verdict = rep.fwd_verdict.clone();
        pass = rep.consistent;
        calibration_json = serde_json::to_string_pretty(&serde_json::json!({
            "manifest_hash": hash,
            "calibration": rep.calibration,
        }))?;
        fwd_csv = Some(fwd);
        inv_csv = Some(inv);
        synthetic = Some(rep);
    } else {
        // Critical tier: tune the map, materialize both grids, sample.
        let depth = m.depth.min(cf.deepest_level_with_q_below(CRITICAL_Q_CAP));
        let (map, diag) = stage("tune", tune_parameter(&cf, depth, m.precision_bits))?;
        let mut crit_levels: Vec<Vec<f64>> = vec![vec![0.0]];
        for n in 1..=depth {
            let part = stage("partition", partition_critical(&map, &cf, n, CRITICAL_Q_CAP))?;
            // The critical orbit visits the circle in the reflected order
            // of the rotation-partition points -j*theta, so reflect it to
            // align the two grids' combinatorics.
            let mut pts: Vec<f64> = part
                .points
                .iter()
                .map(|&p| if p <= 0.0 { 0.0 } else { 1.0 - p })
                .collect();
            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            crit_levels.push(pts);
        }
        let deepest_points = crit_levels[depth].len();
        let crit_grid = stage("grid", build_grid(crit_levels))?;
        let rot_grid = stage("grid", grid_from_rotation(&cf, depth, CRITICAL_Q_CAP))?;
        let pair = stage("grid", GridPair::new(crit_grid, rot_grid))?;
        let fwd = stage(
            "analyze",
            sample_field_grids(&pair, &base, Direction::Forward, depth.saturating_sub(1), m.budget, m.seed),
        )?;
        let inv = stage(
            "analyze",
            sample_field_grids(
                &pair,
                &base,
                Direction::Inverse,
                depth.saturating_sub(1),
                m.budget,
                m.seed.wrapping_add(1),
            ),
        )?;
        let kg = default_k_grid(&fwd, 40);
        let fwd_est = stage("analyze", tail_area(&fwd, &kg))?;
        let ki = default_k_grid(&inv, 40);
        let inv_est = stage("analyze", tail_area(&inv, &ki))?;
        let fwd_fit = fit_tail(&fwd_est, Gauge::David, None).ok();
        let v: Option<&dyn Fn(f64) -> f64> = if gauge == Gauge::FiniteDistortion {
            Some(&fd_v)
        } else {
            None
        };
        gauge_fit = fit_tail(&fwd_est, gauge, v).ok();
        let bounded = bounded_at(&fwd_est);
        let k_growth = level_k_growth(&fwd);
        verdict = if k_growth < 0.05 && bounded.is_some() {
            "bounded".into()
        } else {
            match &fwd_fit {
                Some(f) if f.alpha > 0.0 && f.goodness >= 0.9 => "exponential".into(),
                Some(f) if f.alpha > 0.0 && f.curvature > 0.0 => "super-exponential".into(),
                _ => "heavy".into(),
            }
        };
        pass = true;
        calibration_json = serde_json::to_string_pretty(&serde_json::json!({
            "manifest_hash": hash,
            "tune_bracket_width": diag.bracket_width,
        }))?;
        critical = Some(CriticalSummary {
            depth,
            deepest_points,
            tune_bracket_width: diag.bracket_width,
            fwd_fit,
            fwd_bounded_at: bounded,
            fwd_estimate: fwd_est,
            inv_estimate: inv_est,
        });
        fwd_csv = Some(fwd);
        inv_csv = Some(inv);
    }

    let calibration_id = {
        let mut h = Sha256::new();
        h.update(calibration_json.as_bytes());
        let d = h.finalize();
        let mut s = String::new();
        for b in d.iter().take(8) {
            write!(s, "{b:02x}").unwrap();
        }
        s
    };
    let header = ArtifactHeader {
        manifest_hash: hash.clone(),
        calibration_id,
        versions: versions(),
    };

    let p = m.output_dir.join("calibration.json");
    fs::write(&p, &calibration_json)?;
    files.push(p);

    if let Some(fwd) = &fwd_csv {
        let p = m.output_dir.join("samples_fwd.csv");
        fs::write(&p, samples_csv(&header, fwd))?;
        files.push(p);
    }
    if let Some(inv) = &inv_csv {
        let p = m.output_dir.join("samples_inv.csv");
        fs::write(&p, samples_csv(&header, inv))?;
        files.push(p);
    }

    // SVG of the (materialized) grid, shallow enough to draw.
    let svg_depth = m.depth.min(cf.deepest_level_with_q_below(2_000));
    if let Ok(grid) = parabolic_grid(&cf, svg_depth, 2_000) {
        if let Ok(mut svg) = render_svg(&grid, svg_depth, None) {
            writeln!(svg, "<!-- manifest {} calibration {} -->", header.manifest_hash,
                     header.calibration_id).unwrap();
            let p = m.output_dir.join("grid.svg");
            fs::write(&p, svg)?;
            files.push(p);
        }
    }

    let doc = VerdictsDoc {
        header,
        manifest: m.clone(),
        identity,
        arithmetic,
        synthetic,
        critical,
        gauge_fit,
        verdict,
        pass,
    };
    let verdicts_json = serde_json::to_string_pretty(&doc)?;
    let p = m.output_dir.join("verdicts.json");
    fs::write(&p, &verdicts_json)?;
    files.push(p);

    Ok(RunBundle {
        dir: m.output_dir.clone(),
        manifest_hash: hash,
        verdicts_json,
        files,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_manifest(dir: &Path) -> ExperimentManifest {
        ExperimentManifest {
            name: "test".into(),
            terms: None,
            generator: Some("golden".into()),
            generator_param: None,
            spike_at: None,
            n_terms: 16,
            tier: "synthetic-rotation".into(),
            depth: 6,
            budget: 600,
            precision_bits: 256,
            seed: 7,
            gauge: "david".into(),
            output_dir: dir.to_path_buf(),
        }
    }

    #[test]
    fn validate_flags_the_contract_cases() {
        let dir = std::env::temp_dir().join("ylab-validate");
        let mut m = base_manifest(&dir);
        assert!(validate_manifest(&m).is_empty());

        m.generator = None;
        let d = validate_manifest(&m);
        assert!(d.iter().any(|s| s.contains("no rotation number")), "{d:?}");

        // Critical tier with q over the cap suggests the synthetic tier.
        let mut m = base_manifest(&dir);
        m.tier = "critical".into();
        m.generator = Some("stretched-exp".into());
        m.depth = 20;
        m.n_terms = 24;
        let d = validate_manifest(&m);
        assert!(d.iter().any(|s| s.contains("synthetic-rotation")), "{d:?}");
    }

    #[test]
    fn depth_zero_gives_identity_report() {
        let dir = std::env::temp_dir().join("ylab-identity");
        let mut m = base_manifest(&dir);
        m.depth = 0;
        let bundle = run_pipeline(&m).unwrap();
        assert!(bundle.pass);
        let doc: serde_json::Value = serde_json::from_str(&bundle.verdicts_json).unwrap();
        assert_eq!(doc["identity"], serde_json::Value::Bool(true));
        assert_eq!(doc["verdict"], "identity");
    }

    #[test]
    fn rerun_is_byte_identical() {
        let dir = std::env::temp_dir().join("ylab-determinism");
        let m = base_manifest(&dir);
        let b1 = run_pipeline(&m).unwrap();
        let b2 = run_pipeline(&m).unwrap();
        assert_eq!(b1.verdicts_json, b2.verdicts_json);
        assert_eq!(b1.manifest_hash, b2.manifest_hash);
        // Golden on the synthetic tier: bounded-type verdict.
        let doc: serde_json::Value = serde_json::from_str(&b1.verdicts_json).unwrap();
        assert_eq!(doc["verdict"], "bounded");
        assert!(b1.pass);
        // All artifacts embed the manifest hash.
        for f in &b1.files {
            let text = fs::read_to_string(f).unwrap();
            assert!(text.contains(&b1.manifest_hash), "{} lacks hash", f.display());
        }
    }

    #[test]
    fn critical_tier_runs_end_to_end() {
        let dir = std::env::temp_dir().join("ylab-critical");
        let mut m = base_manifest(&dir);
        m.tier = "critical".into();
        m.depth = 5;
        m.budget = 400;
        let bundle = run_pipeline(&m).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&bundle.verdicts_json).unwrap();
        assert!(doc["critical"]["deepest_points"].as_u64().unwrap() >= 8);
        // The lock interval for the first 5 quotients has positive width;
        // just check the bracket is a proper sub-interval.
        let bw = doc["critical"]["tune_bracket_width"].as_f64().unwrap();
        assert!(bw > 0.0 && bw < 0.5, "bracket width {bw}");
        // At this shallow depth the critical-vs-rotation comparison still
        // carries the renormalization transient (max K grows level to
        // level), so any verdict except "heavy" is acceptable.
        let v = doc["verdict"].as_str().unwrap();
        assert!(
            ["bounded", "exponential", "super-exponential"].contains(&v),
            "verdict {v}"
        );
    }
}
