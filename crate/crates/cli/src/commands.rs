//! Subcommand implementations. Each returns a JSON result, extra output files and an exit code.

use cwtori::darboux::{darboux_transform, parallel_section, prolongation_residual, transform_quality, DarbouxOptions, SectionOptions};
use cwtori::family::{connection_form, jordan_fixture, MuForm};
use cwtori::harmonic::{compare_families, harmonic_chart, harmonic_spectral, rank1_family, HarmonicMapGrid};
use cwtori::holonomy::{
    circle_samples, classify, eigenvalues, holonomy_pair, sort_eigenvalues, Case, CaseLabel, ClassifyOptions, EigenOptions,
    TransportOptions,
};
use cwtori::moebius::{analyze, circle_checks, mean_curvature_sphere, sphere_checks, validate_cmc_r3, validate_cmc_s3, EtaPolicy};
use cwtori::quat::CVec4;
use cwtori::spectral::{eigenline_multiplier, spectral_report, CurveShape, SpectralCurve, SpectralOptions};
use cwtori::surface::{builtin_surface, sample_frames, SampledSurfaceFile};
use cwtori::{FrameGrid, SurfaceSpec, TorusLattice, C64};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{read_eta_file, CliError, CliResult, EtaChoice, RunConfig, SurfaceSource};

pub struct Outcome {
    pub result: Value,
    /// Extra files written next to the report when `--out` is given.
    pub files: Vec<(String, Vec<u8>)>,
    pub code: i32,
}

impl Outcome {
    fn ok(result: Value) -> Self {
        Outcome { result, files: Vec::new(), code: 0 }
    }
}

fn to_value<T: Serialize>(v: &T) -> CliResult<Value> {
    serde_json::to_value(v).map_err(|e| CliError::io(e.to_string()))
}

fn transport_opts(cfg: &RunConfig) -> TransportOptions {
    TransportOptions { tol: cfg.tol_ode, ..TransportOptions::default() }
}

fn spectral_opts(cfg: &RunConfig) -> SpectralOptions {
    SpectralOptions { transport: transport_opts(cfg), tol_eig: cfg.tol_eig, ..SpectralOptions::default() }
}

fn classify_opts(cfg: &RunConfig) -> ClassifyOptions {
    ClassifyOptions {
        transport: transport_opts(cfg),
        eigen: EigenOptions { tol_eig: cfg.tol_eig, ..EigenOptions::default() },
        ..ClassifyOptions::default()
    }
}

const MASLOV_STUB: &str = "conformal-maslov generator is not implemented (explicit parametrizations are not available); use --surface hsl for the linear-angle family";

pub fn surface_spec(cfg: &RunConfig) -> CliResult<SurfaceSpec> {
    match &cfg.surface {
        SurfaceSource::Builtin(kind) => Ok(builtin_surface(kind)?),
        SurfaceSource::File(path) => Ok(SurfaceSpec::read_json(path)?),
        SurfaceSource::ConformalMaslov => Err(CliError::invalid(MASLOV_STUB)),
        other => Err(CliError::invalid(format!("{} is a synthetic connection form, not a surface", other.name()))),
    }
}

fn frames(cfg: &RunConfig) -> CliResult<FrameGrid> {
    Ok(sample_frames(&surface_spec(cfg)?, cfg.dims.0, cfg.dims.1)?)
}

fn policy(cfg: &RunConfig, fg: &FrameGrid) -> CliResult<EtaPolicy> {
    match &cfg.eta {
        EtaChoice::Policy(p) => Ok(p.clone()),
        EtaChoice::File(path) => {
            let (eta_x, eta_y) = read_eta_file(path)?;
            if eta_x.len() != fg.len() || eta_y.len() != fg.len() {
                return Err(CliError::invalid(format!(
                    "multiplier file has {} / {} entries, grid has {}",
                    eta_x.len(),
                    eta_y.len(),
                    fg.len()
                )));
            }
            Ok(EtaPolicy::Custom { eta_x, eta_y })
        }
    }
}

fn unit_lattice() -> TorusLattice {
    TorusLattice::new(C64::new(1.0, 0.0), C64::new(0.0, 1.0)).expect("unit lattice")
}

/// The associated family, with the frames when it comes from a surface.
fn mu_form(cfg: &RunConfig) -> CliResult<(MuForm, Option<FrameGrid>)> {
    let (n1, n2) = cfg.dims;
    match &cfg.surface {
        SurfaceSource::ZeroForm => Ok((MuForm::zero(n1, n2, unit_lattice()), None)),
        SurfaceSource::JordanForm => Ok((jordan_fixture(n1, n2, unit_lattice(), C64::new(0.4, -0.2)), None)),
        _ => {
            let fg = frames(cfg)?;
            let (_, cg) = analyze(&fg, &policy(cfg, &fg)?)?;
            let sg = mean_curvature_sphere(&fg);
            Ok((connection_form(&cg, &sg), Some(fg)))
        }
    }
}

fn case_label(cfg: &RunConfig, form: &MuForm) -> CliResult<CaseLabel> {
    let mus = circle_samples(cfg.sweep.rmin, cfg.sweep.samples.max(8));
    Ok(classify(form, &mus, &classify_opts(cfg))?)
}

fn shape_for(label: Case) -> CliResult<CurveShape> {
    match label {
        Case::Undetermined => Err(CliError { code: 3, message: "classification undetermined".into() }),
        Case::IIIa | Case::IIIb => Err(CliError { code: 4, message: format!("no nontrivial spectral curve (case {label})") }),
        _ => Ok(CurveShape::from_case(4, label)?),
    }
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::io(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::io(e.to_string()))
}

fn complex_header(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).flat_map(|k| [format!("{prefix}{k}_re"), format!("{prefix}{k}_im")]).collect()
}

fn complex_cells(v: &[C64], n: usize) -> Vec<String> {
    (0..n)
        .flat_map(|k| match v.get(k) {
            Some(z) => [z.re.to_string(), z.im.to_string()],
            None => [String::new(), String::new()],
        })
        .collect()
}

/// Sweep points on every circle, excluding the disk around `mu = 1`.
fn sweep_points(cfg: &RunConfig) -> Vec<C64> {
    let s = &cfg.sweep;
    s.radii().into_iter().flat_map(|r| s.circle(r)).filter(|m| (m - 1.0).norm() >= s.exclusion).collect()
}

pub fn analyze_cmd(cfg: &RunConfig) -> CliResult<Outcome> {
    let fg = frames(cfg)?;
    let pol = policy(cfg, &fg)?;
    let (report, cg) = analyze(&fg, &pol)?;
    let sg = mean_curvature_sphere(&fg);
    let (sphere_square, sphere_line) = sphere_checks(&sg, &fg);
    let lattice = fg.lattice;
    Ok(Outcome::ok(json!({
        "surface": surface_spec(cfg)?.kind.name(),
        "dims": [fg.n1, fg.n2],
        "lattice": { "tau1": lattice.tau1, "tau2": lattice.tau2 },
        "area": lattice.area(),
        "eta": pol.name(),
        "analysis": to_value(&report)?,
        "sphere_mean_curvature": validate_cmc_s3(&fg, 1e-6).ok(),
        "euclidean_mean_curvature": validate_cmc_r3(&fg, 1e-6).ok(),
        "sphere_checks": { "square": sphere_square, "line": sphere_line },
        "circle_checks": to_value(&circle_checks(&cg, &fg, &sg))?,
    })))
}

pub fn classify_cmd(cfg: &RunConfig) -> CliResult<Outcome> {
    let (form, _) = mu_form(cfg)?;
    let label = case_label(cfg, &form)?;
    let code = if label.label == Case::Undetermined { 3 } else { 0 };
    Ok(Outcome { result: to_value(&label)?, files: Vec::new(), code })
}

#[derive(Serialize)]
struct HolonomySample {
    mu: C64,
    eigenvalues: Vec<C64>,
    eigenvalues_2: Vec<C64>,
    det_drift: f64,
    commutator_norm: f64,
    error_estimate: f64,
}

pub fn holonomy_cmd(cfg: &RunConfig) -> CliResult<Outcome> {
    let (form, _) = mu_form(cfg)?;
    let opts = transport_opts(cfg);
    let mus = sweep_points(cfg);
    let samples: Vec<HolonomySample> = mus
        .par_iter()
        .map(|&mu| {
            let (t1, t2) = holonomy_pair(&form, mu, (0.0, 0.0), &opts)?;
            let (mut e1, mut e2) = (eigenvalues(&t1.h), eigenvalues(&t2.h));
            sort_eigenvalues(&mut e1);
            sort_eigenvalues(&mut e2);
            let one = C64::new(1.0, 0.0);
            Ok(HolonomySample {
                mu,
                eigenvalues: e1,
                eigenvalues_2: e2,
                det_drift: (t1.h.determinant() - one).norm().max((t2.h.determinant() - one).norm()),
                commutator_norm: (t1.h * t2.h - t2.h * t1.h).norm(),
                error_estimate: t1.error_estimate.max(t2.error_estimate),
            })
        })
        .collect::<cwtori::Result<_>>()?;
    let mut header = vec!["mu_re".to_string(), "mu_im".to_string()];
    header.extend(complex_header("lam", 4));
    header.extend(["det_drift", "commutator_norm", "error_estimate"].map(String::from));
    let rows: Vec<Vec<String>> = samples
        .iter()
        .map(|s| {
            let mut r = vec![s.mu.re.to_string(), s.mu.im.to_string()];
            r.extend(complex_cells(&s.eigenvalues, 4));
            r.extend([s.det_drift, s.commutator_norm, s.error_estimate].map(|x| x.to_string()));
            r
        })
        .collect();
    Ok(Outcome {
        result: json!({ "samples": to_value(&samples)? }),
        files: vec![("holonomy.csv".into(), csv_bytes(&header, &rows)?)],
        code: 0,
    })
}

pub fn spectral_cmd(cfg: &RunConfig) -> CliResult<Outcome> {
    let (form, _) = mu_form(cfg)?;
    let label = case_label(cfg, &form)?;
    let shape = shape_for(label.label)?;
    let curve = SpectralCurve::new(&form, shape, cfg.generator, &cfg.sweep.probes(), spectral_opts(cfg))?;
    let report = spectral_report(&curve, &cfg.sweep, &cfg.branch)?;
    let sheets = shape.sheets;
    let mut header = vec!["mu_re".to_string(), "mu_im".to_string()];
    header.extend(complex_header("lam", sheets));
    header.extend(["k_trivial", "flags"].map(String::from));
    let rows: Vec<Vec<String>> = report
        .samples
        .iter()
        .map(|s| {
            let mut r = vec![s.mu.re.to_string(), s.mu.im.to_string()];
            r.extend(complex_cells(&s.eigenvalues, sheets));
            r.push(s.k_trivial.to_string());
            r.push(s.flags.join(";"));
            r
        })
        .collect();
    let mut result = to_value(&report)?;
    if let Value::Object(m) = &mut result {
        m.insert("case".into(), Value::String(label.label.to_string()));
    }
    Ok(Outcome { result, files: vec![("branches.csv".into(), csv_bytes(&header, &rows)?)], code: 0 })
}

pub fn darboux_cmd(cfg: &RunConfig) -> CliResult<Outcome> {
    let (form, fg) = mu_form(cfg)?;
    let fg = fg.ok_or_else(|| CliError::invalid("darboux needs a surface, not a synthetic form"))?;
    let section_opts = SectionOptions::default();
    let mu = cfg.mu;
    let (seed, multiplier) = if (mu - 1.0).norm() < 1e-12 {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        (CVec4::new(zero, zero, one, zero), Value::Null)
    } else {
        let label = case_label(cfg, &form)?;
        let shape = shape_for(label.label)?;
        let curve = SpectralCurve::new(&form, shape, cfg.generator, &[mu], spectral_opts(cfg))?;
        let m = eigenline_multiplier(&curve, mu, cfg.eigen)?;
        (m.vector, to_value(&m)?)
    };
    let ps = parallel_section(&form, mu, seed, &section_opts)?;
    let prolongation = prolongation_residual(&ps, &fg)?;
    let dm = darboux_transform(&ps, &fg, &DarbouxOptions::default())?;
    let quality = transform_quality(&dm);
    let mesh = serde_json::to_vec_pretty(&dm.mesh()).map_err(|e| CliError::io(e.to_string()))?;
    let code = if quality.degenerate { 5 } else { 0 };
    Ok(Outcome {
        result: json!({
            "mu": mu,
            "multiplier": multiplier,
            "section": to_value(&ps)?,
            "prolongation_residual": prolongation,
            "quality": to_value(&quality)?,
            "spread": dm.spread,
        }),
        files: vec![("darboux_mesh.json".into(), mesh)],
        code,
    })
}

pub fn harmonic_cmd(cfg: &RunConfig) -> CliResult<Outcome> {
    let spec = surface_spec(cfg)?;
    let (n1, n2) = cfg.dims;
    let fg = sample_frames(&spec, n1, n2)?;
    let pol = policy(cfg, &fg)?;
    let chart = harmonic_chart(&spec, n1, n2, &pol, 1e-6)?;
    let hm = HarmonicMapGrid::from_frames(&chart.fg);
    let rf = rank1_family(&hm, 1e-4)?;
    let report = harmonic_spectral(&rf, cfg.generator, &cfg.sweep, &cfg.branch, spectral_opts(cfg))?;
    let mut mus = circle_samples(cfg.sweep.rmin, cfg.sweep.samples);
    mus.extend(circle_samples(cfg.sweep.rmax, cfg.sweep.samples));
    let pairs = compare_families(&rf, &chart.form, &mus, cfg.generator, spectral_opts(cfg))?;
    let mut header = vec!["mu_re".to_string(), "mu_im".to_string()];
    header.extend(complex_header("rank1_", 2));
    header.extend(complex_header("stripped_", 2));
    header.push("distance".into());
    let rows: Vec<Vec<String>> = pairs
        .iter()
        .map(|p| {
            let (mut a, mut b) = (p.rank1.clone(), p.stripped.clone());
            sort_eigenvalues(&mut a);
            sort_eigenvalues(&mut b);
            let mut r = vec![p.mu.re.to_string(), p.mu.im.to_string()];
            r.extend(complex_cells(&a, 2));
            r.extend(complex_cells(&b, 2));
            r.push(p.distance.to_string());
            r
        })
        .collect();
    let max_distance = pairs.iter().map(|p| p.distance).fold(0.0, f64::max);
    let (a_max, q_max) = (rf.a_max, rf.q_max);
    Ok(Outcome {
        result: json!({
            "chart_moved_point": chart.moved.map(|q| [q.w, q.x, q.y, q.z]),
            "chart_residual": chart.chart_residual,
            "harmonicity": rf.harmonicity,
            "hopf_norms": { "a": a_max, "q": q_max },
            "max_distance": max_distance,
            "pairs": to_value(&pairs)?,
            "spectral": to_value(&report)?,
        }),
        files: vec![("harmonic.csv".into(), csv_bytes(&header, &rows)?)],
        code: 0,
    })
}

/// Samples a surface onto the grid in the ingestion schema.
pub fn convert_cmd(cfg: &RunConfig) -> CliResult<SampledSurfaceFile> {
    let fg = frames(cfg)?;
    Ok(SampledSurfaceFile::new(fg.lattice, fg.n1, fg.n2, &fg.f))
}
