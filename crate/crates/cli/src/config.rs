//! Flag and config-file resolution into a [`RunConfig`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use cwtori::moebius::{Ambient, EtaPolicy};
use cwtori::spectral::{BranchOptions, SweepSpec};
use cwtori::{BuiltinKind, QMat2, Quaternion, C64};
use serde::{Deserialize, Serialize};

/// Failure with a process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn io(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
}

impl From<cwtori::Error> for CliError {
    fn from(e: cwtori::Error) -> Self {
        use cwtori::Error as E;
        let code = match &e {
            E::Io(_) | E::Json(_) => 1,
            E::ConformalHarmonic => 4,
            E::MaskedMajority { .. } => 5,
            _ => 2,
        };
        CliError { code, message: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Options shared by every subcommand; each may also come from `--config`.
#[derive(Args, Debug, Default, Clone)]
pub struct Opts {
    /// clifford | homogeneous | hopf | hsl | file:PATH | zero-form | jordan-form | conformal-maslov
    #[arg(long, global = true)]
    pub surface: Option<String>,
    /// Surface parameter `key=value` (r, beta=b1,b2, theta, curve-samples); repeatable.
    #[arg(long, global = true)]
    pub param: Vec<String>,
    /// Grid size `N1xN2`.
    #[arg(long, global = true)]
    pub dims: Option<String>,
    /// zero | cmc:RHO | cmc-r3:RHO | harmonic-left | harmonic-right | file:PATH
    #[arg(long, global = true)]
    pub eta: Option<String>,
    /// `RMIN,RMAX` of the spectral annulus.
    #[arg(long, global = true)]
    pub annulus: Option<String>,
    /// Circles in the sweep.
    #[arg(long, global = true)]
    pub circles: Option<String>,
    /// Samples per circle.
    #[arg(long, global = true)]
    pub samples: Option<String>,
    #[arg(long = "tol-eig", global = true)]
    pub tol_eig: Option<String>,
    #[arg(long = "tol-ode", global = true)]
    pub tol_ode: Option<String>,
    #[arg(long, global = true)]
    pub workers: Option<String>,
    /// Output directory; without it the JSON report goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// Spectral parameter `RE,IM`.
    #[arg(long, global = true)]
    pub mu: Option<String>,
    /// Index of the nontrivial eigenvalue (sorted by argument, then modulus).
    #[arg(long, global = true)]
    pub eigen: Option<String>,
    /// Lattice generator `A,B` of the spectral curve.
    #[arg(long, global = true)]
    pub generator: Option<String>,
    /// Flat `key=value` file mirroring the long flags.
    #[arg(long, global = true)]
    pub config: Option<String>,
}

#[derive(Clone, Debug)]
pub enum SurfaceSource {
    Builtin(BuiltinKind),
    File(PathBuf),
    ZeroForm,
    JordanForm,
    ConformalMaslov,
}

impl SurfaceSource {
    pub fn name(&self) -> String {
        match self {
            SurfaceSource::Builtin(BuiltinKind::Clifford) => "clifford".into(),
            SurfaceSource::Builtin(BuiltinKind::Homogeneous { r }) => format!("homogeneous(r={r})"),
            SurfaceSource::Builtin(BuiltinKind::Hopf { curve }) => format!("hopf({} samples)", curve.len()),
            SurfaceSource::Builtin(BuiltinKind::Hsl { beta }) => format!("hsl(beta={},{})", beta[0], beta[1]),
            SurfaceSource::File(p) => format!("file:{}", p.display()),
            SurfaceSource::ZeroForm => "zero-form".into(),
            SurfaceSource::JordanForm => "jordan-form".into(),
            SurfaceSource::ConformalMaslov => "conformal-maslov".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub surface: SurfaceSource,
    pub dims: (usize, usize),
    pub eta: EtaChoice,
    pub sweep: SweepSpec,
    pub branch: BranchOptions,
    pub tol_eig: f64,
    pub tol_ode: f64,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub mu: C64,
    pub eigen: usize,
    pub generator: (i64, i64),
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub enum EtaChoice {
    Policy(EtaPolicy),
    File(PathBuf),
}

impl EtaChoice {
    pub fn name(&self) -> String {
        match self {
            EtaChoice::Policy(p) => p.name(),
            EtaChoice::File(p) => format!("file:{}", p.display()),
        }
    }
}

/// Settings echoed into every report; excludes worker count and output path.
#[derive(Clone, Debug, Serialize)]
pub struct ConfigEcho {
    pub surface: String,
    pub dims: [usize; 2],
    pub eta: String,
    pub annulus: [f64; 2],
    pub circles: usize,
    pub samples: usize,
    pub tol_eig: f64,
    pub tol_ode: f64,
    pub mu: C64,
    pub eigen: usize,
    pub generator: (i64, i64),
}

impl RunConfig {
    pub fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            surface: self.surface.name(),
            dims: [self.dims.0, self.dims.1],
            eta: self.eta.name(),
            annulus: [self.sweep.rmin, self.sweep.rmax],
            circles: self.sweep.circles,
            samples: self.sweep.samples,
            tol_eig: self.tol_eig,
            tol_ode: self.tol_ode,
            mu: self.mu,
            eigen: self.eigen,
            generator: self.generator,
        }
    }
}

pub fn read_config_file(path: &Path) -> CliResult<BTreeMap<String, Vec<String>>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> CliResult<BTreeMap<String, Vec<String>>> {
    let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::invalid(format!("config line {}: expected key=value", n + 1)))?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        map.entry(key).or_default().push(v.trim().to_string());
    }
    Ok(map)
}

fn parse_f64(key: &str, v: &str) -> CliResult<f64> {
    v.trim().parse::<f64>().map_err(|_| CliError::invalid(format!("--{key}: not a number: {v}")))
}

fn parse_usize(key: &str, v: &str) -> CliResult<usize> {
    v.trim().parse::<usize>().map_err(|_| CliError::invalid(format!("--{key}: not a count: {v}")))
}

fn parse_pair(key: &str, v: &str) -> CliResult<(f64, f64)> {
    let (a, b) = v.split_once(',').ok_or_else(|| CliError::invalid(format!("--{key}: expected A,B, got {v}")))?;
    Ok((parse_f64(key, a)?, parse_f64(key, b)?))
}

fn parse_dims(v: &str) -> CliResult<(usize, usize)> {
    let (a, b) = v
        .split_once(['x', 'X'])
        .ok_or_else(|| CliError::invalid(format!("--dims: expected N1xN2, got {v}")))?;
    Ok((parse_usize("dims", a)?, parse_usize("dims", b)?))
}

fn parse_eta(v: &str) -> CliResult<EtaChoice> {
    let policy = match v {
        "zero" => EtaPolicy::Zero,
        "harmonic-left" => EtaPolicy::HarmonicLeft,
        "harmonic-right" => EtaPolicy::HarmonicRight,
        _ => {
            if let Some(p) = v.strip_prefix("file:") {
                return Ok(EtaChoice::File(PathBuf::from(p)));
            } else if let Some(r) = v.strip_prefix("cmc-r3:") {
                EtaPolicy::CmcRho { rho: parse_f64("eta", r)?, ambient: Ambient::R3 }
            } else if let Some(r) = v.strip_prefix("cmc:") {
                EtaPolicy::CmcRho { rho: parse_f64("eta", r)?, ambient: Ambient::S3 }
            } else {
                return Err(CliError::invalid(format!("--eta: unknown policy {v}")));
            }
        }
    };
    Ok(EtaChoice::Policy(policy))
}

fn parse_surface(v: &str, params: &BTreeMap<String, String>) -> CliResult<SurfaceSource> {
    let get = |k: &str, default: f64| params.get(k).map(|s| parse_f64(k, s)).unwrap_or(Ok(default));
    Ok(match v {
        "clifford" => SurfaceSource::Builtin(BuiltinKind::Clifford),
        "homogeneous" => SurfaceSource::Builtin(BuiltinKind::Homogeneous { r: get("r", 0.6)? }),
        "hsl" => {
            let beta = params.get("beta").map(|s| parse_pair("param beta", s)).unwrap_or(Ok((1.0, 1.0)))?;
            SurfaceSource::Builtin(BuiltinKind::Hsl { beta: [beta.0, beta.1] })
        }
        "hopf" => {
            let samples = params.get("curve-samples").map(|s| parse_usize("param curve-samples", s)).unwrap_or(Ok(64))?;
            SurfaceSource::Builtin(BuiltinKind::Hopf { curve: cwtori::surface::latitude_circle(get("theta", 1.0)?, samples) })
        }
        "zero-form" => SurfaceSource::ZeroForm,
        "jordan-form" => SurfaceSource::JordanForm,
        "conformal-maslov" => SurfaceSource::ConformalMaslov,
        _ => match v.strip_prefix("file:") {
            Some(p) => SurfaceSource::File(PathBuf::from(p)),
            None => return Err(CliError::invalid(format!("--surface: unknown source {v}"))),
        },
    })
}

/// Flags win over the config file, which wins over defaults.
pub fn resolve(opts: &Opts) -> CliResult<RunConfig> {
    let file = match &opts.config {
        Some(p) => read_config_file(Path::new(p))?,
        None => BTreeMap::new(),
    };
    let pick = |flag: &Option<String>, key: &str| -> Option<String> {
        flag.clone().or_else(|| file.get(key).and_then(|v| v.last().cloned()))
    };
    let mut warnings = Vec::new();

    let mut params = BTreeMap::new();
    let file_params = file.get("param").cloned().unwrap_or_default();
    for p in file_params.iter().chain(&opts.param) {
        let (k, v) = p.split_once('=').ok_or_else(|| CliError::invalid(format!("--param: expected key=value, got {p}")))?;
        params.insert(k.trim().to_string(), v.trim().to_string());
    }
    let surface = parse_surface(&pick(&opts.surface, "surface").unwrap_or_else(|| "clifford".into()), &params)?;

    let dims = parse_dims(&pick(&opts.dims, "dims").unwrap_or_else(|| "64x64".into()))?;
    if dims.0 < 8 || dims.1 < 8 {
        return Err(CliError::invalid("--dims: need at least 8x8"));
    }
    if !dims.0.is_power_of_two() || !dims.1.is_power_of_two() {
        warnings.push(format!("dims {}x{} are not powers of two", dims.0, dims.1));
    }
    let eta = parse_eta(&pick(&opts.eta, "eta").unwrap_or_else(|| "zero".into()))?;

    let (rmin, rmax) = match pick(&opts.annulus, "annulus") {
        Some(v) => parse_pair("annulus", &v)?,
        None => (0.5, 2.0),
    };
    let circles = pick(&opts.circles, "circles").map(|v| parse_usize("circles", &v)).transpose()?.unwrap_or(5);
    let samples = pick(&opts.samples, "samples").map(|v| parse_usize("samples", &v)).transpose()?.unwrap_or(32);
    let sweep = SweepSpec { rmin, rmax, circles, samples, ..SweepSpec::default() };
    sweep.validate().map_err(|e| CliError::invalid(e.to_string()))?;

    let tol_eig = pick(&opts.tol_eig, "tol-eig").map(|v| parse_f64("tol-eig", &v)).transpose()?.unwrap_or(1e-6);
    let tol_ode = pick(&opts.tol_ode, "tol-ode").map(|v| parse_f64("tol-ode", &v)).transpose()?.unwrap_or(1e-9);
    if !(tol_eig > 0.0 && tol_ode > 0.0) {
        return Err(CliError::invalid("tolerances must be positive"));
    }
    let workers = pick(&opts.workers, "workers").map(|v| parse_usize("workers", &v)).transpose()?;
    if workers == Some(0) {
        return Err(CliError::invalid("--workers must be positive"));
    }
    let out = pick(&opts.out, "out").map(PathBuf::from);
    let mu = match pick(&opts.mu, "mu") {
        Some(v) => {
            let (re, im) = parse_pair("mu", &v)?;
            C64::new(re, im)
        }
        None => C64::new(2.0, 0.0),
    };
    if mu.norm() == 0.0 || !mu.is_finite() {
        return Err(CliError::invalid("--mu must be finite and nonzero"));
    }
    let eigen = pick(&opts.eigen, "eigen").map(|v| parse_usize("eigen", &v)).transpose()?.unwrap_or(0);
    let generator = match pick(&opts.generator, "generator") {
        Some(v) => {
            let (a, b) = v.split_once(',').ok_or_else(|| CliError::invalid("--generator: expected A,B"))?;
            let p = |s: &str| s.trim().parse::<i64>().map_err(|_| CliError::invalid(format!("--generator: bad integer {s}")));
            (p(a)?, p(b)?)
        }
        None => (1, 0),
    };
    let radial = file.get("branch-radial").and_then(|v| v.last()).map(|v| parse_usize("branch-radial", v)).transpose()?;
    let angular = file.get("branch-angular").and_then(|v| v.last()).map(|v| parse_usize("branch-angular", v)).transpose()?;
    let defaults = BranchOptions::default();
    let branch = BranchOptions { radial: radial.unwrap_or(defaults.radial), angular: angular.unwrap_or(defaults.angular), ..defaults };
    Ok(RunConfig { surface, dims, eta, sweep, branch, tol_eig, tol_ode, workers, out, mu, eigen, generator, warnings })
}

/// Multiplier grid file: per point four quaternions `[w, x, y, z]` for the entries `a, b, c, d`.
#[derive(Debug, Deserialize)]
pub struct EtaFile {
    pub eta_x: Vec<[[f64; 4]; 4]>,
    pub eta_y: Vec<[[f64; 4]; 4]>,
}

pub fn read_eta_file(path: &Path) -> CliResult<(Vec<QMat2>, Vec<QMat2>)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
    let file: EtaFile = serde_json::from_str(&text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let conv = |v: &[[[f64; 4]; 4]]| -> Vec<QMat2> {
        v.iter()
            .map(|m| {
                let q = |e: [f64; 4]| Quaternion::new(e[0], e[1], e[2], e[3]);
                QMat2::new(q(m[0]), q(m[1]), q(m[2]), q(m[3]))
            })
            .collect()
    };
    Ok((conv(&file.eta_x), conv(&file.eta_y)))
}
