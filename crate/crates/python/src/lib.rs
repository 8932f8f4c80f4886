//! Python bindings: a `Torus` object carrying frames, multiplier and associated family.

use cwtori::darboux::{darboux_transform, parallel_section, transform_quality, DarbouxOptions, SectionOptions};
use cwtori::family::{connection_form, MuForm};
use cwtori::harmonic::{compare_families, harmonic_chart, rank1_family, HarmonicMapGrid};
use cwtori::holonomy::{circle_samples, classify, eigenvalues, holonomy_pair, sort_eigenvalues, ClassifyOptions, TransportOptions};
use cwtori::moebius::{analyze, mean_curvature_sphere, Ambient, AnalysisReport, EtaPolicy};
use cwtori::quat::CVec4;
use cwtori::spectral::{eigenline_multiplier, spectral_report, BranchOptions, CurveShape, SpectralCurve, SpectralOptions, SweepSpec};
use cwtori::surface::latitude_circle;
use cwtori::{builtin_surface, sample_frames, BuiltinKind, FrameGrid, SurfaceSpec, C64};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn py_err(e: cwtori::Error) -> PyErr {
    use cwtori::Error as E;
    match e {
        E::Io(_) | E::Json(_) => PyIOError::new_err(e.to_string()),
        E::InvalidParams(_) | E::Precondition(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<PyObject> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn parse_eta(eta: &str) -> PyResult<EtaPolicy> {
    let rho = |s: &str| s.parse::<f64>().map_err(|_| PyValueError::new_err(format!("bad rho in {eta}")));
    Ok(match eta {
        "zero" => EtaPolicy::Zero,
        "harmonic-left" => EtaPolicy::HarmonicLeft,
        "harmonic-right" => EtaPolicy::HarmonicRight,
        _ => {
            if let Some(r) = eta.strip_prefix("cmc-r3:") {
                EtaPolicy::CmcRho { rho: rho(r)?, ambient: Ambient::R3 }
            } else if let Some(r) = eta.strip_prefix("cmc:") {
                EtaPolicy::CmcRho { rho: rho(r)?, ambient: Ambient::S3 }
            } else {
                return Err(PyValueError::new_err(format!("unknown multiplier policy {eta}")));
            }
        }
    })
}

/// A sampled torus with its multiplier and associated family.
#[pyclass]
struct Torus {
    spec: SurfaceSpec,
    policy: EtaPolicy,
    fg: FrameGrid,
    form: MuForm,
    report: AnalysisReport,
}

impl Torus {
    fn build(spec: SurfaceSpec, n1: usize, n2: usize, eta: &str) -> PyResult<Self> {
        let policy = parse_eta(eta)?;
        let fg = sample_frames(&spec, n1, n2).map_err(py_err)?;
        let (report, cg) = analyze(&fg, &policy).map_err(py_err)?;
        let form = connection_form(&cg, &mean_curvature_sphere(&fg));
        Ok(Torus { spec, policy, fg, form, report })
    }

    fn curve(&self, probes: &[C64]) -> PyResult<SpectralCurve<'_, 4>> {
        let mus = circle_samples(0.5, 16);
        let label = classify(&self.form, &mus, &ClassifyOptions::default()).map_err(py_err)?.label;
        let shape = CurveShape::from_case(4, label).map_err(py_err)?;
        SpectralCurve::new(&self.form, shape, (1, 0), probes, SpectralOptions::default()).map_err(py_err)
    }
}

#[pymethods]
impl Torus {
    /// Built-in torus: `clifford`, `homogeneous` (r), `hsl` (beta) or `hopf` (theta, curve_samples).
    #[new]
    #[pyo3(signature = (kind, n1=64, n2=64, eta="zero", r=0.6, beta=(1.0, 1.0), theta=1.0, curve_samples=64))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        kind: &str,
        n1: usize,
        n2: usize,
        eta: &str,
        r: f64,
        beta: (f64, f64),
        theta: f64,
        curve_samples: usize,
    ) -> PyResult<Self> {
        let kind = match kind {
            "clifford" => BuiltinKind::Clifford,
            "homogeneous" => BuiltinKind::Homogeneous { r },
            "hsl" => BuiltinKind::Hsl { beta: [beta.0, beta.1] },
            "hopf" => BuiltinKind::Hopf { curve: latitude_circle(theta, curve_samples) },
            other => return Err(PyValueError::new_err(format!("unknown surface {other}"))),
        };
        Torus::build(builtin_surface(&kind).map_err(py_err)?, n1, n2, eta)
    }

    /// Sampled torus from the JSON ingestion format.
    #[staticmethod]
    #[pyo3(signature = (path, n1=64, n2=64, eta="zero"))]
    fn from_json(path: &str, n1: usize, n2: usize, eta: &str) -> PyResult<Self> {
        let spec = SurfaceSpec::read_json(std::path::Path::new(path)).map_err(py_err)?;
        Torus::build(spec, n1, n2, eta)
    }

    #[getter]
    fn dims(&self) -> (usize, usize) {
        (self.fg.n1, self.fg.n2)
    }

    /// Immersion values as `[w, x, y, z]` rows.
    fn points(&self) -> Vec<[f64; 4]> {
        self.fg.f.iter().map(|q| [q.w, q.x, q.y, q.z]).collect()
    }

    /// Willmore energy, normal degree and residuals.
    fn analyze(&self, py: Python<'_>) -> PyResult<PyObject> {
        to_py(py, &self.report)
    }

    #[pyo3(signature = (radius=0.5, samples=16))]
    fn classify(&self, py: Python<'_>, radius: f64, samples: usize) -> PyResult<PyObject> {
        let label = py
            .allow_threads(|| classify(&self.form, &circle_samples(radius, samples), &ClassifyOptions::default()))
            .map_err(py_err)?;
        to_py(py, &label)
    }

    /// Eigenvalues of both generator holonomies at `mu`, sorted by argument then modulus.
    fn holonomy(&self, mu: C64) -> PyResult<(Vec<C64>, Vec<C64>)> {
        let (t1, t2) = holonomy_pair(&self.form, mu, (0.0, 0.0), &TransportOptions::default()).map_err(py_err)?;
        let (mut a, mut b) = (eigenvalues(&t1.h), eigenvalues(&t2.h));
        sort_eigenvalues(&mut a);
        sort_eigenvalues(&mut b);
        Ok((a, b))
    }

    #[pyo3(signature = (rmin=0.5, rmax=2.0, circles=5, samples=32))]
    fn spectral(&self, py: Python<'_>, rmin: f64, rmax: f64, circles: usize, samples: usize) -> PyResult<PyObject> {
        let sweep = SweepSpec { rmin, rmax, circles, samples, ..SweepSpec::default() };
        sweep.validate().map_err(py_err)?;
        let report = py.allow_threads(|| -> PyResult<_> {
            let curve = self.curve(&sweep.probes())?;
            spectral_report(&curve, &sweep, &BranchOptions::default()).map_err(py_err)
        })?;
        to_py(py, &report)
    }

    /// Darboux transform along the `eigen`-th nontrivial eigenline at `mu`; returns `(points, quality)`.
    #[pyo3(signature = (mu, eigen=0))]
    fn darboux(&self, py: Python<'_>, mu: C64, eigen: usize) -> PyResult<(Vec<[f64; 4]>, PyObject)> {
        let dm = py.allow_threads(|| -> PyResult<_> {
            let seed = if (mu - 1.0).norm() < 1e-12 {
                let (one, zero) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
                CVec4::new(zero, zero, one, zero)
            } else {
                eigenline_multiplier(&self.curve(&[mu])?, mu, eigen).map_err(py_err)?.vector
            };
            let ps = parallel_section(&self.form, mu, seed, &SectionOptions::default()).map_err(py_err)?;
            darboux_transform(&ps, &self.fg, &DarbouxOptions::default()).map_err(py_err)
        })?;
        let points = dm.f.iter().map(|q| [q.w, q.x, q.y, q.z]).collect();
        Ok((points, to_py(py, &transform_quality(&dm))?))
    }

    /// Rank-1 family of the left normal against the stripped 4x4 family at each `mu`.
    fn harmonic_pairs(&self, py: Python<'_>, mus: Vec<C64>) -> PyResult<PyObject> {
        let pairs = py.allow_threads(|| -> PyResult<_> {
            let chart = harmonic_chart(&self.spec, self.fg.n1, self.fg.n2, &self.policy, 1e-6).map_err(py_err)?;
            let rf = rank1_family(&HarmonicMapGrid::from_frames(&chart.fg), 1e-4).map_err(py_err)?;
            compare_families(&rf, &chart.form, &mus, (1, 0), SpectralOptions::default()).map_err(py_err)
        })?;
        to_py(py, &pairs)
    }

    fn __repr__(&self) -> String {
        format!("Torus({}, {}x{}, eta={})", self.spec.kind.name(), self.fg.n1, self.fg.n2, self.policy.name())
    }
}

#[pymodule]
fn cwtori_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Torus>()?;
    Ok(())
}
