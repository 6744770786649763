//! Command-line front end: JSON run configuration, subcommand dispatch and
//! the CSV / PPM / sidecar output formats.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::diagnostics::{boundary_integral_field, constraint_report, default_n_range, nearfar_coeffs};
use crate::error::Error;
use crate::field::{cloak_metrics, device_displacement, total_grid, FieldGrid, GridBounds, Region};
use crate::geometry::{in_cloak, symmetric_config, CloakConfig, SourceArc};
use crate::incident::{incident_displacement, IncidentField, RegularCoeffs};
use crate::medium::{material_from_speeds, wavenumbers_for, FrequencySelector, Material, WaveNumbers};
use crate::sources::{amplitudes, quadrature_amplitudes, SourceAmplitudes};
use crate::specfun::{graf_sum, wavefun, PlaneVector, Sign, WaveKind};

/// Closed form versus quadrature, relative to the largest amplitude.
pub const AMPLITUDE_ORACLE_TOL: f64 = 1e-8;
/// Graf translation, absolute for values up to 1 and relative above.
pub const GRAF_TOL: f64 = 1e-9;
/// `|u_d + u_i|` inside the cloak from the boundary integral, absolute.
pub const ANNIHILATION_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "elastocloak", version, about = "Active cloaking of in-plane elastic waves")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the source amplitude table.
    Amplitudes(CommonArgs),
    /// Write near/far-field constraint residuals.
    Coeffs(CommonArgs),
    /// Write the total displacement on a grid.
    Field(CommonArgs),
    /// Run the oracle cross-checks.
    Validate(CommonArgs),
    /// Cloaking metrics over a range of truncation orders and source counts.
    Sweep(CommonArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dot-path override, e.g. `truncation.N=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{code}: {message}")]
    Config { code: &'static str, message: String },
    #[error("NUMERICAL: {0}")]
    Numerical(Error),
    #[error("ORACLE_MISMATCH: {0}")]
    Oracle(String),
    #[error("IO: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Oracle(_) => 4,
            CliError::Io(_) => 1,
        }
    }

    fn config(code: &'static str, message: impl Into<String>) -> Self {
        CliError::Config { code, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidMaterial(m) => CliError::config("CONFIG_MATERIAL", m),
            Error::InvalidGeometry(m) | Error::UnsupportedGeometry(m) => CliError::config("CONFIG_GEOMETRY", m),
            Error::InvalidTruncation(m) => CliError::config("CONFIG_TRUNCATION", m),
            Error::InsufficientCoverage(m) => CliError::config("CONFIG_GRID", m),
            other => CliError::Numerical(other),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

// ---------------------------------------------------------------------------
// configuration

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub c_p: Option<f64>,
    pub c_s: Option<f64>,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FrequencySpec {
    pub omega: Option<f64>,
    pub k_p: Option<f64>,
    pub k_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcSpec {
    pub center: [f64; 2],
    pub radius: f64,
    pub theta1_deg: f64,
    pub theta2_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    #[serde(rename = "M")]
    pub count: Option<usize>,
    pub b: Option<f64>,
    pub a: Option<f64>,
    pub arcs: Option<Vec<ArcSpec>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IncidenceKind {
    P,
    S,
    #[serde(rename = "combined")]
    Combined,
    #[serde(rename = "general")]
    General,
}

/// Real amplitude or `[re, im]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AmplitudeSpec {
    Real(f64),
    Complex([f64; 2]),
}

impl AmplitudeSpec {
    fn value(self) -> Complex64 {
        match self {
            AmplitudeSpec::Real(r) => Complex64::new(r, 0.0),
            AmplitudeSpec::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncidenceSpec {
    #[serde(rename = "type")]
    pub kind: IncidenceKind,
    /// One entry for P or S, `[p, s]` for combined.
    #[serde(default)]
    pub amplitudes: Vec<AmplitudeSpec>,
    #[serde(default)]
    pub angles_deg: Vec<f64>,
    /// CSV `n,re_Ap,im_Ap,re_As,im_As`, relative to the config file.
    pub coeff_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationSpec {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "Q")]
    pub q: Option<usize>,
    pub n_range: Option<[i32; 2]>,
}

impl Default for TruncationSpec {
    fn default() -> Self {
        Self { n: 30, q: None, n_range: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridUnits {
    #[serde(rename = "m")]
    Meters,
    /// Bounds given as `k_p x`.
    #[serde(rename = "kp")]
    InverseKp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// `[x_min, x_max, y_min, y_max]`
    pub bounds: [f64; 4],
    pub nx: usize,
    pub ny: usize,
    pub units: GridUnits,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { bounds: [-2.0, 2.0, -2.0, 2.0], nx: 200, ny: 200, units: GridUnits::Meters }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeatmapComponent {
    #[serde(rename = "ux")]
    Ux,
    #[serde(rename = "uy")]
    Uy,
    #[serde(rename = "magnitude")]
    Magnitude,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// Artifact name (`amplitudes`, `coeffs`, `field`, `heatmap`, `sweep`,
    /// `validate`) to file name.
    #[serde(default)]
    pub paths: BTreeMap<String, String>,
    /// Any of `csv`, `ppm`.
    pub formats: Vec<String>,
    pub component: HeatmapComponent,
    pub clamp_percentile: f64,
    /// Fixed upper end of the colour scale; overrides the percentile.
    pub clamp: Option<f64>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            paths: BTreeMap::new(),
            formats: vec!["csv".into(), "ppm".into()],
            component: HeatmapComponent::Ux,
            clamp_percentile: 99.0,
            clamp: None,
        }
    }
}

impl OutputSpec {
    fn path(&self, kind: &str, default: &str) -> String {
        self.paths.get(kind).cloned().unwrap_or_else(|| default.to_string())
    }

    fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Truncation orders; `[5, 10, 20, 50]` when empty.
    #[serde(rename = "N", default)]
    pub orders: Vec<usize>,
    /// Source counts for symmetric layouts; the configured `M` when empty.
    #[serde(rename = "M", default)]
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub material: MaterialSpec,
    #[serde(default)]
    pub frequency: FrequencySpec,
    pub geometry: GeometrySpec,
    pub incidence: IncidenceSpec,
    #[serde(default)]
    pub truncation: TruncationSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
}

/// Aluminium, `k_p = 2`, three tangent sources on the unit circle, unit
/// P wave at 7 degrees, `N = 30`.
pub fn default_config_json() -> Value {
    serde_json::json!({
        "material": {"c_p": 6427.0, "c_s": 3112.0, "rho": 2694.0},
        "frequency": {"k_p": 2.0},
        "geometry": {"M": 3, "b": 1.0},
        "incidence": {"type": "P", "amplitudes": [1.0], "angles_deg": [7.0]},
        "truncation": {"N": 30},
        "grid": {"bounds": [-2.0, 2.0, -2.0, 2.0], "nx": 200, "ny": 200, "units": "m"},
        "outputs": {"formats": ["csv", "ppm"], "component": "ux", "clamp_percentile": 99.0}
    })
}

/// Apply `a.b.c=value`; the value is parsed as JSON and falls back to a string.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::config("CONFIG_OVERRIDE", format!("expected KEY=VALUE, got '{assignment}'")))?;
    if key.is_empty() {
        return Err(CliError::config("CONFIG_OVERRIDE", "empty override key"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = match node {
            Value::Object(map) => map,
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut().expect("just created")
            }
            _ => {
                return Err(CliError::config("CONFIG_OVERRIDE", format!("'{key}' descends into a non-object")));
            }
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("split yields at least one part")
}

/// Configuration after overrides, plus the directory relative paths resolve against.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<(RunConfig, PathBuf), CliError> {
    let (mut value, base) = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::config("CONFIG_PARSE", format!("{}: {e}", p.display())))?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::config("CONFIG_PARSE", format!("{}: {e}", p.display())))?;
            (v, p.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => (default_config_json(), PathBuf::from(".")),
    };
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let cfg: RunConfig = serde_json::from_value(value).map_err(|e| CliError::config("CONFIG_PARSE", e.to_string()))?;
    Ok((cfg, base))
}

/// Validated run parameters.
#[derive(Debug, Clone)]
pub struct Problem {
    pub material: Material,
    pub wn: WaveNumbers,
    pub config: CloakConfig,
    pub field: IncidentField,
    pub l_max: usize,
    pub q_max: Option<usize>,
}

impl RunConfig {
    pub fn material(&self) -> Result<Material, CliError> {
        let m = &self.material;
        let rho = m.rho.ok_or_else(|| CliError::config("CONFIG_MATERIAL", "rho is required"))?;
        let material = match (m.c_p, m.c_s, m.lambda, m.mu) {
            (Some(cp), Some(cs), None, None) => material_from_speeds(cp, cs, rho)?,
            (None, None, Some(l), Some(mu)) => Material::from_lame(l, mu, rho)?,
            _ => {
                return Err(CliError::config(
                    "CONFIG_MATERIAL",
                    "give exactly one of {c_p, c_s} or {lambda, mu} together with rho",
                ))
            }
        };
        Ok(material)
    }

    pub fn wavenumbers(&self, material: &Material) -> Result<WaveNumbers, CliError> {
        let f = &self.frequency;
        let set: Vec<(FrequencySelector, f64)> = [
            (FrequencySelector::Omega, f.omega),
            (FrequencySelector::KP, f.k_p),
            (FrequencySelector::KS, f.k_s),
        ]
        .into_iter()
        .filter_map(|(s, v)| v.map(|v| (s, v)))
        .collect();
        match set.as_slice() {
            [(sel, v)] => wavenumbers_for(material, *sel, *v)
                .map_err(|e| CliError::config("CONFIG_FREQUENCY", e.to_string())),
            [] => Err(CliError::config("CONFIG_FREQUENCY", "one of omega, k_p, k_s is required")),
            _ => Err(CliError::config("CONFIG_FREQUENCY", "give exactly one of omega, k_p, k_s")),
        }
    }

    pub fn cloak_config(&self) -> Result<CloakConfig, CliError> {
        self.cloak_config_with(None)
    }

    /// Geometry, optionally replacing the symmetric source count.
    pub fn cloak_config_with(&self, count: Option<usize>) -> Result<CloakConfig, CliError> {
        let g = &self.geometry;
        match (&g.arcs, g.count) {
            (Some(arcs), None) if count.is_none() && g.b.is_none() && g.a.is_none() => {
                let arcs = arcs
                    .iter()
                    .map(|a| {
                        SourceArc::new(
                            PlaneVector::new(a.center[0], a.center[1]),
                            a.radius,
                            a.theta1_deg.to_radians(),
                            a.theta2_deg.to_radians(),
                        )
                    })
                    .collect::<crate::Result<Vec<_>>>()?;
                Ok(CloakConfig::from_arcs(arcs)?)
            }
            (Some(_), None) => Err(CliError::config(
                "CONFIG_GEOMETRY",
                "explicit arcs cannot be combined with b, a or a source-count sweep",
            )),
            (None, Some(m)) => {
                let b = g.b.unwrap_or(1.0);
                Ok(symmetric_config(count.unwrap_or(m), b, g.a)?)
            }
            _ => Err(CliError::config("CONFIG_GEOMETRY", "give exactly one of M (with b, a) or arcs")),
        }
    }

    pub fn incident_field(&self, base: &Path) -> Result<IncidentField, CliError> {
        let inc = &self.incidence;
        let bad = |m: &str| CliError::config("CONFIG_INCIDENCE", m.to_string());
        let field = match inc.kind {
            IncidenceKind::P | IncidenceKind::S => {
                let (amp, angle) = match (inc.amplitudes.as_slice(), inc.angles_deg.as_slice()) {
                    ([a], [t]) => (a.value(), t.to_radians()),
                    ([a], []) => (a.value(), 0.0),
                    _ => return Err(bad("P and S incidence take one amplitude and one angle")),
                };
                if inc.kind == IncidenceKind::P {
                    IncidentField::PlaneP { amplitude: amp, angle }
                } else {
                    IncidentField::PlaneS { amplitude: amp, angle }
                }
            }
            IncidenceKind::Combined => match (inc.amplitudes.as_slice(), inc.angles_deg.as_slice()) {
                ([ap, as_], [tp, ts]) => IncidentField::Combined {
                    p_amplitude: ap.value(),
                    p_angle: tp.to_radians(),
                    s_amplitude: as_.value(),
                    s_angle: ts.to_radians(),
                },
                _ => return Err(bad("combined incidence takes amplitudes [p, s] and angles_deg [p, s]")),
            },
            IncidenceKind::General => {
                let file = inc.coeff_file.as_ref().ok_or_else(|| bad("general incidence needs coeff_file"))?;
                let path = if file.is_absolute() { file.clone() } else { base.join(file) };
                let text = fs::read_to_string(&path)
                    .map_err(|e| CliError::config("CONFIG_INCIDENCE", format!("{}: {e}", path.display())))?;
                IncidentField::General(parse_regular_coeffs(&text)?)
            }
        };
        field.validate().map_err(|e| CliError::config("CONFIG_INCIDENCE", e.to_string()))?;
        Ok(field)
    }

    pub fn problem(&self, base: &Path) -> Result<Problem, CliError> {
        let material = self.material()?;
        let wn = self.wavenumbers(&material)?;
        let config = self.cloak_config()?;
        let field = self.incident_field(base)?;
        if let Some(q) = self.truncation.q {
            if q < self.truncation.n {
                return Err(CliError::config("CONFIG_TRUNCATION", format!("Q = {q} is below N = {}", self.truncation.n)));
            }
        }
        Ok(Problem { material, wn, config, field, l_max: self.truncation.n, q_max: self.truncation.q })
    }

    pub fn grid_bounds(&self, wn: &WaveNumbers) -> Result<GridBounds, CliError> {
        let [x0, x1, y0, y1] = self.grid.bounds;
        let scale = match self.grid.units {
            GridUnits::Meters => 1.0,
            GridUnits::InverseKp => 1.0 / wn.k_p,
        };
        if !(x0 < x1 && y0 < y1) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(CliError::config("CONFIG_GRID", "bounds must be finite with min < max"));
        }
        if self.grid.nx < 2 || self.grid.ny < 2 {
            return Err(CliError::config("CONFIG_GRID", "nx and ny must be at least 2"));
        }
        Ok(GridBounds { x_min: x0 * scale, x_max: x1 * scale, y_min: y0 * scale, y_max: y1 * scale })
    }
}

/// Rows `n,re_Ap,im_Ap,re_As,im_As`; `#` lines are comments.
pub fn parse_regular_coeffs(text: &str) -> Result<RegularCoeffs, CliError> {
    let bad = |m: String| CliError::config("CONFIG_INCIDENCE", m);
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('n') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 5 {
            return Err(bad(format!("coefficient line {}: expected 5 columns", lineno + 1)));
        }
        let n: i32 = cols[0].parse().map_err(|_| bad(format!("coefficient line {}: bad order", lineno + 1)))?;
        let mut v = [0.0; 4];
        for (slot, c) in v.iter_mut().zip(&cols[1..]) {
            *slot = c.parse().map_err(|_| bad(format!("coefficient line {}: bad number '{c}'", lineno + 1)))?;
        }
        rows.push((n, Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3])));
    }
    if rows.is_empty() {
        return Err(bad("coefficient file has no rows".into()));
    }
    let n_max = rows.iter().map(|r| r.0.unsigned_abs() as usize).max().unwrap_or(0);
    let mut coeffs = RegularCoeffs::zeros(n_max);
    for (n, p, s) in rows {
        coeffs.set_p(n, p).and_then(|_| coeffs.set_s(n, s)).map_err(|e| bad(e.to_string()))?;
    }
    Ok(coeffs)
}

// ---------------------------------------------------------------------------
// output formats

/// Shortest round-trip decimal.
fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn amplitudes_csv(amps: &SourceAmplitudes) -> String {
    let mut s = String::from("#schema: m,l,re_Bp,im_Bp,re_Bs,im_Bs\nm,l,re_Bp,im_Bp,re_Bs,im_Bs\n");
    for (m, l, p, q) in amps.rows() {
        let _ = writeln!(s, "{},{l},{},{},{},{}", m + 1, num(p.re), num(p.im), num(q.re), num(q.im));
    }
    s
}

pub fn coeffs_csv(diag: &crate::diagnostics::CoefficientDiagnostics) -> String {
    let report = constraint_report(diag);
    let mut s = String::from("#schema: n,res_near_p,res_near_s,res_far_p,res_far_s\nn,res_near_p,res_near_s,res_far_p,res_far_s\n");
    for r in &report.rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.n, num(r.res_near_p), num(r.res_near_s), num(r.res_far_p), num(r.res_far_s));
    }
    s
}

pub fn grid_csv(grid: &FieldGrid) -> String {
    let mut s = String::from("#schema: x,y,mask,re_ux,im_ux,re_uy,im_uy\nx,y,mask,re_ux,im_ux,re_uy,im_uy\n");
    let d = grid.normalization;
    for idx in 0..grid.len() {
        let x = grid.point(idx);
        let (ux, uy) = (grid.u_x[idx] / d, grid.u_y[idx] / d);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            num(x.x),
            num(x.y),
            grid.mask[idx].label(),
            num(ux.re),
            num(ux.im),
            num(uy.re),
            num(uy.im)
        );
    }
    s
}

/// Nearest-rank percentile of the finite values (`0` if there are none).
pub fn percentile(values: &[f64], pct: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let rank = ((pct / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    v[rank.min(v.len()) - 1]
}

/// Colour-scale upper end: the percentile of `values` over points outside
/// the device disks (all points when every point is inside one).
pub fn heatmap_clamp(grid: &FieldGrid, values: &[f64], pct: f64) -> f64 {
    let outside: Vec<f64> = values
        .iter()
        .zip(&grid.mask)
        .filter(|(_, r)| !matches!(r, Region::Device(_)))
        .map(|(v, _)| *v)
        .collect();
    if outside.is_empty() {
        percentile(values, pct)
    } else {
        percentile(&outside, pct)
    }
}

/// Normalized magnitude of the chosen component at every grid point.
pub fn heatmap_values(grid: &FieldGrid, component: HeatmapComponent) -> Vec<f64> {
    let d = grid.normalization;
    match component {
        HeatmapComponent::Ux => grid.u_x.iter().map(|u| u.norm() / d).collect(),
        HeatmapComponent::Uy => grid.u_y.iter().map(|u| u.norm() / d).collect(),
        HeatmapComponent::Magnitude => grid.magnitudes(),
    }
}

/// Binary greyscale P6 image, top row at `y_max`, linear over `[0, clamp]`.
pub fn heatmap_ppm(grid: &FieldGrid, values: &[f64], clamp: f64) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", grid.nx, grid.ny).into_bytes();
    for j in (0..grid.ny).rev() {
        for i in 0..grid.nx {
            let v = values[j * grid.nx + i];
            let t = if v.is_nan() || clamp <= 0.0 { 1.0 } else { (v / clamp).clamp(0.0, 1.0) };
            let level = (t * 255.0).round() as u8;
            out.extend_from_slice(&[level, level, level]);
        }
    }
    out
}

/// Write via a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    artifacts: Vec<String>,
    config: &'a RunConfig,
    summary: Value,
}

struct Run<'a> {
    out: PathBuf,
    quiet: bool,
    subcommand: &'a str,
    cfg: &'a RunConfig,
    artifacts: Vec<String>,
    /// Sidecar summary for a run that ends in an oracle failure.
    failed_summary: Option<Value>,
}

impl Run<'_> {
    fn emit(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(&self.out.join(name), bytes)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn say(&self, line: &str) {
        if !self.quiet {
            println!("{line}");
        }
    }

    fn finish(self, summary: Value) -> Result<(), CliError> {
        let meta = Sidecar {
            tool: "elastocloak",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: self.subcommand,
            artifacts: self.artifacts.clone(),
            config: self.cfg,
            summary,
        };
        let mut text = serde_json::to_string_pretty(&meta).expect("sidecar serializes");
        text.push('\n');
        write_atomic(&self.out.join(format!("{}.meta.json", self.subcommand)), text.as_bytes())
    }
}

// ---------------------------------------------------------------------------
// subcommands

fn compute_amplitudes(p: &Problem) -> Result<SourceAmplitudes, CliError> {
    Ok(amplitudes(&p.config, &p.material, &p.wn, &p.field, p.l_max, p.q_max)?)
}

fn n_range_of(cfg: &RunConfig, p: &Problem) -> Result<std::ops::RangeInclusive<i32>, CliError> {
    match cfg.truncation.n_range {
        Some([lo, hi]) if lo <= hi => Ok(lo..=hi),
        Some(_) => Err(CliError::config("CONFIG_TRUNCATION", "n_range must be [lo, hi] with lo <= hi")),
        None => Ok(default_n_range(&p.config, &p.wn)),
    }
}

fn cmd_amplitudes(run: &mut Run, p: &Problem) -> Result<Value, CliError> {
    let amps = compute_amplitudes(p)?;
    let name = run.cfg.outputs.path("amplitudes", "amplitudes.csv");
    run.emit(&name, amplitudes_csv(&amps).as_bytes())?;
    run.say(&format!("wrote {} ({} devices, |l| <= {})", name, amps.devices(), amps.l_max()));
    Ok(serde_json::json!({"devices": amps.devices(), "l_max": amps.l_max()}))
}

fn cmd_coeffs(run: &mut Run, p: &Problem) -> Result<Value, CliError> {
    let amps = compute_amplitudes(p)?;
    let diag = nearfar_coeffs(&amps, &p.config, &p.wn, &p.field, n_range_of(run.cfg, p)?)?;
    let rep = constraint_report(&diag);
    let name = run.cfg.outputs.path("coeffs", "coeffs.csv");
    run.emit(&name, coeffs_csv(&diag).as_bytes())?;
    run.say(&format!(
        "wrote {name}: max res_near_p {:e}, res_near_s {:e}, res_far_p {:e}, res_far_s {:e}",
        rep.max_near_p, rep.max_near_s, rep.max_far_p, rep.max_far_s
    ));
    Ok(serde_json::json!({
        "n_range": [diag.n_range.start(), diag.n_range.end()],
        "max_res_near_p": rep.max_near_p,
        "max_res_near_s": rep.max_near_s,
        "max_res_far_p": rep.max_far_p,
        "max_res_far_s": rep.max_far_s,
    }))
}

fn cmd_field(run: &mut Run, p: &Problem) -> Result<Value, CliError> {
    let amps = compute_amplitudes(p)?;
    let bounds = run.cfg.grid_bounds(&p.wn)?;
    let grid = total_grid(&p.field, &amps, &p.config, &p.wn, bounds, (run.cfg.grid.nx, run.cfg.grid.ny))?;
    let outputs = run.cfg.outputs.clone();
    if outputs.wants("csv") {
        let name = outputs.path("field", "field.csv");
        run.emit(&name, grid_csv(&grid).as_bytes())?;
        run.say(&format!("wrote {name} ({}x{})", grid.nx, grid.ny));
    }
    let values = heatmap_values(&grid, outputs.component);
    let clamp = outputs.clamp.unwrap_or_else(|| heatmap_clamp(&grid, &values, outputs.clamp_percentile));
    if outputs.wants("ppm") {
        let name = outputs.path("heatmap", "field.ppm");
        run.emit(&name, &heatmap_ppm(&grid, &values, clamp))?;
        run.say(&format!("wrote {name} (clamp {clamp:e})"));
    }
    let metrics = match cloak_metrics(&grid) {
        Ok(m) => {
            run.say(&format!(
                "cloak max {:e}, cloak rms {:e}, exterior deviation {:e}",
                m.cloak_max, m.cloak_rms, m.exterior_rel_dev
            ));
            serde_json::to_value(m).expect("metrics serialize")
        }
        Err(e) => Value::String(e.to_string()),
    };
    Ok(serde_json::json!({"clamp": clamp, "metrics": metrics}))
}

/// One oracle comparison.
#[derive(Debug, Clone, Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub error: f64,
    /// `None` for informational rows.
    pub tolerance: Option<f64>,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.tolerance.map_or(true, |t| self.error <= t)
    }
}

/// Points on a small circle about the origin that lie in the cloak.
fn interior_points(config: &CloakConfig, count: usize) -> Vec<PlaneVector> {
    let clearance = config.arcs.iter().map(|a| a.center.norm() - a.radius).fold(f64::MAX, f64::min);
    let r = 0.5 * clearance;
    (0..count)
        .map(|j| PlaneVector::from_polar(r * (0.25 + 0.75 * j as f64 / count as f64), 2.399963229728653 * j as f64))
        .filter(|x| in_cloak(config, *x).unwrap_or(true))
        .collect()
}

pub fn oracle_checks(p: &Problem) -> Result<Vec<OracleCheck>, CliError> {
    let mut checks = Vec::new();
    let amps = compute_amplitudes(p)?;
    // closed form against quadrature on every device
    let l_lim = p.l_max.min(10) as i32;
    let mut worst: f64 = 0.0;
    let scale = amps.rows().map(|(_, _, a, b)| a.norm().max(b.norm())).fold(0.0, f64::max);
    for m in 0..p.config.len() {
        for l in -l_lim..=l_lim {
            let (qp, qs) = quadrature_amplitudes(&p.config, &p.material, &p.wn, &p.field, l, m)?;
            let err = (qp - amps.p(m, l)).norm().max((qs - amps.s(m, l)).norm());
            worst = worst.max(if scale > 0.0 { err / scale } else { err });
        }
    }
    checks.push(OracleCheck { name: "amplitudes_vs_quadrature".into(), error: worst, tolerance: Some(AMPLITUDE_ORACLE_TOL) });

    // Graf translation on a fixed sample set; the truncated series
    // converges like (min / max radius)^40, so radii stay at ratio <= 0.3
    let mut graf: f64 = 0.0;
    for (i, l) in (-4..=4).enumerate() {
        let t = i as f64;
        let big = 2.0 + 0.5 * t;
        let y = PlaneVector::from_polar(if i % 2 == 0 { big } else { 0.3 * big }, 0.7 * t);
        let x = PlaneVector::from_polar(if i % 2 == 0 { 0.3 * big } else { big }, 2.1 + 0.9 * t);
        let want = wavefun(WaveKind::V, Sign::Plus, l, y - x)?;
        graf = graf.max((graf_sum(l, y, x, 40)? - want).norm() / want.norm().max(1.0));
    }
    checks.push(OracleCheck { name: "graf_translation".into(), error: graf, tolerance: Some(GRAF_TOL) });

    // boundary integral cancels the incident field inside the cloak, and is
    // compared with the truncated multipole field
    let pts = if p.config.symmetric.map_or(false, |s| s.is_tangent()) {
        interior_points(&p.config, 20)
    } else {
        vec![PlaneVector::ZERO]
    };
    let (mut cancel, mut cross): (f64, f64) = (0.0, 0.0);
    for x in pts {
        let bi = boundary_integral_field(&p.field, &p.config, &p.material, &p.wn, x)?;
        let ui = incident_displacement(&p.field, &p.wn, x)?;
        let md = device_displacement(&amps, &p.config, &p.wn, x)?;
        cancel = cancel.max(((bi[0] + ui[0]).norm_sqr() + (bi[1] + ui[1]).norm_sqr()).sqrt());
        let norm = (bi[0].norm_sqr() + bi[1].norm_sqr()).sqrt();
        let diff = ((md[0] - bi[0]).norm_sqr() + (md[1] - bi[1]).norm_sqr()).sqrt();
        cross = cross.max(if norm > 0.0 { diff / norm } else { diff });
    }
    checks.push(OracleCheck { name: "boundary_integral_cancels_incident".into(), error: cancel, tolerance: Some(ANNIHILATION_TOL) });
    // governed by the multipole truncation, reported only
    checks.push(OracleCheck { name: "multipole_vs_boundary_integral".into(), error: cross, tolerance: None });
    Ok(checks)
}

fn cmd_validate(run: &mut Run, p: &Problem) -> Result<Value, CliError> {
    let checks = oracle_checks(p)?;
    let mut csv = String::from("#schema: check,error,tolerance,status\ncheck,error,tolerance,status\n");
    for c in &checks {
        let (tol, status) = match c.tolerance {
            Some(t) => (num(t), if c.passed() { "pass" } else { "fail" }),
            None => (String::new(), "info"),
        };
        let _ = writeln!(csv, "{},{},{tol},{status}", c.name, num(c.error));
        run.say(&format!("{status:>4} {} error {:e}", c.name, c.error));
    }
    let name = run.cfg.outputs.path("validate", "validate.csv");
    run.emit(&name, csv.as_bytes())?;
    let summary = serde_json::to_value(&checks).expect("checks serialize");
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
    if !failed.is_empty() {
        run.failed_summary = Some(summary);
        return Err(CliError::Oracle(format!("{} exceeded tolerance", failed.join(", "))));
    }
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub count: usize,
    pub order: usize,
    pub cloak_max: f64,
    pub cloak_rms: f64,
    pub exterior_rel_dev: f64,
    pub device_max: f64,
    pub max_res_near_p: f64,
    pub max_res_near_s: f64,
    pub max_res_far_p: f64,
    pub max_res_far_s: f64,
}

pub fn sweep_rows(cfg: &RunConfig, p: &Problem) -> Result<Vec<SweepRow>, CliError> {
    let orders = if cfg.sweep.orders.is_empty() { vec![5, 10, 20, 50] } else { cfg.sweep.orders.clone() };
    let counts: Vec<Option<usize>> =
        if cfg.sweep.counts.is_empty() { vec![None] } else { cfg.sweep.counts.iter().map(|&m| Some(m)).collect() };
    let bounds = cfg.grid_bounds(&p.wn)?;
    let mut rows = Vec::new();
    for count in counts {
        let config = cfg.cloak_config_with(count)?;
        let n_range = match cfg.truncation.n_range {
            Some([lo, hi]) => lo..=hi,
            None => default_n_range(&config, &p.wn),
        };
        for &order in &orders {
            let amps = amplitudes(&config, &p.material, &p.wn, &p.field, order, p.q_max.filter(|&q| q >= order))?;
            let grid = total_grid(&p.field, &amps, &config, &p.wn, bounds, (cfg.grid.nx, cfg.grid.ny))?;
            let m = cloak_metrics(&grid)?;
            let rep = constraint_report(&nearfar_coeffs(&amps, &config, &p.wn, &p.field, n_range.clone())?);
            rows.push(SweepRow {
                count: config.len(),
                order,
                cloak_max: m.cloak_max,
                cloak_rms: m.cloak_rms,
                exterior_rel_dev: m.exterior_rel_dev,
                device_max: m.device_max,
                max_res_near_p: rep.max_near_p,
                max_res_near_s: rep.max_near_s,
                max_res_far_p: rep.max_far_p,
                max_res_far_s: rep.max_far_s,
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let header = "M,N,cloak_max,cloak_rms,exterior_rel_dev,device_max,max_res_near_p,max_res_near_s,max_res_far_p,max_res_far_s";
    let mut s = format!("#schema: {header}\n{header}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.count,
            r.order,
            num(r.cloak_max),
            num(r.cloak_rms),
            num(r.exterior_rel_dev),
            num(r.device_max),
            num(r.max_res_near_p),
            num(r.max_res_near_s),
            num(r.max_res_far_p),
            num(r.max_res_far_s)
        );
    }
    s
}

fn cmd_sweep(run: &mut Run, p: &Problem) -> Result<Value, CliError> {
    let rows = sweep_rows(run.cfg, p)?;
    let name = run.cfg.outputs.path("sweep", "sweep.csv");
    run.emit(&name, sweep_csv(&rows).as_bytes())?;
    for r in &rows {
        run.say(&format!("M={} N={} cloak_max {:e} exterior_rel_dev {:e}", r.count, r.order, r.cloak_max, r.exterior_rel_dev));
    }
    Ok(serde_json::to_value(&rows).expect("rows serialize"))
}

/// Run one parsed command; errors carry their exit code.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let (name, args) = match &cli.command {
        Command::Amplitudes(a) => ("amplitudes", a),
        Command::Coeffs(a) => ("coeffs", a),
        Command::Field(a) => ("field", a),
        Command::Validate(a) => ("validate", a),
        Command::Sweep(a) => ("sweep", a),
    };
    let (cfg, base) = load_config(args.config.as_deref(), &args.overrides)?;
    let problem = cfg.problem(&base)?;
    let mut run = Run { out: args.out.clone(), quiet: args.quiet, subcommand: name, cfg: &cfg, artifacts: Vec::new(), failed_summary: None };
    let result = match &cli.command {
        Command::Amplitudes(_) => cmd_amplitudes(&mut run, &problem),
        Command::Coeffs(_) => cmd_coeffs(&mut run, &problem),
        Command::Field(_) => cmd_field(&mut run, &problem),
        Command::Validate(_) => cmd_validate(&mut run, &problem),
        Command::Sweep(_) => cmd_sweep(&mut run, &problem),
    };
    match result {
        Ok(summary) => run.finish(summary),
        Err(e) => {
            if let Some(summary) = run.failed_summary.take() {
                run.finish(summary)?;
            }
            Err(e)
        }
    }
}

/// Parse `args`, run, print a one-line error on failure and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_follow_dot_paths() {
        let mut v = default_config_json();
        apply_override(&mut v, "truncation.N=50").unwrap();
        apply_override(&mut v, "geometry.M=8").unwrap();
        apply_override(&mut v, "outputs.component=uy").unwrap();
        apply_override(&mut v, "sweep.N=[5,10]").unwrap();
        let cfg: RunConfig = serde_json::from_value(v.clone()).unwrap();
        assert_eq!(cfg.truncation.n, 50);
        assert_eq!(cfg.geometry.count, Some(8));
        assert_eq!(cfg.outputs.component, HeatmapComponent::Uy);
        assert_eq!(cfg.sweep.orders, vec![5, 10]);
        assert!(apply_override(&mut v, "noequals").is_err());
        assert!(apply_override(&mut v, "truncation.N.x=1").is_err());
    }

    #[test]
    fn frequency_selector_must_be_unique() {
        let mut v = default_config_json();
        v["frequency"] = serde_json::json!({});
        let cfg: RunConfig = serde_json::from_value(v.clone()).unwrap();
        let err = cfg.problem(Path::new(".")).unwrap_err();
        assert!(matches!(err, CliError::Config { code: "CONFIG_FREQUENCY", .. }));
        assert_eq!(err.exit_code(), 2);
        v["frequency"] = serde_json::json!({"k_p": 2.0, "omega": 3.0});
        let cfg: RunConfig = serde_json::from_value(v).unwrap();
        assert!(matches!(cfg.problem(Path::new(".")), Err(CliError::Config { code: "CONFIG_FREQUENCY", .. })));
    }

    #[test]
    fn angles_are_degrees() {
        let cfg: RunConfig = serde_json::from_value(default_config_json()).unwrap();
        let p = cfg.problem(Path::new(".")).unwrap();
        match p.field {
            IncidentField::PlaneP { angle, .. } => assert!((angle - 7f64.to_radians()).abs() < 1e-15),
            _ => panic!("expected plane P"),
        }
    }

    #[test]
    fn explicit_arcs_and_geometry_errors() {
        let mut v = default_config_json();
        v["geometry"] = serde_json::json!({"arcs": [
            {"center": [1.0, 0.0], "radius": 0.5, "theta1_deg": 150.0, "theta2_deg": 210.0},
            {"center": [-1.0, 0.0], "radius": 0.5, "theta1_deg": -30.0, "theta2_deg": 30.0}
        ]});
        let cfg: RunConfig = serde_json::from_value(v.clone()).unwrap();
        let c = cfg.cloak_config().unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.symmetric.is_none());
        v["geometry"] = serde_json::json!({"M": 4, "b": 1.0, "a": 0.1});
        let cfg: RunConfig = serde_json::from_value(v).unwrap();
        assert!(matches!(cfg.cloak_config(), Err(CliError::Config { code: "CONFIG_GEOMETRY", .. })));
    }

    #[test]
    fn coefficient_file_parsing() {
        let c = parse_regular_coeffs("#schema: n,re_Ap,im_Ap,re_As,im_As\n0,1.0,0.0,0,0\n-2,0.5,0.25,0,1\n").unwrap();
        assert_eq!(c.n_max(), 2);
        assert_eq!(c.p(-2), Complex64::new(0.5, 0.25));
        assert_eq!(c.s(-2), Complex64::new(0.0, 1.0));
        assert!(parse_regular_coeffs("0,1,2\n").is_err());
        assert!(parse_regular_coeffs("").is_err());
    }

    #[test]
    fn csv_headers_and_float_format() {
        let mut amps = SourceAmplitudes::zeros(1, 1);
        amps.set(0, -1, Complex64::new(0.1, -2.5e-17), Complex64::new(1.0, 0.0));
        let csv = amplitudes_csv(&amps);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("#schema: m,l,re_Bp,im_Bp,re_Bs,im_Bs"));
        assert_eq!(lines.next(), Some("m,l,re_Bp,im_Bp,re_Bs,im_Bs"));
        assert_eq!(lines.next(), Some("1,-1,0.1,-2.5e-17,1.0,0.0"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 99.0), 99.0);
        assert_eq!(percentile(&v, 100.0), 100.0);
        assert_eq!(percentile(&[f64::INFINITY, 2.0, f64::NAN], 50.0), 2.0);
        assert_eq!(percentile(&[], 99.0), 0.0);
    }

    #[test]
    fn ppm_layout() {
        let grid = FieldGrid {
            bounds: GridBounds::square(1.0),
            nx: 2,
            ny: 2,
            u_x: vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0), Complex64::new(4.0, 0.0)],
            u_y: vec![Complex64::new(0.0, 0.0); 4],
            incident_x: vec![Complex64::new(0.0, 0.0); 4],
            incident_y: vec![Complex64::new(0.0, 0.0); 4],
            mask: vec![Region::Exterior; 4],
            normalization: 1.0,
        };
        let vals = heatmap_values(&grid, HeatmapComponent::Ux);
        let img = heatmap_ppm(&grid, &vals, 2.0);
        let header = b"P6\n2 2\n255\n";
        assert_eq!(&img[..header.len()], header);
        let px = &img[header.len()..];
        // top row is y_max: values 2 and 4 (clamped)
        assert_eq!(&px[..6], &[255, 255, 255, 255, 255, 255]);
        assert_eq!(&px[6..], &[0, 0, 0, 128, 128, 128]);
    }
}
