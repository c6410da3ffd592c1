//! The declarative run configuration (TOML) and its validation.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use omega_srf::domain_grid::{shape, Axis, FdAccuracy, Field, Grid, GridSpec, PolarizationField};
use omega_srf::identity_verifier::SuiteConfig;
use omega_srf::srf_flow::{Form, IntegratorConfig};
use omega_srf::testbeds::{self, Modes, GAUSSIAN_HALF_WIDTH};

use omega_srf::w_functional::ConvexKind;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestbedKind {
    Gaussian1d,
    GaussianNd,
    TorusNd,
    CircleWeighted,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestbedConfig {
    pub kind: TestbedKind,
    #[serde(default = "one")]
    pub dim: usize,
    pub n: usize,
    #[serde(default = "second")]
    pub accuracy: FdAccuracy,
    /// Random Fourier modes in `log ω` on `torus_nd`; 0 gives the flat measure.
    #[serde(default)]
    pub omega_modes: usize,
    #[serde(default)]
    pub omega_amp: f64,
}

fn one() -> usize {
    1
}

fn second() -> FdAccuracy {
    FdAccuracy::Second
}

/// One term `amp · sin(k·x + phase)` of a symmetric field, placed on the
/// entries `(i, j)` and `(j, i)`, or on the identity when `entry` is absent.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisTerm {
    pub amp: f64,
    pub k: Vec<f64>,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub entry: Option<[usize; 2]>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default)]
    pub terms: Vec<BasisTerm>,
    /// A field dump (see `omega_srf::domain_grid::dump`) replacing `terms`.
    #[serde(default)]
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    #[serde(default = "default_form")]
    pub form: Form,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    /// When set, `run` fails with the acceptance code if the soliton residual
    /// exceeds `soliton_tolerance · h²` at any recorded time.
    #[serde(default)]
    pub soliton_tolerance: Option<f64>,
}

fn default_form() -> Form {
    Form::H
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection { form: Form::H, integrator: IntegratorConfig::default(), soliton_tolerance: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvexitySection {
    pub kind: ConvexKind,
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "default_segments")]
    pub segments: usize,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Starting amplitude of the random endpoints; halved until both are members.
    #[serde(default = "default_amp")]
    pub amp: f64,
    /// Smallest admissible second difference.
    #[serde(default = "default_convex_floor")]
    pub floor: f64,
}

fn default_segments() -> usize {
    20
}

fn default_points() -> usize {
    11
}

fn default_amp() -> f64 {
    0.2
}

fn default_convex_floor() -> f64 {
    -1e-8
}

impl Default for ConvexitySection {
    fn default() -> Self {
        ConvexitySection {
            kind: ConvexKind::PlusPlus,
            delta: 0.0,
            segments: default_segments(),
            points: default_points(),
            amp: default_amp(),
            floor: default_convex_floor(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSection {
    pub velocity: FieldSpec,
    pub times: Vec<f64>,
    #[serde(default = "default_p_max")]
    pub p_max: usize,
    /// When set, any residual above it fails with the acceptance code.
    #[serde(default)]
    pub tolerance: Option<f64>,
}

fn default_p_max() -> usize {
    2
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub testbed: TestbedConfig,
    #[serde(default)]
    pub initial: FieldSpec,
    /// Diagonal of the constant polarization `K`; entries pairwise distinct.
    #[serde(default)]
    pub k_diag: Option<Vec<f64>>,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub suite: SuiteConfig,
    #[serde(default)]
    pub convexity: ConvexitySection,
    #[serde(default)]
    pub geodesic: Option<GeodesicSection>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Line (1-based) of the first `key =` assignment in the source, for messages.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let t = l.trim_start();
        t.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn invalid(text: &str, key: &str, msg: String) -> CliError {
    match line_of(text, key) {
        Some(line) => CliError::Config(format!("line {line}: {key}: {msg}")),
        None => CliError::Config(format!("{key}: {msg}")),
    }
}

impl Default for RunConfig {
    /// The Gaussian soliton on a 256-point line, started at `A = 0`.
    fn default() -> Self {
        RunConfig {
            seed: 0,
            output_dir: default_output(),
            testbed: TestbedConfig {
                kind: TestbedKind::Gaussian1d,
                dim: 1,
                n: 256,
                accuracy: FdAccuracy::Second,
                omega_modes: 0,
                omega_amp: 0.0,
            },
            initial: FieldSpec::default(),
            k_diag: None,
            flow: FlowSection::default(),
            suite: SuiteConfig::default(),
            convexity: ConvexitySection::default(),
            geodesic: None,
        }
    }
}

impl RunConfig {
    /// SHA-256 of the effective configuration without `output_dir`, as lowercase hex.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("output_dir");
        }
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    /// Checks cross-field constraints; `text` is the source used to anchor messages.
    pub fn validate(&self, text: &str) -> Result<(), CliError> {
        let tb = &self.testbed;
        match tb.kind {
            TestbedKind::Gaussian1d | TestbedKind::CircleWeighted if tb.dim != 1 => {
                return Err(invalid(text, "dim", format!("{:?} is one-dimensional, got dim = {}", tb.kind, tb.dim)));
            }
            _ if !(1..=3).contains(&tb.dim) => return Err(invalid(text, "dim", format!("{} not in 1..=3", tb.dim))),
            _ => {}
        }
        if tb.n < 6 {
            return Err(invalid(text, "n", format!("need at least 6 points per axis, got {}", tb.n)));
        }
        if tb.omega_modes > 0 && tb.kind != TestbedKind::TorusNd {
            return Err(invalid(text, "omega_modes", "random weights are only available on torus_nd".into()));
        }
        if let Some(k) = &self.k_diag {
            if k.len() != tb.dim {
                return Err(invalid(text, "k_diag", format!("needs {} entries, got {}", tb.dim, k.len())));
            }
            for i in 0..k.len() {
                for j in 0..i {
                    if k[i] == k[j] {
                        return Err(invalid(text, "k_diag", format!("entries {j} and {i} coincide ({})", k[i])));
                    }
                }
            }
        }
        let check_terms = |spec: &FieldSpec, what: &str| -> Result<(), CliError> {
            for t in &spec.terms {
                if t.k.len() != tb.dim {
                    return Err(invalid(text, "k", format!("{what}: wavevector needs {} entries", tb.dim)));
                }
                if let Some([i, j]) = t.entry {
                    if i >= tb.dim || j >= tb.dim {
                        return Err(invalid(text, "entry", format!("{what}: entry ({i}, {j}) out of range")));
                    }
                }
            }
            Ok(())
        };
        check_terms(&self.initial, "initial")?;
        if let Some(geo) = &self.geodesic {
            check_terms(&geo.velocity, "geodesic.velocity")?;
            if geo.times.is_empty() {
                return Err(invalid(text, "times", "at least one time is required".into()));
            }
        }
        let it = &self.flow.integrator;
        if !(it.dt > 0.0) || !(it.t_end >= 0.0) || it.diagnostics_stride == 0 {
            return Err(invalid(text, "dt", "dt > 0, t_end >= 0 and diagnostics_stride >= 1 are required".into()));
        }
        if self.convexity.points < 3 {
            return Err(invalid(text, "points", "a second difference needs at least 3 points".into()));
        }
        if self.suite.levels_1d.len() != self.suite.levels_2d.len() || self.suite.levels_1d.is_empty() {
            return Err(invalid(text, "levels_1d", "levels_1d and levels_2d must be nonempty and of equal length".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<Grid>, CliError> {
        let tb = &self.testbed;
        let build = |axes: Vec<Axis>, log_omega: &dyn Fn(&[f64]) -> f64| {
            Grid::new(GridSpec::new(axes).with_accuracy(tb.accuracy), log_omega).map_err(CliError::config)
        };
        let two_pi = 2.0 * std::f64::consts::PI;
        match tb.kind {
            TestbedKind::Gaussian1d | TestbedKind::GaussianNd => build(
                vec![Axis::truncated(tb.n, -GAUSSIAN_HALF_WIDTH, GAUSSIAN_HALF_WIDTH); tb.dim],
                &|x| -0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            ),
            TestbedKind::TorusNd => {
                let modes = (tb.omega_modes > 0)
                    .then(|| Modes::random(&mut testbeds::rng(self.seed), tb.dim, tb.omega_modes, 2, tb.omega_amp));
                build(vec![Axis::periodic(tb.n, 0.0, two_pi); tb.dim], &|x| modes.as_ref().map_or(0.0, |m| m.eval(x)))
            }
            TestbedKind::CircleWeighted => build(vec![Axis::periodic(tb.n, 0.0, two_pi)], &|x| -x[0].cos()),
        }
    }

    pub fn polarization(&self, grid: &Arc<Grid>) -> Result<Option<PolarizationField>, CliError> {
        let Some(k) = &self.k_diag else { return Ok(None) };
        let n = grid.dim();
        let mut vals = vec![0.0; n * n];
        for (i, v) in k.iter().enumerate() {
            vals[i * n + i] = *v;
        }
        let g = Field::euclidean(grid);
        let kf = Field::constant(grid, shape::ENDO, &vals);
        PolarizationField::new(&g, kf, omega_srf::domain_grid::DEFAULT_EIGENGAP).map(Some).map_err(CliError::config)
    }
}

impl FieldSpec {
    /// The symmetric field described by the spec, as an endomorphism (`as_metric = false`)
    /// or a covariant 2-tensor.
    pub fn build(&self, grid: &Arc<Grid>, as_metric: bool) -> Result<Field, CliError> {
        let slots = if as_metric { shape::METRIC } else { shape::ENDO };
        if let Some(path) = &self.file {
            let f = std::fs::File::open(path)
                .map_err(|e| CliError::Config(format!("cannot open field file {}: {e}", path.display())))?;
            let field = omega_srf::domain_grid::dump::read_field(&mut std::io::BufReader::new(f), grid)
                .map_err(CliError::config)?;
            if field.slots() != slots {
                return Err(CliError::Config(format!("field file {} has slots {:?}", path.display(), field.slots())));
            }
            return Ok(field);
        }
        let n = grid.dim();
        Ok(Field::from_fn(grid, slots, |x, o| {
            for t in &self.terms {
                let v = t.amp * (t.k.iter().zip(x).map(|(k, x)| k * x).sum::<f64>() + t.phase).sin();
                match t.entry {
                    None => (0..n).for_each(|i| o[i * n + i] += v),
                    Some([i, j]) if i == j => o[i * n + i] += v,
                    Some([i, j]) => {
                        o[i * n + j] += v;
                        o[j * n + i] += v;
                    }
                }
            }
        }))
    }
}
