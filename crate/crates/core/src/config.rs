//! Run configuration: TOML schema, validation, hashing, and initial data.
//!
//! The schema is versioned; every output artifact embeds the SHA-256 of the
//! raw config bytes so runs are traceable to their exact inputs.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use crate::dynamics::{Checkpoint, SolverBackend};
use crate::error::{Error, Result};
use crate::grid::ZGrid;
use crate::multiplier::WeightVariant;
use crate::profiles::ProfileKind;

pub const SCHEMA_VERSION: u32 = 1;

/// Share of the L^2 mass the initial data must carry inside the inner half
/// of the z-domain, so periodic wrap-around stays irrelevant.
pub const INNER_MASS_FRACTION: f64 = 0.9999;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub profile: ProfileSection,
    #[serde(default)]
    pub equilibrium: EquilibriumSection,
    pub grid: GridSection,
    pub modes: ModesSection,
    pub time: TimeSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub multiplier: MultiplierSection,
    #[serde(default)]
    pub energy: EnergySection,
    #[serde(default)]
    pub checks: ChecksSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub fit: Option<FitSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    /// "constant" | "exponential" | "tanh" | "tabulated"
    pub kind: String,
    #[serde(default)]
    pub mu0: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub width: Option<f64>,
    #[serde(default)]
    pub center: Option<f64>,
    #[serde(default)]
    pub ys: Option<Vec<f64>>,
    #[serde(default)]
    pub mus: Option<Vec<f64>>,
    /// Half-length of the y-domain [-l_y, l_y].
    pub l_y: f64,
    pub n_y: usize,
}

impl ProfileSection {
    pub fn kind(&self) -> Result<ProfileKind> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| {
                Error::Config(format!("profile.{name} is required for kind \"{}\"", self.kind))
            })
        };
        match self.kind.as_str() {
            "constant" => Ok(ProfileKind::Constant {
                mu0: need(self.mu0, "mu0")?,
            }),
            "exponential" => Ok(ProfileKind::Exponential {
                mu0: need(self.mu0, "mu0")?,
                eps: need(self.epsilon, "epsilon")?,
            }),
            "tanh" => Ok(ProfileKind::TanhBlend {
                mu0: need(self.mu0, "mu0")?,
                amplitude: need(self.amplitude, "amplitude")?,
                width: need(self.width, "width")?,
                center: need(self.center, "center")?,
            }),
            "tabulated" => {
                let ys = self
                    .ys
                    .clone()
                    .ok_or_else(|| Error::Config("profile.ys required for tabulated".into()))?;
                let mus = self
                    .mus
                    .clone()
                    .ok_or_else(|| Error::Config("profile.mus required for tabulated".into()))?;
                Ok(ProfileKind::Tabulated { ys, mus })
            }
            other => Err(Error::Config(format!("unknown profile kind \"{other}\""))),
        }
    }
}

/// The shear slope scale: "auto" picks sigma = sup mu, making inf U' = 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Value(f64),
    Named(String),
}

impl Default for SigmaSpec {
    fn default() -> Self {
        SigmaSpec::Named("auto".into())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumSection {
    #[serde(default)]
    pub sigma: SigmaSpec,
}

impl EquilibriumSection {
    /// Resolve sigma given the profile's sup mu.
    pub fn resolve_sigma(&self, sup_mu: f64) -> Result<f64> {
        match &self.sigma {
            SigmaSpec::Value(v) if *v > 0.0 => Ok(*v),
            SigmaSpec::Value(v) => Err(Error::Config(format!(
                "equilibrium.sigma must be positive, got {v}"
            ))),
            SigmaSpec::Named(s) if s == "auto" => Ok(sup_mu),
            SigmaSpec::Named(s) => Err(Error::Config(format!(
                "equilibrium.sigma must be a number or \"auto\", got \"{s}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Half-length of the z-domain.
    pub l_z: f64,
    pub n_z: usize,
    /// Domain center; defaults to the midpoint of the image of U.
    #[serde(default)]
    pub z_center: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesSection {
    pub k: Vec<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub dt: f64,
    pub t_final: f64,
    /// Diagnostics are sampled every `output_stride` steps.
    #[serde(default = "default_stride")]
    pub output_stride: usize,
}

fn default_stride() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// "bumps" | "random" | "file"
    pub kind: String,
    #[serde(default)]
    pub bumps: Vec<BumpSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bump_count")]
    pub count: usize,
    #[serde(default)]
    pub path: Option<String>,
}

fn default_bump_count() -> usize {
    4
}

/// One Gaussian bump amplitude e^{i phase} exp(-((z-c)/w)^2 + i xi (z-c)).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub center: f64,
    pub width: f64,
    #[serde(default)]
    pub xi: f64,
    #[serde(default = "default_one")]
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplierSection {
    /// Dissipation weight variant for the frequency-side diagnostics.
    #[serde(default = "default_variant")]
    pub weight_variant: String,
}

impl Default for MultiplierSection {
    fn default() -> Self {
        MultiplierSection {
            weight_variant: default_variant(),
        }
    }
}

fn default_variant() -> String {
    "a".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    /// Use the partitioned energy sum_j ||A_j chi_j W||^2 instead of the
    /// global ||A W||^2.
    #[serde(default)]
    pub partitioned: bool,
    /// Highest derivative order of the weighted ladder (<= 4).
    #[serde(default = "default_hn_order")]
    pub hn_order: usize,
}

impl Default for EnergySection {
    fn default() -> Self {
        EnergySection {
            partitioned: false,
            hn_order: default_hn_order(),
        }
    }
}

fn default_hn_order() -> usize {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaProbe {
    /// Partition interval indices forming the probed set M.
    pub intervals: Vec<usize>,
    pub theta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSection {
    #[serde(default)]
    pub theta_probes: Vec<ThetaProbe>,
    /// Lyapunov tolerance as a multiple of EA(0).
    #[serde(default = "default_tol_factor")]
    pub lyapunov_tol_factor: f64,
    /// Gate the run's exit status on the Lyapunov scan.
    #[serde(default = "default_true")]
    pub enforce_lyapunov: bool,
}

impl Default for ChecksSection {
    fn default() -> Self {
        ChecksSection {
            theta_probes: Vec::new(),
            lyapunov_tol_factor: default_tol_factor(),
            enforce_lyapunov: true,
        }
    }
}

fn default_tol_factor() -> f64 {
    1e-8
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Also draw a log-energy SVG per mode.
    #[serde(default)]
    pub svg: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Fit window [t0, t1].
    pub window: [f64; 2],
    /// Interpret the window in units of nu^{-1/3} instead of absolute time.
    #[serde(default)]
    pub scaled: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// "auto" | "spectral" | "hybrid" | "fd"
    #[serde(default = "default_backend")]
    pub backend: String,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            backend: default_backend(),
        }
    }
}

fn default_backend() -> String {
    "auto".into()
}

impl SolverSection {
    pub fn backend(&self) -> Result<Option<SolverBackend>> {
        if self.backend == "auto" {
            Ok(None)
        } else {
            self.backend.parse().map(Some)
        }
    }
}

/// Sweep grid: the cross product of viscosity scales and wavenumbers, each
/// case a copy of the template with profile.mu0 and modes.k overridden.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub mu0: Vec<f64>,
    #[serde(default = "default_sweep_k")]
    pub k: Vec<i64>,
}

fn default_sweep_k() -> Vec<i64> {
    vec![1]
}

impl RunConfig {
    pub fn from_str_validated(text: &str) -> Result<RunConfig> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Toml(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return err(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        self.profile.kind()?;
        if !(self.profile.l_y > 0.0) {
            return err(format!("profile.l_y must be positive, got {}", self.profile.l_y));
        }
        if self.profile.n_y < 2 {
            return err(format!("profile.n_y must be at least 2, got {}", self.profile.n_y));
        }
        if !(self.grid.l_z > 0.0) {
            return err(format!("grid.l_z must be positive, got {}", self.grid.l_z));
        }
        if self.modes.k.is_empty() {
            return err("modes.k must list at least one wavenumber".into());
        }
        if self.modes.k.contains(&0) {
            return err("modes.k must not contain 0 (the mean mode evolves separately)".into());
        }
        if !(self.time.dt > 0.0) {
            return err(format!("time.dt must be positive, got {}", self.time.dt));
        }
        if !(self.time.t_final >= self.time.dt) {
            return err("time.t_final must be at least one step".into());
        }
        if self.time.output_stride == 0 {
            return err("time.output_stride must be at least 1".into());
        }
        match self.initial.kind.as_str() {
            "bumps" => {
                if self.initial.bumps.is_empty() {
                    return err("initial.kind = \"bumps\" needs at least one [[initial.bumps]]".into());
                }
                for (i, b) in self.initial.bumps.iter().enumerate() {
                    if !(b.width > 0.0) {
                        return err(format!("initial.bumps[{i}].width must be positive"));
                    }
                }
            }
            "random" => {
                if self.initial.count == 0 {
                    return err("initial.count must be at least 1".into());
                }
            }
            "file" => {
                if self.initial.path.is_none() {
                    return err("initial.kind = \"file\" needs initial.path".into());
                }
            }
            other => return err(format!("unknown initial.kind \"{other}\"")),
        }
        self.multiplier
            .weight_variant
            .parse::<WeightVariant>()?;
        if self.energy.hn_order > 4 {
            return err(format!(
                "energy.hn_order must be at most 4, got {}",
                self.energy.hn_order
            ));
        }
        for (i, p) in self.checks.theta_probes.iter().enumerate() {
            if !(0.0..=1.0).contains(&p.theta) {
                return err(format!("checks.theta_probes[{i}].theta must lie in [0, 1]"));
            }
            if p.intervals.is_empty() {
                return err(format!("checks.theta_probes[{i}].intervals must be nonempty"));
            }
        }
        if !(self.checks.lyapunov_tol_factor >= 0.0) {
            return err("checks.lyapunov_tol_factor must be nonnegative".into());
        }
        if let Some(fit) = &self.fit {
            if !(fit.window[0] < fit.window[1]) {
                return err(format!(
                    "fit.window must be increasing, got [{}, {}]",
                    fit.window[0], fit.window[1]
                ));
            }
        }
        self.solver.backend()?;
        if let Some(sweep) = &self.sweep {
            if sweep.mu0.is_empty() {
                return err("sweep.mu0 must list at least one value".into());
            }
            if sweep.mu0.iter().any(|&v| !(v > 0.0)) {
                return err("sweep.mu0 values must be positive".into());
            }
            if sweep.k.is_empty() || sweep.k.contains(&0) {
                return err("sweep.k must be nonempty and nonzero".into());
            }
        }
        Ok(())
    }

    pub fn weight_variant(&self) -> WeightVariant {
        // validated at load time
        self.multiplier
            .weight_variant
            .parse()
            .unwrap_or(WeightVariant::A)
    }
}

/// Parse and validate a config file, returning it with the SHA-256 of the
/// raw bytes.
pub fn load_config(path: &Path) -> Result<(RunConfig, String)> {
    let bytes = std::fs::read(path)?;
    let hash = hex_digest(&bytes);
    let text = String::from_utf8(bytes)
        .map_err(|e| Error::Config(format!("config is not UTF-8: {e}")))?;
    let config = RunConfig::from_str_validated(&text)?;
    Ok((config, hash))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Build the shared initial profile W(0, z) on the grid and enforce the
/// inner-half support gate.
pub fn build_initial(initial: &InitialSection, grid: &ZGrid) -> Result<Vec<Complex64>> {
    let w = match initial.kind.as_str() {
        "bumps" => bumps_field(&initial.bumps, grid),
        "random" => {
            let mut rng = ChaCha8Rng::seed_from_u64(initial.seed);
            let l = grid.half_length();
            let c = grid.center();
            let bumps: Vec<BumpSpec> = (0..initial.count)
                .map(|_| BumpSpec {
                    center: c + rng.gen_range(-l / 5.0..l / 5.0),
                    width: rng.gen_range(1.0..2.0_f64.min(l / 10.0).max(1.0 + 1e-9)),
                    xi: rng.gen_range(-2.0..2.0),
                    amplitude: rng.gen_range(0.5..1.5),
                    phase: rng.gen_range(0.0..std::f64::consts::TAU),
                })
                .collect();
            bumps_field(&bumps, grid)
        }
        "file" => {
            let path = initial.path.as_ref().expect("validated");
            let text = std::fs::read_to_string(path)?;
            let checkpoint: Checkpoint = serde_json::from_str(&text)?;
            let state = checkpoint.into_state()?;
            if state.w_hat.len() != grid.len() {
                return Err(Error::LengthMismatch {
                    context: "initial data file",
                    left: state.w_hat.len(),
                    right: grid.len(),
                });
            }
            state.w_hat
        }
        other => return Err(Error::Config(format!("unknown initial.kind \"{other}\""))),
    };

    // support gate: at least INNER_MASS_FRACTION of the mass in the inner
    // half, so the periodic images cannot contaminate the run
    let total: f64 = w.iter().map(|v| v.norm_sqr()).sum();
    if !(total > 0.0) {
        return Err(Error::Config("initial data has zero L^2 mass".into()));
    }
    let inner: f64 = grid
        .points()
        .iter()
        .zip(&w)
        .filter(|(&z, _)| (z - grid.center()).abs() <= 0.5 * grid.half_length())
        .map(|(_, v)| v.norm_sqr())
        .sum();
    if inner < INNER_MASS_FRACTION * total {
        return Err(Error::Config(format!(
            "initial data must keep {:.2}% of its mass in the inner half of \
             the domain; got {:.4}%",
            100.0 * INNER_MASS_FRACTION,
            100.0 * inner / total
        )));
    }
    Ok(w)
}

fn bumps_field(bumps: &[BumpSpec], grid: &ZGrid) -> Vec<Complex64> {
    grid.points()
        .iter()
        .map(|&z| {
            bumps
                .iter()
                .map(|b| {
                    let arg = (z - b.center) / b.width;
                    b.amplitude
                        * Complex64::new(0.0, b.phase).exp()
                        * (-arg * arg).exp()
                        * Complex64::new(0.0, b.xi * (z - b.center)).exp()
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1

[profile]
kind = "constant"
mu0 = 1e-3
l_y = 20.0
n_y = 256

[grid]
l_z = 20.0
n_z = 256

[modes]
k = [1]

[time]
dt = 1e-3
t_final = 0.1

[initial]
kind = "bumps"

[[initial.bumps]]
center = 0.0
width = 1.5
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let config = RunConfig::from_str_validated(MINIMAL).unwrap();
        assert_eq!(config.schema_version, 1);
        assert!(matches!(
            config.profile.kind().unwrap(),
            ProfileKind::Constant { .. }
        ));
        assert_eq!(config.time.output_stride, 10);
        assert_eq!(config.energy.hn_order, 2);
        assert!(!config.energy.partitioned);
        assert!(config.checks.enforce_lyapunov);
        assert_eq!(config.equilibrium.resolve_sigma(2.5).unwrap(), 2.5);
        assert!(config.solver.backend().unwrap().is_none());
    }

    #[test]
    fn bad_configs_are_rejected() {
        for (patch, needle) in [
            ("schema_version = 1", "schema_version = 2"),
            ("k = [1]", "k = [0]"),
            ("dt = 1e-3", "dt = -1.0"),
            ("kind = \"bumps\"", "kind = \"surprise\""),
            ("mu0 = 1e-3", "mu0 = 1e-3\nextra_key = 1"),
        ]
        .map(|(from, to)| (MINIMAL.replace(from, to), to))
        {
            assert!(
                RunConfig::from_str_validated(&patch).is_err(),
                "accepted config with {needle}"
            );
        }
    }

    #[test]
    fn sigma_spec_accepts_auto_and_numbers() {
        let auto = SigmaSpec::Named("auto".into());
        let section = EquilibriumSection { sigma: auto };
        assert_eq!(section.resolve_sigma(0.125).unwrap(), 0.125);
        let fixed = EquilibriumSection {
            sigma: SigmaSpec::Value(3.0),
        };
        assert_eq!(fixed.resolve_sigma(0.125).unwrap(), 3.0);
        let named = EquilibriumSection {
            sigma: SigmaSpec::Named("sup".into()),
        };
        assert!(named.resolve_sigma(0.125).is_err());
    }

    #[test]
    fn initial_bumps_respect_the_support_gate() {
        let grid = ZGrid::new(256, 20.0).unwrap();
        let ok = InitialSection {
            kind: "bumps".into(),
            bumps: vec![BumpSpec {
                center: 0.0,
                width: 1.5,
                xi: 1.0,
                amplitude: 1.0,
                phase: 0.3,
            }],
            seed: 0,
            count: 4,
            path: None,
        };
        let w = build_initial(&ok, &grid).unwrap();
        assert_eq!(w.len(), 256);
        assert!(grid.norm(&w) > 0.0);

        let off_center = InitialSection {
            bumps: vec![BumpSpec {
                center: 15.0,
                width: 3.0,
                xi: 0.0,
                amplitude: 1.0,
                phase: 0.0,
            }],
            ..ok
        };
        assert!(matches!(
            build_initial(&off_center, &grid),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn random_fields_are_seed_deterministic() {
        let grid = ZGrid::new(512, 20.0).unwrap();
        let section = |seed| InitialSection {
            kind: "random".into(),
            bumps: vec![],
            seed,
            count: 4,
            path: None,
        };
        let a = build_initial(&section(7), &grid).unwrap();
        let b = build_initial(&section(7), &grid).unwrap();
        let c = build_initial(&section(8), &grid).unwrap();
        assert_eq!(a, b);
        assert!(a != c);
    }

    #[test]
    fn config_hash_tracks_bytes() {
        let h1 = hex_digest(MINIMAL.as_bytes());
        let h2 = hex_digest(MINIMAL.replace("1e-3", "2e-3").as_bytes());
        assert_eq!(h1.len(), 64);
        assert_ne!(h1, h2);
        // pinned so accidental hasher swaps show up
        assert_eq!(hex_digest(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
