//! Run configuration: TOML schema, presets and validation.
//!
//! Values are resolved in four layers, later layers winning:
//! preset defaults, the desk-scale overlay (`desk = true`), the config file,
//! and `--set section.key=value` overrides.
//!
//! ```toml
//! preset = "shear_annulus"        # shear_annulus | bodyforce_offset_disk | custom
//! desk = false                    # desk-scale overlay: dns_level = 4, t_end = 10
//!
//! [mesh]
//! domain = "annulus"              # annulus | offset_disk
//! n_outer = 20                    # boundary points on the outer circle
//! n_inner = 18                    # boundary points on the inner circle
//! dns_level = 8                   # mesh-level label (1, 2, 4, 8, ...) of the DNS mesh
//! data_level = 1                  # label of the coarse observation mesh
//!
//! [physics]
//! re = 600.0                      # exactly one of re / nu; nu = 1 / re
//! body_force = false              # rotational body force (-4y(1-r^2), 4x(1-r^2))
//! wall = "rotating_outer"         # rotating_outer | no_slip
//! initial = "rest"                # rest | stokes (initial reference velocity)
//!
//! [time]
//! t_start = 0.0                   # nudging start; the reference starts at t_start - spinup
//! t_end = 100.0
//! dt = 0.01
//! spinup = 5.0
//!
//! [nudging]
//! mu = 100.0
//! k = 2                           # interpolation degree
//! variant = "on_coarse"           # on_coarse | linear_on_refined (k = 1, six nodes per coarse triangle)
//! obs_stride = 1                  # steps between observations
//! sync_threshold = 1e-11          # relative L2 error at which a run halts
//!
//! [output]
//! series = "nudge.csv"
//! snapshot_stride = 0             # 0 disables VTK snapshots
//! checkpoint_stride = 100         # 0 disables checkpoints
//!
//! [numerics]
//! linear_tol = 1e-13              # relative residual of each step solve, at most 1e-9
//! deterministic = true
//! workers = 1                     # concurrent runs in `compare`
//! ```

use std::fmt::{self, Write as _};
use std::path::Path;

use danse_core::interp::InterpVariant;
use danse_core::mesh::MeshHierarchy;
use danse_core::solver::{MAX_STEP_SOLVE_TOL, STEP_SOLVE_TOL};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing value for {0} (custom preset has no default)")]
    Missing(String),
    #[error("invariant `{invariant}` violated: {detail}")]
    Invariant { invariant: &'static str, detail: String },
    #[error("bad override '{0}': expected section.key=value")]
    Override(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn invariant(invariant: &'static str, detail: impl Into<String>) -> ConfigError {
    ConfigError::Invariant { invariant, detail: detail.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    ShearAnnulus,
    BodyforceOffsetDisk,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Annulus,
    OffsetDisk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wall {
    /// Outer circle turns counterclockwise at unit speed, inner circle at rest.
    RotatingOuter,
    NoSlip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    Rest,
    Stokes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    OnCoarse,
    LinearOnRefined,
}

impl Variant {
    pub fn to_core(self) -> InterpVariant {
        match self {
            Variant::OnCoarse => InterpVariant::OnCoarse,
            Variant::LinearOnRefined => InterpVariant::LinearOnRefined,
        }
    }
}

/// Declares a resolved section and its all-optional file form.
macro_rules! section {
    ($name:ident, $partial:ident, $key:literal { $($field:ident : $ty:ty),* $(,)? }) => {
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            $(pub $field: $ty,)*
        }

        #[derive(Clone, Debug, Default, Deserialize)]
        #[serde(deny_unknown_fields)]
        struct $partial {
            $($field: Option<$ty>,)*
        }

        impl $partial {
            fn overlay(&mut self, top: $partial) {
                $(if top.$field.is_some() { self.$field = top.$field; })*
            }

            fn finish(self) -> Result<$name, ConfigError> {
                Ok($name {
                    $($field: self.$field.ok_or_else(|| ConfigError::Missing(concat!($key, ".", stringify!($field)).into()))?,)*
                })
            }
        }
    };
}

section!(MeshConfig, MeshPartial, "mesh" {
    domain: Domain,
    n_outer: usize,
    n_inner: usize,
    dns_level: usize,
    data_level: usize,
});

section!(TimeConfig, TimePartial, "time" {
    t_start: f64,
    t_end: f64,
    dt: f64,
    spinup: f64,
});

section!(NudgingConfig, NudgingPartial, "nudging" {
    mu: f64,
    k: usize,
    variant: Variant,
    obs_stride: usize,
    sync_threshold: f64,
});

section!(OutputConfig, OutputPartial, "output" {
    series: String,
    snapshot_stride: usize,
    checkpoint_stride: usize,
});

section!(NumericsConfig, NumericsPartial, "numerics" {
    linear_tol: f64,
    deterministic: bool,
    workers: usize,
});

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicsConfig {
    /// Reynolds number when given; `nu = 1 / re`.
    pub re: Option<f64>,
    pub nu: f64,
    pub body_force: bool,
    pub wall: Wall,
    pub initial: Initial,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhysicsPartial {
    re: Option<f64>,
    nu: Option<f64>,
    body_force: Option<bool>,
    wall: Option<Wall>,
    initial: Option<Initial>,
}

impl PhysicsPartial {
    /// A layer naming either viscosity key replaces both.
    fn overlay(&mut self, top: PhysicsPartial) {
        if top.re.is_some() || top.nu.is_some() {
            self.re = top.re;
            self.nu = top.nu;
        }
        if top.body_force.is_some() {
            self.body_force = top.body_force;
        }
        if top.wall.is_some() {
            self.wall = top.wall;
        }
        if top.initial.is_some() {
            self.initial = top.initial;
        }
    }

    fn finish(self) -> Result<PhysicsConfig, ConfigError> {
        let nu = match (self.re, self.nu) {
            (Some(re), None) => 1.0 / re,
            (None, Some(nu)) => nu,
            (Some(_), Some(_)) => return Err(invariant("exactly one of re/nu", "both re and nu are given")),
            (None, None) => return Err(invariant("exactly one of re/nu", "neither re nor nu is given")),
        };
        let missing = |k: &str| ConfigError::Missing(format!("physics.{k}"));
        Ok(PhysicsConfig {
            re: self.re,
            nu,
            body_force: self.body_force.ok_or_else(|| missing("body_force"))?,
            wall: self.wall.ok_or_else(|| missing("wall"))?,
            initial: self.initial.ok_or_else(|| missing("initial"))?,
        })
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigPartial {
    preset: Option<Preset>,
    desk: Option<bool>,
    #[serde(default)]
    mesh: MeshPartial,
    #[serde(default)]
    physics: PhysicsPartial,
    #[serde(default)]
    time: TimePartial,
    #[serde(default)]
    nudging: NudgingPartial,
    #[serde(default)]
    output: OutputPartial,
    #[serde(default)]
    numerics: NumericsPartial,
}

impl ConfigPartial {
    fn overlay(&mut self, top: ConfigPartial) {
        if top.preset.is_some() {
            self.preset = top.preset;
        }
        if top.desk.is_some() {
            self.desk = top.desk;
        }
        self.mesh.overlay(top.mesh);
        self.physics.overlay(top.physics);
        self.time.overlay(top.time);
        self.nudging.overlay(top.nudging);
        self.output.overlay(top.output);
        self.numerics.overlay(top.numerics);
    }
}

/// Fully resolved and validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub preset: Preset,
    pub desk: bool,
    pub mesh: MeshConfig,
    pub physics: PhysicsConfig,
    pub time: TimeConfig,
    pub nudging: NudgingConfig,
    pub output: OutputConfig,
    pub numerics: NumericsConfig,
}

/// Defaults shared by every preset (output, numerics and observation
/// settings); the custom preset has nothing else.
fn generic_defaults() -> ConfigPartial {
    ConfigPartial {
        desk: Some(false),
        time: TimePartial { t_start: Some(0.0), spinup: Some(0.0), ..Default::default() },
        nudging: NudgingPartial { obs_stride: Some(1), sync_threshold: Some(1e-11), ..Default::default() },
        output: OutputPartial {
            series: Some("nudge.csv".into()),
            snapshot_stride: Some(0),
            checkpoint_stride: Some(100),
        },
        numerics: NumericsPartial { linear_tol: Some(STEP_SOLVE_TOL), deterministic: Some(true), workers: Some(1) },
        ..Default::default()
    }
}

/// Full-scale preset values.
///
/// Shear flow in the annulus between radii 0.1 and 1 (20 and 18 boundary
/// points): Re = 600, dt = 0.01, reference from t0 = -5 to T = 100 started
/// at rest, nudging with mu = 100 from t = 0 on the Level-8 DNS mesh.
/// Body-force flow in the disk of radius 1 with an obstacle of radius 0.1
/// centred at (0.5, 0): same Re and dt, force
/// `(-4y(1 - x^2 - y^2), 4x(1 - x^2 - y^2))`, no-slip walls, Stokes initial
/// data, interval [0, 40], mu = 10.
fn preset_defaults(preset: Preset) -> ConfigPartial {
    let mut base = generic_defaults();
    let common = |domain, wall, body_force, initial, t_end, spinup, mu| ConfigPartial {
        mesh: MeshPartial {
            domain: Some(domain),
            n_outer: Some(20),
            n_inner: Some(18),
            dns_level: Some(8),
            data_level: Some(1),
        },
        physics: PhysicsPartial {
            re: Some(600.0),
            nu: None,
            body_force: Some(body_force),
            wall: Some(wall),
            initial: Some(initial),
        },
        time: TimePartial { t_start: Some(0.0), t_end: Some(t_end), dt: Some(0.01), spinup: Some(spinup) },
        nudging: NudgingPartial { mu: Some(mu), k: Some(2), variant: Some(Variant::OnCoarse), ..Default::default() },
        ..Default::default()
    };
    match preset {
        Preset::ShearAnnulus => {
            base.overlay(common(Domain::Annulus, Wall::RotatingOuter, false, Initial::Rest, 100.0, 5.0, 100.0))
        }
        Preset::BodyforceOffsetDisk => {
            base.overlay(common(Domain::OffsetDisk, Wall::NoSlip, true, Initial::Stokes, 40.0, 0.0, 10.0))
        }
        Preset::Custom => {}
    }
    base
}

/// Desk-scale overlay: Level-4 DNS mesh and T = 10, a size that runs in
/// minutes on one core.
fn desk_overlay() -> ConfigPartial {
    ConfigPartial {
        mesh: MeshPartial { dns_level: Some(4), ..Default::default() },
        time: TimePartial { t_end: Some(10.0), ..Default::default() },
        ..Default::default()
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn parse_partial(text: &str) -> Result<ConfigPartial, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        msg: e.message().to_string(),
    })
}

/// Turns `section.key=value` into a one-line TOML document; bare words are
/// quoted so `nudging.variant=on_coarse` works.
fn override_partial(spec: &str) -> Result<ConfigPartial, ConfigError> {
    let (key, value) = spec.split_once('=').ok_or_else(|| ConfigError::Override(spec.into()))?;
    let key = key.trim();
    let value = value.trim();
    if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
        return Err(ConfigError::Override(spec.into()));
    }
    let literal = format!("{key} = {value}");
    if literal.parse::<toml::Table>().is_ok() {
        return parse_partial(&literal).map_err(|e| ConfigError::Parse { line: 0, msg: format!("override '{spec}': {e}") });
    }
    let quoted = format!("{key} = {}", toml::Value::String(value.into()));
    parse_partial(&quoted).map_err(|e| ConfigError::Parse { line: 0, msg: format!("override '{spec}': {e}") })
}

/// Parses config text, applies presets and overrides, and validates.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<SimConfig, ConfigError> {
    let mut user = parse_partial(text)?;
    for o in overrides {
        user.overlay(override_partial(o)?);
    }
    let preset = user.preset.unwrap_or(Preset::Custom);
    let mut resolved = preset_defaults(preset);
    if user.desk.unwrap_or(false) {
        resolved.overlay(desk_overlay());
    }
    resolved.overlay(user);
    let config = SimConfig {
        preset,
        desk: resolved.desk.unwrap_or(false),
        mesh: resolved.mesh.finish()?,
        physics: resolved.physics.finish()?,
        time: resolved.time.finish()?,
        nudging: resolved.nudging.finish()?,
        output: resolved.output.finish()?,
        numerics: resolved.numerics.finish()?,
    };
    config.validate()?;
    Ok(config)
}

/// Reads and parses a config file.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<SimConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text, overrides)
}

fn level_index(label: usize, name: &'static str) -> Result<usize, ConfigError> {
    MeshHierarchy::index_of_label(label)
        .ok_or_else(|| invariant(name, format!("mesh level label {label} is not a power of two (1, 2, 4, ...)")))
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.mesh;
        if m.n_outer < 8 || m.n_inner < 6 {
            return Err(invariant("n_outer >= 8 and n_inner >= 6", format!("got {} and {}", m.n_outer, m.n_inner)));
        }
        let dns = level_index(m.dns_level, "dns_level is a level label")?;
        let data = level_index(m.data_level, "data_level is a level label")?;
        if data >= dns {
            return Err(invariant(
                "data_level < dns_level",
                format!("data_level = {}, dns_level = {}", m.data_level, m.dns_level),
            ));
        }
        let p = &self.physics;
        if !(p.nu > 0.0 && p.nu.is_finite()) {
            return Err(invariant("nu > 0", format!("nu = {}", p.nu)));
        }
        let t = &self.time;
        if !(t.dt > 0.0 && t.dt.is_finite()) {
            return Err(invariant("dt > 0", format!("dt = {}", t.dt)));
        }
        if !(t.t_end > t.t_start) {
            return Err(invariant("t_end > t_start", format!("t_start = {}, t_end = {}", t.t_start, t.t_end)));
        }
        if !(t.spinup >= 0.0 && t.spinup.is_finite()) {
            return Err(invariant("spinup >= 0", format!("spinup = {}", t.spinup)));
        }
        for (name, span) in [("(t_end - t_start) / dt is whole", t.t_end - t.t_start), ("spinup / dt is whole", t.spinup)] {
            let x = span / t.dt;
            if (x - x.round()).abs() > 1e-6 {
                return Err(invariant(name, format!("{span} / {} = {x}", t.dt)));
            }
        }
        let n = &self.nudging;
        if !(n.mu >= 0.0 && n.mu.is_finite()) {
            return Err(invariant("mu >= 0", format!("mu = {}", n.mu)));
        }
        if !(1..=2).contains(&n.k) {
            return Err(invariant("k in {1, 2}", format!("k = {}", n.k)));
        }
        if n.variant == Variant::LinearOnRefined && n.k != 1 {
            return Err(invariant("linear_on_refined requires k = 1", format!("k = {}", n.k)));
        }
        if n.obs_stride == 0 {
            return Err(invariant("obs_stride >= 1", "obs_stride = 0"));
        }
        if !(n.sync_threshold >= 0.0) {
            return Err(invariant("sync_threshold >= 0", format!("sync_threshold = {}", n.sync_threshold)));
        }
        let tol = self.numerics.linear_tol;
        if !(tol > 0.0 && tol <= MAX_STEP_SOLVE_TOL) {
            return Err(invariant("0 < linear_tol <= 1e-9", format!("linear_tol = {tol:e}")));
        }
        if self.numerics.workers == 0 {
            return Err(invariant("workers >= 1", "workers = 0"));
        }
        if self.output.series.is_empty() {
            return Err(invariant("series path is nonempty", "series = \"\""));
        }
        Ok(())
    }

    /// Hierarchy index of the DNS mesh.
    pub fn dns_index(&self) -> usize {
        self.mesh.dns_level.trailing_zeros() as usize
    }

    /// Hierarchy index of the observation mesh.
    pub fn data_index(&self) -> usize {
        self.mesh.data_level.trailing_zeros() as usize
    }

    /// First time of the reference run.
    pub fn reference_start(&self) -> f64 {
        self.time.t_start - self.time.spinup
    }

    /// Everything that determines the reference trajectory, except its end
    /// time.
    fn reference_key(&self) -> String {
        let (m, p, t) = (&self.mesh, &self.physics, &self.time);
        let mut s = String::new();
        let _ = write!(
            s,
            "domain={:?};n_outer={};n_inner={};dns_level={};nu={:?};body_force={};wall={:?};initial={:?};",
            m.domain, m.n_outer, m.n_inner, m.dns_level, p.nu, p.body_force, p.wall, p.initial
        );
        let _ = write!(s, "t_start={:?};dt={:?};spinup={:?};linear_tol={:?};", t.t_start, t.dt, t.spinup, self.numerics.linear_tol);
        s
    }

    /// Fingerprint of the reference run; a nudged run accepts a stored
    /// reference only when these agree.
    pub fn reference_fingerprint(&self) -> u64 {
        digest(&self.reference_key())
    }

    /// Fingerprint of the nudged run; checkpoints carry it. End time and
    /// output settings are excluded so that a run can be extended and
    /// restarted.
    pub fn run_fingerprint(&self) -> u64 {
        let n = &self.nudging;
        digest(&format!(
            "{}data_level={};mu={:?};k={};variant={:?};obs_stride={};sync_threshold={:?}",
            self.reference_key(),
            self.mesh.data_level,
            n.mu,
            n.k,
            n.variant,
            n.obs_stride,
            n.sync_threshold
        ))
    }
}

fn digest(s: &str) -> u64 {
    let hash = Sha256::digest(s.as_bytes());
    u64::from_le_bytes(hash[..8].try_into().expect("sha256 has 32 bytes"))
}

impl fmt::Display for SimConfig {
    /// Resolved configuration in the file schema.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let snake = |s: String| {
            let mut out = String::new();
            for (i, c) in s.chars().enumerate() {
                if c.is_ascii_uppercase() {
                    if i > 0 {
                        out.push('_');
                    }
                    out.push(c.to_ascii_lowercase());
                } else {
                    out.push(c);
                }
            }
            out
        };
        let (m, p, t, n, o, x) = (&self.mesh, &self.physics, &self.time, &self.nudging, &self.output, &self.numerics);
        writeln!(f, "preset = \"{}\"", snake(format!("{:?}", self.preset)))?;
        writeln!(f, "desk = {}", self.desk)?;
        writeln!(f, "\n[mesh]")?;
        writeln!(f, "domain = \"{}\"", snake(format!("{:?}", m.domain)))?;
        writeln!(f, "n_outer = {}\nn_inner = {}", m.n_outer, m.n_inner)?;
        writeln!(f, "dns_level = {}\ndata_level = {}", m.dns_level, m.data_level)?;
        writeln!(f, "\n[physics]")?;
        match p.re {
            Some(re) => writeln!(f, "re = {re:?}")?,
            None => writeln!(f, "nu = {:?}", p.nu)?,
        }
        writeln!(f, "body_force = {}", p.body_force)?;
        writeln!(f, "wall = \"{}\"", snake(format!("{:?}", p.wall)))?;
        writeln!(f, "initial = \"{}\"", snake(format!("{:?}", p.initial)))?;
        writeln!(f, "\n[time]")?;
        writeln!(f, "t_start = {:?}\nt_end = {:?}\ndt = {:?}\nspinup = {:?}", t.t_start, t.t_end, t.dt, t.spinup)?;
        writeln!(f, "\n[nudging]")?;
        writeln!(f, "mu = {:?}\nk = {}", n.mu, n.k)?;
        writeln!(f, "variant = \"{}\"", snake(format!("{:?}", n.variant)))?;
        writeln!(f, "obs_stride = {}\nsync_threshold = {:?}", n.obs_stride, n.sync_threshold)?;
        writeln!(f, "\n[output]")?;
        writeln!(f, "series = {}", toml::Value::String(o.series.clone()))?;
        writeln!(f, "snapshot_stride = {}\ncheckpoint_stride = {}", o.snapshot_stride, o.checkpoint_stride)?;
        writeln!(f, "\n[numerics]")?;
        writeln!(f, "linear_tol = {:?}\ndeterministic = {}\nworkers = {}", x.linear_tol, x.deterministic, x.workers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shear_preset_defaults() {
        let c = parse_config("preset = \"shear_annulus\"", &[]).unwrap();
        assert_eq!(c.nudging.mu, 100.0);
        assert_eq!(c.time.dt, 0.01);
        assert_eq!(c.physics.re, Some(600.0));
        assert_eq!(c.physics.nu, 1.0 / 600.0);
        assert_eq!((c.time.t_start, c.time.spinup, c.time.t_end), (0.0, 5.0, 100.0));
        assert_eq!((c.mesh.n_outer, c.mesh.n_inner, c.mesh.dns_level), (20, 18, 8));
        assert_eq!(c.physics.wall, Wall::RotatingOuter);
        assert_eq!(c.output.checkpoint_stride, 100);
        assert_eq!(c.nudging.sync_threshold, 1e-11);
    }

    #[test]
    fn bodyforce_preset_defaults() {
        let c = parse_config("preset = \"bodyforce_offset_disk\"", &[]).unwrap();
        assert_eq!(c.nudging.mu, 10.0);
        assert_eq!(c.time.t_end, 40.0);
        assert_eq!(c.time.spinup, 0.0);
        assert!(c.physics.body_force);
        assert_eq!(c.physics.initial, Initial::Stokes);
        assert_eq!(c.mesh.domain, Domain::OffsetDisk);
    }

    #[test]
    fn desk_overlay_and_file_precedence() {
        let c = parse_config("preset = \"shear_annulus\"\ndesk = true", &[]).unwrap();
        assert_eq!((c.mesh.dns_level, c.time.t_end), (4, 10.0));
        let c = parse_config("preset = \"shear_annulus\"\ndesk = true\n[time]\nt_end = 3.0", &[]).unwrap();
        assert_eq!((c.mesh.dns_level, c.time.t_end), (4, 3.0));
    }

    #[test]
    fn overrides_win_and_quote_bare_words() {
        let sets = ["nudging.mu=0".to_string(), "nudging.variant=linear_on_refined".into(), "nudging.k=1".into()];
        let c = parse_config("preset = \"shear_annulus\"", &sets).unwrap();
        assert_eq!(c.nudging.mu, 0.0);
        assert_eq!(c.nudging.variant, Variant::LinearOnRefined);
        assert!(parse_config("preset = \"shear_annulus\"", &["nudging.mu".into()]).is_err());
    }

    #[test]
    fn negative_dt_names_the_invariant() {
        let err = parse_config("preset = \"shear_annulus\"\n[time]\ndt = -1.0", &[]).unwrap_err();
        assert!(err.to_string().contains("dt > 0"), "{err}");
    }

    #[test]
    fn violated_invariants_are_named() {
        let cases = [
            ("[mesh]\ndata_level = 8", "data_level < dns_level"),
            ("[nudging]\nmu = -1.0", "mu >= 0"),
            ("[physics]\nre = 600.0\nnu = 0.1", "exactly one of re/nu"),
            ("[nudging]\nk = 2\nvariant = \"linear_on_refined\"", "linear_on_refined requires k = 1"),
            ("[mesh]\ndns_level = 6", "dns_level is a level label"),
            ("[numerics]\nlinear_tol = 1e-6", "linear_tol"),
        ];
        for (body, name) in cases {
            let err = parse_config(&format!("preset = \"shear_annulus\"\n{body}"), &[]).unwrap_err();
            assert!(matches!(err, ConfigError::Invariant { .. }), "{body}: {err}");
            assert!(err.to_string().contains(name), "{body}: {err}");
        }
    }

    #[test]
    fn viscosity_layer_replaces_reynolds_number() {
        let c = parse_config("preset = \"shear_annulus\"\n[physics]\nnu = 0.01", &[]).unwrap();
        assert_eq!((c.physics.re, c.physics.nu), (None, 0.01));
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let err = parse_config("preset = \"shear_annulus\"\n\n[time]\nd_t = 0.1", &[]).unwrap_err();
        match err {
            ConfigError::Parse { line, msg } => {
                assert_eq!(line, 4);
                assert!(msg.contains("d_t"), "{msg}");
            }
            other => panic!("{other}"),
        }
        let err = parse_config("preset = \"shear\"", &[]).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn custom_preset_requires_physics() {
        let err = parse_config("preset = \"custom\"", &[]).unwrap_err();
        assert!(matches!(err, ConfigError::Missing(_)), "{err}");
    }

    #[test]
    fn display_round_trips() {
        for text in ["preset = \"shear_annulus\"\ndesk = true", "preset = \"bodyforce_offset_disk\"\n[physics]\nnu = 0.002"] {
            let c = parse_config(text, &[]).unwrap();
            let again = parse_config(&c.to_string(), &[]).unwrap();
            assert_eq!(c, again);
        }
    }

    #[test]
    fn fingerprints_track_relevant_fields() {
        let base = parse_config("preset = \"shear_annulus\"", &[]).unwrap();
        let longer = parse_config("preset = \"shear_annulus\"\n[time]\nt_end = 200.0", &[]).unwrap();
        let other_mu = parse_config("preset = \"shear_annulus\"\n[nudging]\nmu = 10.0", &[]).unwrap();
        assert_eq!(base.run_fingerprint(), longer.run_fingerprint());
        assert_ne!(base.run_fingerprint(), other_mu.run_fingerprint());
        assert_eq!(base.reference_fingerprint(), other_mu.reference_fingerprint());
        let other_nu = parse_config("preset = \"shear_annulus\"\n[physics]\nre = 100.0", &[]).unwrap();
        assert_ne!(base.reference_fingerprint(), other_nu.reference_fingerprint());
    }
}
