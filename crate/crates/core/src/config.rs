//! INI run configuration for the command-line driver.
//!
//! ```ini
//! [molecule]
//! delta_hz = 1.66e9          ; or delta_rad_s; omitted means the OH default
//! delta_is_angular = false   ; read the default 1.66e9 as rad/s
//! mu_e_debye = 1.667
//!
//! [fields]
//! b_tesla = 0.1
//! theta_m = 0.39269908169872414
//! e_kv_per_cm = 0
//! theta_e = 0
//!
//! [sweep]
//! omega_r_min_rad_s = 1e8    ; or omega_r_min_hz
//! omega_r_max_rad_s = 5e10
//! points = 400
//! scale = linear             ; or log
//!
//! [output]
//! basename = sweep
//! format = csv               ; or json
//!
//! [toggles]
//! oracle_check = false
//! pt_compare = false
//! pt3_omega_l_squared = false
//! ```
//!
//! Angles are in radians (`theta_m_deg` / `theta_e_deg` take degrees).
//! Unknown sections and keys are rejected.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use serde::{Deserialize, Serialize};

use crate::model::{FieldProtocol, MoleculeParams, DEBYE, KV_PER_CM, OH_DIPOLE_DEBYE};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(config_error(format!("format must be csv or json, got '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub omega_r_min: f64,
    pub omega_r_max: f64,
    pub points: usize,
    pub scale: GridScale,
}

impl SweepConfig {
    pub fn grid(&self) -> Vec<f64> {
        let n = self.points;
        let (lo, hi) = (self.omega_r_min, self.omega_r_max);
        (0..n)
            .map(|k| {
                if k == 0 {
                    return lo;
                }
                if k == n - 1 {
                    return hi;
                }
                let x = k as f64 / (n - 1) as f64;
                match self.scale {
                    GridScale::Linear => lo + (hi - lo) * x,
                    GridScale::Log => lo * (hi / lo).powf(x),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub directory: Option<PathBuf>,
    pub basename: String,
    pub format: OutputFormat,
    pub gnuplot: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Toggles {
    pub oracle_check: bool,
    pub pt_compare: bool,
    pub pt3_omega_l_squared: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub molecule: MoleculeParams,
    pub fields: FieldProtocol,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
    pub toggles: Toggles,
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(format!("config: {}", msg.into()))
}

const KNOWN: &[(&str, &[&str])] = &[
    ("molecule", &["delta_hz", "delta_rad_s", "delta_is_angular", "mu_e_debye", "mu_b", "hbar"]),
    (
        "fields",
        &["b_tesla", "theta_m", "theta_m_deg", "e_kv_per_cm", "theta_e", "theta_e_deg", "e_rotation_ratio"],
    ),
    (
        "sweep",
        &["omega_r_min_rad_s", "omega_r_min_hz", "omega_r_max_rad_s", "omega_r_max_hz", "points", "scale"],
    ),
    ("output", &["directory", "basename", "format", "gnuplot"]),
    ("toggles", &["oracle_check", "pt_compare", "pt3_omega_l_squared"]),
];

/// Flat `section.key → value` view with unknown entries rejected.
struct Entries(BTreeMap<(String, String), String>);

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| config_error(e.to_string()))?;
        let mut map = BTreeMap::new();
        for (section, props) in ini.iter() {
            let name = match section {
                None => {
                    if let Some((k, _)) = props.iter().next() {
                        return Err(config_error(format!("key '{k}' outside any section")));
                    }
                    continue;
                }
                Some(s) => s,
            };
            let keys = KNOWN
                .iter()
                .find(|(s, _)| *s == name)
                .map(|(_, k)| *k)
                .ok_or_else(|| config_error(format!("unknown section [{name}]")))?;
            for (k, v) in props.iter() {
                if !keys.contains(&k) {
                    return Err(config_error(format!("unknown key '{k}' in [{name}]")));
                }
                if map.insert((name.to_string(), k.to_string()), v.trim().to_string()).is_some() {
                    return Err(config_error(format!("duplicate key '{k}' in [{name}]")));
                }
            }
        }
        Ok(Self(map))
    }

    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.0.get(&(section.to_string(), key.to_string())).map(String::as_str)
    }

    fn number(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.raw(section, key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| config_error(format!("[{section}] {key} = '{v}' is not a finite number")))
            })
            .transpose()
    }

    fn flag(&self, section: &str, key: &str) -> Result<bool> {
        match self.raw(section, key) {
            None => Ok(false),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(config_error(format!("[{section}] {key} = '{v}' must be true or false"))),
        }
    }

    /// Exactly one of `{stem}_rad_s` and `{stem}_hz`, in rad/s.
    fn frequency(&self, section: &str, stem: &str) -> Result<Option<f64>> {
        let rad = self.number(section, &format!("{stem}_rad_s"))?;
        let hz = self.number(section, &format!("{stem}_hz"))?;
        match (rad, hz) {
            (Some(_), Some(_)) => Err(config_error(format!("[{section}] give {stem}_rad_s or {stem}_hz, not both"))),
            (Some(w), None) => Ok(Some(w)),
            (None, Some(f)) => Ok(Some(2.0 * PI * f)),
            (None, None) => Ok(None),
        }
    }

    fn angle(&self, section: &str, stem: &str) -> Result<f64> {
        let rad = self.number(section, stem)?;
        let deg = self.number(section, &format!("{stem}_deg"))?;
        match (rad, deg) {
            (Some(_), Some(_)) => Err(config_error(format!("[{section}] give {stem} or {stem}_deg, not both"))),
            (Some(r), None) => Ok(r),
            (None, Some(d)) => Ok(d.to_radians()),
            (None, None) => Ok(0.0),
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let e = Entries::parse(text)?;

        let angular = e.flag("molecule", "delta_is_angular")?;
        let mut molecule = MoleculeParams::oh_with_convention(angular);
        if let Some(d) = e.frequency("molecule", "delta")? {
            molecule.delta = d;
        }
        molecule.mu_e = e.number("molecule", "mu_e_debye")?.unwrap_or(OH_DIPOLE_DEBYE) * DEBYE;
        if let Some(v) = e.number("molecule", "mu_b")? {
            molecule.mu_b = v;
        }
        if let Some(v) = e.number("molecule", "hbar")? {
            molecule.hbar = v;
        }
        molecule.validate().map_err(|err| config_error(err.to_string()))?;

        let mut fields = FieldProtocol::new(
            e.number("fields", "b_tesla")?.unwrap_or(0.0),
            e.angle("fields", "theta_m")?,
            e.number("fields", "e_kv_per_cm")?.unwrap_or(0.0) * KV_PER_CM,
            e.angle("fields", "theta_e")?,
            0.0,
        );
        if let Some(r) = e.number("fields", "e_rotation_ratio")? {
            fields.e_rotation_ratio = r;
        }
        fields.validate().map_err(|err| config_error(err.to_string()))?;

        let omega_r_min = e
            .frequency("sweep", "omega_r_min")?
            .ok_or_else(|| config_error("[sweep] omega_r_min_rad_s or omega_r_min_hz is required"))?;
        let omega_r_max = e
            .frequency("sweep", "omega_r_max")?
            .ok_or_else(|| config_error("[sweep] omega_r_max_rad_s or omega_r_max_hz is required"))?;
        let points = match e.raw("sweep", "points") {
            None => 200,
            Some(v) => v.parse::<usize>().map_err(|_| config_error(format!("[sweep] points = '{v}' is not an integer")))?,
        };
        let scale = match e.raw("sweep", "scale").unwrap_or("linear") {
            "linear" => GridScale::Linear,
            "log" => GridScale::Log,
            other => return Err(config_error(format!("[sweep] scale must be linear or log, got '{other}'"))),
        };
        if !(omega_r_min > 0.0) {
            return Err(config_error("[sweep] omega_r_min must be > 0"));
        }
        if !(omega_r_min < omega_r_max) {
            return Err(config_error("[sweep] omega_r_min must be below omega_r_max"));
        }
        if points < 2 {
            return Err(config_error("[sweep] points must be at least 2"));
        }

        let output = OutputConfig {
            directory: e.raw("output", "directory").map(PathBuf::from),
            basename: e.raw("output", "basename").unwrap_or("sweep").to_string(),
            format: e.raw("output", "format").unwrap_or("csv").parse()?,
            gnuplot: e.flag("output", "gnuplot")?,
        };
        if output.basename.is_empty() || output.basename.contains(['/', '\\']) {
            return Err(config_error("[output] basename must be a plain file name"));
        }

        let toggles = Toggles {
            oracle_check: e.flag("toggles", "oracle_check")?,
            pt_compare: e.flag("toggles", "pt_compare")?,
            pt3_omega_l_squared: e.flag("toggles", "pt3_omega_l_squared")?,
        };

        Ok(Self {
            molecule,
            fields,
            sweep: SweepConfig { omega_r_min, omega_r_max, points, scale },
            output,
            toggles,
        })
    }
}
