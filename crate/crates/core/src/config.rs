//! Scenario and system-parameter loading.
//!
//! Documents are TOML. Every quantity given in dB or dBm is converted to a
//! linear value here, so nothing downstream ever sees a logarithmic unit.

use serde::Deserialize;
use thiserror::Error;

use crate::arrays::AnglePair;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("missing key: {0}")]
    Missing(&'static str),
    #[error("{field} must be positive")]
    NotPositive { field: &'static str },
    #[error("{field} must be finite")]
    NotFinite { field: &'static str },
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

/// Converts a power ratio in dB to linear scale.
pub fn db_to_linear(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

/// Converts a linear power ratio to dB.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Converts dBm to watts.
pub fn dbm_to_watts(x_dbm: f64) -> f64 {
    10f64.powf((x_dbm - 30.0) / 10.0)
}

/// Converts watts to dBm.
pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Which side of the surface an entity lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
pub enum Side {
    /// Transmission half-space: reached only through the active elements.
    #[serde(rename = "T")]
    Transmit,
    /// Reflection half-space: shares the region with the base station.
    #[serde(rename = "R")]
    Reflect,
}

impl Side {
    pub fn tag(self) -> &'static str {
        match self {
            Side::Transmit => "T",
            Side::Reflect => "R",
        }
    }
}

/// How the noise seen at the base station on the Side-T echo path is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseRegime {
    /// Amplifier noise ignored: every receiver sees the static floor only.
    #[default]
    LowGain,
    /// Amplifier noise propagated analytically through the surface.
    Exact,
    /// Closed form valid for large amplification.
    HighGain,
}

impl NoiseRegime {
    pub fn tag(self) -> &'static str {
        match self {
            NoiseRegime::LowGain => "low-gain",
            NoiseRegime::Exact => "exact",
            NoiseRegime::HighGain => "high-gain",
        }
    }
}

/// Validated system parameters, strictly linear units.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub carrier_frequency_hz: f64,
    pub bs_antennas: usize,
    pub ris_nx: usize,
    pub ris_ny: usize,
    pub rician_factor: f64,
    pub noise_power_w: f64,
    pub coherence_length: usize,
    pub chirp_length: usize,
    pub bandwidth_hz: f64,
    pub reference_path_loss: f64,
    pub path_loss_exponent: f64,
    pub radar_cross_section_m2: f64,
    pub bs_power_w: f64,
    /// Overall amplification factor `P_A = ||z_t||`.
    pub amplification_factor: f64,
    pub comm_sinr_threshold: f64,
    pub bs_spacing_wl: f64,
    pub ris_spacing_wl: f64,
    pub noise_regime: NoiseRegime,
    wavelength_m: f64,
}

impl SystemConfig {
    /// Builds a config and checks every invariant.
    pub fn validated(mut self) -> Result<Self, ConfigError> {
        check_pos("carrier_frequency", self.carrier_frequency_hz)?;
        if self.bs_antennas == 0 {
            return Err(ConfigError::NotPositive { field: "bs_antennas" });
        }
        if self.ris_nx == 0 || self.ris_ny == 0 {
            return Err(ConfigError::NotPositive { field: "ris_grid" });
        }
        check_nonneg("rician_factor", self.rician_factor)?;
        check_pos("noise_power", self.noise_power_w)?;
        if self.coherence_length == 0 {
            return Err(ConfigError::NotPositive { field: "coherence_length" });
        }
        if self.chirp_length == 0 {
            return Err(ConfigError::NotPositive { field: "chirp_length" });
        }
        if !self.chirp_length.is_multiple_of(self.coherence_length) {
            return Err(ConfigError::Invalid {
                field: "chirp_length",
                reason: format!(
                    "{} is not a multiple of coherence_length {}",
                    self.chirp_length, self.coherence_length
                ),
            });
        }
        check_pos("bandwidth", self.bandwidth_hz)?;
        check_pos("reference_path_loss", self.reference_path_loss)?;
        check_nonneg("path_loss_exponent", self.path_loss_exponent)?;
        check_pos("radar_cross_section", self.radar_cross_section_m2)?;
        check_pos("bs_power", self.bs_power_w)?;
        check_pos("amplification_factor", self.amplification_factor)?;
        check_pos("comm_sinr_threshold", self.comm_sinr_threshold)?;
        check_pos("bs_spacing", self.bs_spacing_wl)?;
        check_pos("ris_spacing", self.ris_spacing_wl)?;
        self.wavelength_m = SPEED_OF_LIGHT / self.carrier_frequency_hz;
        Ok(self)
    }

    /// Number of surface elements.
    pub fn n(&self) -> usize {
        self.ris_nx * self.ris_ny
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength_m
    }

    /// Phase progression per BS element, `2π d_BS / λ` with spacing in wavelengths.
    pub fn eta_bs(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.bs_spacing_wl
    }

    pub fn eta_ris(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.ris_spacing_wl
    }

    /// Returns a copy with a different surface grid.
    pub fn with_grid(&self, nx: usize, ny: usize) -> Self {
        let mut c = self.clone();
        c.ris_nx = nx;
        c.ris_ny = ny;
        c
    }

    /// Returns a copy with `P_A = factor·√N`.
    pub fn with_amplification_per_root_n(&self, factor: f64) -> Self {
        let mut c = self.clone();
        c.amplification_factor = factor * (c.n() as f64).sqrt();
        c
    }
}

/// One user or target placement.
#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub side: Side,
    pub distance_bs_m: Option<f64>,
    pub distance_ris_m: f64,
    pub angles_bs: Option<AnglePair>,
    pub angles_ris: AnglePair,
}

/// The fixed BS to surface link geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct BsRisLink {
    pub distance_m: f64,
    /// Departure angles at the BS array.
    pub angles_bs: AnglePair,
    /// Arrival angles at the surface.
    pub angles_ris: AnglePair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub bs_ris: BsRisLink,
    pub users: Vec<Entity>,
    pub targets: Vec<Entity>,
}

impl Scenario {
    pub fn users_on(&self, side: Side) -> impl Iterator<Item = (usize, &Entity)> {
        self.users.iter().enumerate().filter(move |(_, e)| e.side == side)
    }

    pub fn targets_on(&self, side: Side) -> impl Iterator<Item = (usize, &Entity)> {
        self.targets.iter().enumerate().filter(move |(_, e)| e.side == side)
    }

    pub fn count_users(&self, side: Side) -> usize {
        self.users_on(side).count()
    }

    pub fn count_targets(&self, side: Side) -> usize {
        self.targets_on(side).count()
    }

    fn validate(&self) -> Result<(), ConfigError> {
        check_pos("bs_ris.distance", self.bs_ris.distance_m)?;
        check_angle("bs_ris.angles_bs", self.bs_ris.angles_bs)?;
        check_angle("bs_ris.angles_ris", self.bs_ris.angles_ris)?;
        if self.users.is_empty() {
            return Err(ConfigError::Invalid { field: "users", reason: "at least one user required".into() });
        }
        if self.targets.is_empty() {
            return Err(ConfigError::Invalid { field: "targets", reason: "at least one target required".into() });
        }
        for (field, list) in [("users", &self.users), ("targets", &self.targets)] {
            for e in list {
                check_pos(field, e.distance_ris_m)?;
                check_angle(field, e.angles_ris)?;
                match e.side {
                    Side::Transmit => {
                        if e.distance_bs_m.is_some() || e.angles_bs.is_some() {
                            return Err(ConfigError::Invalid {
                                field,
                                reason: "side T entities have no direct BS link".into(),
                            });
                        }
                    }
                    Side::Reflect => {
                        let d = e.distance_bs_m.ok_or(ConfigError::Missing("distance_bs_m"))?;
                        check_pos(field, d)?;
                        let a = e.angles_bs.ok_or(ConfigError::Missing("aod_bs_deg"))?;
                        check_angle(field, a)?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_pos(field: &'static str, x: f64) -> Result<(), ConfigError> {
    if !x.is_finite() {
        return Err(ConfigError::NotFinite { field });
    }
    if x <= 0.0 {
        return Err(ConfigError::NotPositive { field });
    }
    Ok(())
}

fn check_nonneg(field: &'static str, x: f64) -> Result<(), ConfigError> {
    if !x.is_finite() {
        return Err(ConfigError::NotFinite { field });
    }
    if x < 0.0 {
        return Err(ConfigError::Invalid { field, reason: "must be nonnegative".into() });
    }
    Ok(())
}

fn check_angle(field: &'static str, a: AnglePair) -> Result<(), ConfigError> {
    if a.horizontal.is_finite() && a.vertical.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::NotFinite { field })
    }
}

// ---- document schema -------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    system: SystemDoc,
    bs_ris: LinkDoc,
    #[serde(default)]
    users: Vec<EntityDoc>,
    #[serde(default)]
    targets: Vec<EntityDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemDoc {
    carrier_frequency_hz: f64,
    bs_antennas: usize,
    ris_grid: [usize; 2],
    rician_factor_db: f64,
    noise_power_dbm: f64,
    coherence_length: usize,
    chirp_length: Option<usize>,
    bandwidth_hz: Option<f64>,
    /// Attenuation at 1 m, positive dB.
    reference_path_loss_db: f64,
    path_loss_exponent: f64,
    radar_cross_section_m2: f64,
    bs_power_w: Option<f64>,
    bs_power_dbw: Option<f64>,
    bs_power_dbm: Option<f64>,
    amplification_factor: Option<f64>,
    amplification_per_root_n: Option<f64>,
    comm_sinr_threshold_db: f64,
    bs_spacing_wavelengths: Option<f64>,
    ris_spacing_wavelengths: Option<f64>,
    noise_regime: Option<NoiseRegime>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkDoc {
    distance_m: f64,
    aod_bs_deg: [f64; 2],
    aoa_ris_deg: [f64; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EntityDoc {
    side: Side,
    distance_ris_m: f64,
    aod_ris_deg: [f64; 2],
    distance_bs_m: Option<f64>,
    aod_bs_deg: Option<[f64; 2]>,
}

fn deg_pair(p: [f64; 2]) -> AnglePair {
    AnglePair::from_degrees(p[0], p[1])
}

/// Default bandwidth when the document leaves it out.
pub const DEFAULT_BANDWIDTH_HZ: f64 = 100e6;
/// Default amplification per `√N` when the document leaves it out.
pub const DEFAULT_AMPLIFICATION_PER_ROOT_N: f64 = 20.0;

fn locate(text: &str, e: &toml::de::Error) -> String {
    match e.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count();
            let src = text.lines().nth(line).unwrap_or("").trim();
            format!("line {}: `{src}`: {}", line + 1, e.message())
        }
        None => e.message().to_string(),
    }
}

/// Parses and validates a scenario document.
pub fn load_scenario(text: &str) -> Result<(SystemConfig, Scenario), ConfigError> {
    let doc: Document = toml::from_str(text).map_err(|e| ConfigError::Parse(locate(text, &e)))?;
    let s = doc.system;

    let bs_power_w = match (s.bs_power_w, s.bs_power_dbw, s.bs_power_dbm) {
        (Some(w), None, None) => w,
        (None, Some(dbw), None) => db_to_linear(dbw),
        (None, None, Some(dbm)) => dbm_to_watts(dbm),
        (None, None, None) => return Err(ConfigError::Missing("bs_power_w")),
        _ => {
            return Err(ConfigError::Invalid {
                field: "bs_power",
                reason: "give exactly one of bs_power_w, bs_power_dbw, bs_power_dbm".into(),
            })
        }
    };
    let n = (s.ris_grid[0] * s.ris_grid[1]) as f64;
    let amplification_factor = match (s.amplification_factor, s.amplification_per_root_n) {
        (Some(p), None) => p,
        (None, Some(c)) => c * n.sqrt(),
        (None, None) => DEFAULT_AMPLIFICATION_PER_ROOT_N * n.sqrt(),
        _ => {
            return Err(ConfigError::Invalid {
                field: "amplification_factor",
                reason: "give amplification_factor or amplification_per_root_n, not both".into(),
            })
        }
    };

    let cfg = SystemConfig {
        carrier_frequency_hz: s.carrier_frequency_hz,
        bs_antennas: s.bs_antennas,
        ris_nx: s.ris_grid[0],
        ris_ny: s.ris_grid[1],
        rician_factor: db_to_linear(s.rician_factor_db),
        noise_power_w: dbm_to_watts(s.noise_power_dbm),
        coherence_length: s.coherence_length,
        chirp_length: s.chirp_length.unwrap_or(s.coherence_length * 10),
        bandwidth_hz: s.bandwidth_hz.unwrap_or(DEFAULT_BANDWIDTH_HZ),
        reference_path_loss: db_to_linear(-s.reference_path_loss_db),
        path_loss_exponent: s.path_loss_exponent,
        radar_cross_section_m2: s.radar_cross_section_m2,
        bs_power_w,
        amplification_factor,
        comm_sinr_threshold: db_to_linear(s.comm_sinr_threshold_db),
        bs_spacing_wl: s.bs_spacing_wavelengths.unwrap_or(0.5),
        ris_spacing_wl: s.ris_spacing_wavelengths.unwrap_or(0.5),
        noise_regime: s.noise_regime.unwrap_or_default(),
        wavelength_m: 0.0,
    }
    .validated()?;

    let entity = |e: EntityDoc| Entity {
        side: e.side,
        distance_bs_m: e.distance_bs_m,
        distance_ris_m: e.distance_ris_m,
        angles_bs: e.aod_bs_deg.map(deg_pair),
        angles_ris: deg_pair(e.aod_ris_deg),
    };
    let scenario = Scenario {
        bs_ris: BsRisLink {
            distance_m: doc.bs_ris.distance_m,
            angles_bs: deg_pair(doc.bs_ris.aod_bs_deg),
            angles_ris: deg_pair(doc.bs_ris.aoa_ris_deg),
        },
        users: doc.users.into_iter().map(entity).collect(),
        targets: doc.targets.into_iter().map(entity).collect(),
    };
    scenario.validate()?;
    Ok((cfg, scenario))
}

/// The two-user, two-target reference scenario as a document.
pub const REFERENCE_DOCUMENT: &str = include_str!("../../../configs/table1.cfg");

/// Loads the built-in reference scenario.
pub fn reference_scenario() -> (SystemConfig, Scenario) {
    load_scenario(REFERENCE_DOCUMENT).expect("built-in scenario is valid")
}
