use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use flapmech::mech::{validate_topology, ConstraintLimits, Mechanism, MechanismTopology};
use flapmech::pipeline::PipelineConfig;
use flapmech::uvlm::PitchProfile;
use flapmech::{FemParams, FlapEnvironment, OptimizationConfig, ToleranceBand, UvlmParams, WingMorphology};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum PitchSource {
    Builtin {
        #[serde(default = "default_mid")]
        mid_stroke_deg: f64,
        #[serde(default = "default_ramp")]
        ramp_fraction: f64,
    },
    Harmonic {
        #[serde(default = "default_mid")]
        mid_stroke_deg: f64,
    },
    /// Two-column CSV: cycle fraction, pitch angle in degrees.
    File { path: PathBuf },
}

fn default_mid() -> f64 {
    40.0
}

fn default_ramp() -> f64 {
    0.25
}

impl Default for PitchSource {
    fn default() -> Self {
        PitchSource::Builtin { mid_stroke_deg: default_mid(), ramp_fraction: default_ramp() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepSource {
    #[default]
    Mechanism,
    Harmonic,
}

/// Chord-model driver for `aero`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AeroSection {
    pub sweep: SweepSource,
    /// Harmonic sweep only.
    pub period_tilde: f64,
    pub samples: usize,
    pub reynolds: f64,
}

impl Default for AeroSection {
    fn default() -> Self {
        Self { sweep: SweepSource::Mechanism, period_tilde: 4.0, samples: 64, reynolds: 1000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSection {
    #[serde(flatten)]
    pub search: OptimizationConfig,
    /// Raise FTI_cr of the nominal design with a compass search before the
    /// Pareto search.
    pub maximize_fti: bool,
    pub fti_budget: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self { search: OptimizationConfig::default(), maximize_fti: true, fti_budget: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mechanism: PathBuf,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub environment: FlapEnvironment,
    #[serde(default)]
    pub morphology: WingMorphology,
    #[serde(default)]
    pub pitch: PitchSource,
    #[serde(default)]
    pub uvlm: UvlmParams,
    #[serde(default)]
    pub fem: FemParams,
    #[serde(default)]
    pub limits: ConstraintLimits,
    #[serde(default)]
    pub aero: AeroSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub tolerance: ToleranceBand,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_seed() -> u64 {
    1
}

/// Loaded, validated configuration with paths resolved against the config directory.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub run: RunConfig,
    pub topology: MechanismTopology,
    pub pitch: PitchProfile,
    pub hash: String,
}

impl Loaded {
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            fem: self.run.fem,
            uvlm: self.run.uvlm,
            morphology: self.run.morphology,
            environment: self.run.environment,
            pitch: self.pitch.clone(),
            limits: self.run.limits,
        }
    }

    pub fn mechanism(&self) -> Result<Mechanism, CliError> {
        validate_topology(&self.topology).map_err(CliError::Topology)
    }

    pub fn out_dir(&self) -> &Path {
        &self.run.out
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn parse_mechanism(path: &Path) -> Result<(MechanismTopology, String), CliError> {
    let text = read(path)?;
    let topo = MechanismTopology::from_json(&text)
        .map_err(|e| CliError::Parse(format!("{}: {e} (line {}, column {})", path.display(), e.line(), e.column())))?;
    Ok((topo, text))
}

pub fn parse_pitch_csv(text: &str) -> Result<PitchProfile, String> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let (mut n, mut a) = (Vec::new(), Vec::new());
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        if rec.len() < 2 {
            return Err(format!("row {}: expected fraction,alpha_deg", i + 1));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(x), Ok(y)) => {
                n.push(x);
                a.push(y);
            }
            // a text header row
            _ if i == 0 => continue,
            _ => return Err(format!("row {}: not a number", i + 1)),
        }
    }
    PitchProfile::from_table(&n, &a).map_err(|e| e.to_string())
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.fem.validate()?;
        self.uvlm.validate().map_err(|e| e.to_string())?;
        self.morphology.validate().map_err(|e| e.to_string())?;
        self.environment.validate().map_err(|e| e.to_string())?;
        self.tolerance.validate().map_err(|e| e.to_string())?;
        let l = &self.limits;
        if !(l.r_max > 1.0 && l.fti_min >= 0.0 && l.delta_qrr > 0.0 && l.phi_min_deg >= 0.0) {
            return Err("limits: need r_max > 1, fti_min >= 0, delta_qrr > 0, phi_min_deg >= 0".into());
        }
        let o = &self.optimizer.search;
        if o.population < 4 || !(0.0..1.0).contains(&o.polish_fraction) || !(o.bound_margin > 0.0) {
            return Err("optimizer: need population >= 4, 0 <= polish_fraction < 1, bound_margin > 0".into());
        }
        if self.aero.sweep == SweepSource::Harmonic
            && !(self.aero.period_tilde > 0.0 && self.aero.reynolds > 0.0 && self.aero.samples >= 8)
        {
            return Err("aero: harmonic sweep needs period_tilde > 0, reynolds > 0, samples >= 8".into());
        }
        match self.pitch {
            PitchSource::Builtin { mid_stroke_deg, ramp_fraction } => {
                if !(0.0..=90.0).contains(&mid_stroke_deg) || !(ramp_fraction > 0.0 && ramp_fraction <= 0.5) {
                    return Err("pitch: need 0 <= mid_stroke_deg <= 90 and 0 < ramp_fraction <= 0.5".into());
                }
            }
            PitchSource::Harmonic { mid_stroke_deg } if !(0.0..=90.0).contains(&mid_stroke_deg) => {
                return Err("pitch: need 0 <= mid_stroke_deg <= 90".into());
            }
            _ => {}
        }
        Ok(())
    }
}

/// Read a config file, resolve and check every referenced file, and hash the
/// result together with the referenced file contents.
pub fn load(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<Loaded, CliError> {
    let text = read(path)?;
    let mut run: RunConfig = toml::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    run.mechanism = resolve(base, &run.mechanism);
    run.out = match out {
        Some(o) => o.to_path_buf(),
        None => resolve(base, &run.out),
    };
    if let Some(s) = seed {
        run.seed = s;
    }
    run.optimizer.search.seed = run.seed;
    let mut pitch_text = String::new();
    if let PitchSource::File { path } = &mut run.pitch {
        *path = resolve(base, path);
        pitch_text = read(path)?;
    }
    run.validate().map_err(CliError::Config)?;
    let (topology, mech_text) = parse_mechanism(&run.mechanism)?;
    let pitch = match &run.pitch {
        PitchSource::Builtin { mid_stroke_deg, ramp_fraction } => {
            PitchProfile::Trapezoid { mid_stroke_deg: *mid_stroke_deg, ramp_fraction: *ramp_fraction }
        }
        PitchSource::Harmonic { mid_stroke_deg } => PitchProfile::Harmonic { mid_stroke_deg: *mid_stroke_deg },
        PitchSource::File { path } => {
            parse_pitch_csv(&pitch_text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?
        }
    };

    // the hash covers what determines results, not where they are written
    let mut hashed = run.clone();
    hashed.out = PathBuf::new();
    hashed.mechanism = PathBuf::new();
    if let PitchSource::File { path } = &mut hashed.pitch {
        *path = PathBuf::new();
    }
    let mut h = Sha256::new();
    h.update(serde_json::to_string(&hashed).expect("config serializes"));
    h.update(mech_text.as_bytes());
    h.update(pitch_text.as_bytes());
    let digest = h.finalize();
    let hash: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    run.optimizer.search.config_hash = hash.clone();
    Ok(Loaded { run, topology, pitch, hash })
}
