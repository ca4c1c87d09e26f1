//! Run configuration, read from a TOML file.
//!
//! ```toml
//! n = 128
//! seed = 1
//! h = 0.25
//! t_end = 250.0
//! closure = "salt"          # dns | no-model | salt | epn
//! l_bar = "auto"            # or an integer
//! snapshot_every = 4        # steps
//! reproject_every = 1       # steps
//! out_dir = "out"
//! noise = "noise_model.txt" # stochastic closures outside the pipeline
//! spectrum = "spec.csv"     # `l_bar = "auto"` outside the pipeline
//! kink_range = [4, 64]
//!
//! [ic]
//! kind = "blob"             # or `snapshot = "path.ezsn"`
//! amplitude = 0.5
//!
//! [dns]
//! window = 250.0
//! tol = 0.05
//! max_time = 5000.0
//! ```
//!
//! Relative paths are taken relative to the working directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{default_kink_range, read_spectrum_csv, detect_kink, DEFAULT_STATIONARITY_TOL};
use crate::dynamics::ClosureKind;
use crate::error::{Error, Result};
use crate::integrators::StepperConfig;

use super::ic::IcProfile;

/// Large-scale cutoff: fixed, or detected from a DNS spectrum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLBar", into = "RawLBar")]
pub enum LBar {
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawLBar {
    Fixed(usize),
    Word(String),
}

impl TryFrom<RawLBar> for LBar {
    type Error = String;

    fn try_from(raw: RawLBar) -> std::result::Result<Self, String> {
        match raw {
            RawLBar::Fixed(l) => Ok(LBar::Fixed(l)),
            RawLBar::Word(w) if w == "auto" => Ok(LBar::Auto),
            RawLBar::Word(w) => Err(format!("l_bar must be an integer or \"auto\", got {w:?}")),
        }
    }
}

impl From<LBar> for RawLBar {
    fn from(l: LBar) -> Self {
        match l {
            LBar::Auto => RawLBar::Word("auto".into()),
            LBar::Fixed(l) => RawLBar::Fixed(l),
        }
    }
}

/// Initial condition: a random profile or a stored snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IcSpec {
    Snapshot { snapshot: PathBuf },
    Profile(IcProfile),
}

impl Default for IcSpec {
    fn default() -> Self {
        IcSpec::Profile(IcProfile::default())
    }
}

/// DNS burn-in controls for the pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DnsStage {
    /// Length of each of the two compared windows.
    pub window: f64,
    pub tol: f64,
    /// The burn-in stops here even if the spectrum has not settled.
    pub max_time: f64,
}

impl Default for DnsStage {
    fn default() -> Self {
        Self {
            window: 250.0,
            tol: DEFAULT_STATIONARITY_TOL,
            max_time: 5000.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub seed: u64,
    pub h: f64,
    pub t_end: f64,
    pub closure: ClosureKind,
    pub l_bar: LBar,
    pub snapshot_every: usize,
    pub reproject_every: usize,
    pub out_dir: PathBuf,
    pub ic: IcSpec,
    pub noise: Option<PathBuf>,
    pub spectrum: Option<PathBuf>,
    pub kink_range: Option<(usize, usize)>,
    pub dns: DnsStage,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = StepperConfig::default();
        Self {
            n: 128,
            seed: 0,
            h: s.h,
            t_end: s.t_end,
            closure: ClosureKind::FullDns,
            l_bar: LBar::Auto,
            snapshot_every: s.snapshot_every,
            reproject_every: s.reproject_every,
            out_dir: PathBuf::from("out"),
            ic: IcSpec::default(),
            noise: None,
            spectrum: None,
            kink_range: None,
            dns: DnsStage::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::ConfigFile {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            e => e,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn stepper(&self) -> Result<StepperConfig> {
        StepperConfig::new(self.h, self.t_end, self.reproject_every, self.snapshot_every)
    }

    pub fn kink_range(&self) -> (usize, usize) {
        self.kink_range.unwrap_or_else(|| default_kink_range(self.n))
    }

    /// Checks every field against the module preconditions.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n < 2 {
            return bad(format!("n = {} must be at least 2", self.n));
        }
        self.stepper()?;
        if let LBar::Fixed(l) = self.l_bar {
            if l < 1 || l > self.n - 1 {
                return bad(format!("l_bar = {l} outside [1, {}]", self.n - 1));
            }
        }
        if let Some((lo, hi)) = self.kink_range {
            if lo < 2 || hi + 2 > self.n || lo >= hi {
                return bad(format!("kink_range [{lo}, {hi}] must lie in [2, {}]", self.n.saturating_sub(2)));
            }
        }
        if let IcSpec::Profile(p) = &self.ic {
            p.validate(self.n)?;
        }
        let d = &self.dns;
        if !(d.window > 0.0) || !(d.tol > 0.0) || !(d.max_time >= 2.0 * d.window) || !d.max_time.is_finite() {
            return bad(format!(
                "dns: need window > 0, tol > 0 and max_time >= 2 window (got {}, {}, {})",
                d.window, d.tol, d.max_time
            ));
        }
        Ok(())
    }

    /// Extra checks for a single closure run outside the pipeline.
    pub fn validate_single_run(&self) -> Result<()> {
        if self.closure.is_stochastic() && self.noise.is_none() {
            return Err(Error::Config(format!("closure `{}` needs `noise`", self.closure)));
        }
        if self.closure != ClosureKind::FullDns && self.l_bar == LBar::Auto && self.spectrum.is_none() {
            return Err(Error::Config("l_bar = \"auto\" needs a DNS `spectrum` file".into()));
        }
        Ok(())
    }

    /// The cutoff for a single run: fixed, or detected on `spectrum`.
    pub fn resolve_l_bar(&self) -> Result<usize> {
        match (self.l_bar, &self.spectrum) {
            (LBar::Fixed(l), _) => Ok(l),
            (LBar::Auto, Some(path)) => {
                let e = read_spectrum_csv(path)?;
                Ok(detect_kink(&e, self.kink_range())?.l_bar)
            }
            (LBar::Auto, None) => Err(Error::Config("l_bar = \"auto\" needs a DNS `spectrum` file".into())),
        }
    }
}
