//! Run configuration documents.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use rabi_dimer::fockspace::{product_state, SiteState};
use rabi_dimer::model::{A2Map, ModelConfig};
use rabi_dimer::propagate::EvolutionPlan;
use rabi_dimer::spectral::ScanSettings;
use rabi_dimer::sweep::{Axis, GridSpec, SweepTemplate};
use rabi_dimer::trajectories::DampingConfig;
use rabi_dimer::{FockSpace, Qubit, Site, StateVector};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Top-level configuration shared by every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Informational; written into every resolved config.
    #[serde(default)]
    pub version: Option<String>,
    pub model: ModelConfig,
    #[serde(default)]
    pub initial_state: Option<InitialState>,
    #[serde(default)]
    pub evolution: Option<EvolutionPlan>,
    #[serde(default)]
    pub truncation_check: Option<TruncationCheck>,
    #[serde(default)]
    pub damping: Option<DampingConfig>,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub spectrum: Option<SpectrumBlock>,
    #[serde(default)]
    pub renorm: Option<RenormBlock>,
    #[serde(default)]
    pub output: Option<OutputBlock>,
}

/// Per-site initial states, left site first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub sites: Vec<SiteSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteSpec {
    #[serde(default)]
    pub fock: Option<usize>,
    /// `[re, im]` of a coherent amplitude.
    #[serde(default)]
    pub coherent: Option<[f64; 2]>,
    #[serde(default = "down")]
    pub qubit: Qubit,
}

fn down() -> Qubit {
    Qubit::Down
}

impl SiteSpec {
    pub fn fock(n: usize) -> Self {
        Self {
            fock: Some(n),
            coherent: None,
            qubit: Qubit::Down,
        }
    }

    fn state(&self) -> Result<SiteState, CliError> {
        match (self.fock, self.coherent) {
            (Some(n), None) => Ok(SiteState::fock(n, self.qubit)),
            (None, Some([re, im])) => Ok(SiteState::coherent(C64::new(re, im), self.qubit)),
            _ => Err(CliError::Config(
                "initial_state.sites: each site needs exactly one of `fock` or `coherent`".into(),
            )),
        }
    }

    /// Photon number used to size the default truncation.
    fn nominal_photons(&self) -> usize {
        match (self.fock, self.coherent) {
            (Some(n), _) => n,
            (None, Some([re, im])) => {
                let a = re.hypot(im);
                (a * a + 4.0 * a).ceil() as usize
            }
            _ => 0,
        }
    }
}

impl InitialState {
    pub fn default_for(sites: usize) -> Self {
        let mut s = vec![SiteSpec::fock(20)];
        if sites == 2 {
            s.push(SiteSpec::fock(0));
        }
        Self { sites: s }
    }

    pub fn nominal_photons(&self) -> usize {
        self.sites.iter().map(SiteSpec::nominal_photons).max().unwrap_or(0)
    }

    pub fn total_fock(&self) -> usize {
        self.sites.iter().filter_map(|s| s.fock).sum()
    }

    pub fn build_states(&self) -> Result<Vec<SiteState>, CliError> {
        self.sites.iter().map(SiteSpec::state).collect()
    }

    pub fn build(&self, space: &FockSpace) -> Result<StateVector, CliError> {
        Ok(product_state(space, &self.build_states()?)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationCheck {
    pub delta_n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridPreset {
    Full,
    Ci,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    #[serde(default)]
    pub preset: Option<GridPreset>,
    /// Explicit grid; takes precedence over `preset`.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub truncation_delta: Option<usize>,
    #[serde(default)]
    pub skip_truncation_check: bool,
    #[serde(default)]
    pub start: Option<Site>,
    /// Checkpoint file, relative to the output directory.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumBlock {
    #[serde(default = "spectrum_axis")]
    pub g: Axis,
    #[serde(default)]
    pub zeta_levels: Option<usize>,
    #[serde(default)]
    pub chi_levels: Option<usize>,
    #[serde(default)]
    pub convergence: Option<f64>,
    /// Range of `g` used for the `χ ≈ c g²` fit.
    #[serde(default = "fit_range")]
    pub fit_range: [f64; 2],
}

fn spectrum_axis() -> Axis {
    Axis::log(0.01, 3.0, 24)
}

fn fit_range() -> [f64; 2] {
    [1.0, 3.0]
}

impl Default for SpectrumBlock {
    fn default() -> Self {
        Self {
            g: spectrum_axis(),
            zeta_levels: None,
            chi_levels: None,
            convergence: None,
            fit_range: fit_range(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenormBlock {
    #[serde(default)]
    pub map: A2Map,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Dat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default)]
    pub directory: Option<PathBuf>,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Dat]
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: None,
            formats: all_formats(),
        }
    }
}

impl OutputBlock {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Command-line overrides applied on top of a configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.model.validate().map_err(|e| CliError::Config(format!("model: {e}")))?;
        if let Some(s) = &cfg.initial_state {
            if s.sites.len() != cfg.model.sites {
                return Err(CliError::Config(format!(
                    "initial_state.sites has {} entries but model.sites = {}",
                    s.sites.len(),
                    cfg.model.sites
                )));
            }
            for site in &s.sites {
                site.state()?;
            }
        }
        if let Some(p) = &cfg.evolution {
            p.validate().map_err(|e| CliError::Config(format!("evolution: {e}")))?;
        }
        if let Some(d) = &cfg.damping {
            d.validate().map_err(|e| CliError::Config(format!("damping: {e}")))?;
        }
        if let Some(t) = &cfg.truncation_check {
            if t.delta_n < 4 {
                return Err(CliError::Config("truncation_check.delta_n must be at least 4".into()));
            }
        }
        if let Some(s) = &cfg.sweep {
            if let Some(g) = &s.grid {
                g.validate().map_err(|e| CliError::Config(format!("sweep.grid: {e}")))?;
            }
        }
        if let Some(s) = &cfg.spectrum {
            s.g.validate("spectrum.g").map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(cfg)
    }

    pub fn initial_state(&self) -> InitialState {
        self.initial_state
            .clone()
            .unwrap_or_else(|| InitialState::default_for(self.model.sites))
    }

    /// Model with `n_max` materialized for the configured initial state.
    pub fn resolved_model(&self) -> ModelConfig {
        let mut m = self.model;
        m.n_max = Some(m.resolve_n_max(self.initial_state().nominal_photons()));
        m
    }

    pub fn plan(&self) -> EvolutionPlan {
        self.evolution.unwrap_or_else(|| EvolutionPlan::new(2e4))
    }

    pub fn output(&self) -> OutputBlock {
        self.output.clone().unwrap_or_default()
    }

    pub fn damping(&self, seed: Option<u64>) -> Option<DampingConfig> {
        self.damping.map(|mut d| {
            if let Some(s) = seed {
                d.master_seed = s;
            }
            d.jump_basis = Some(d.basis(self.model.g / self.model.omega0));
            d
        })
    }

    pub fn sweep_block(&self) -> SweepBlock {
        self.sweep.clone().unwrap_or(SweepBlock {
            preset: None,
            grid: None,
            truncation_delta: None,
            skip_truncation_check: false,
            start: None,
            checkpoint: None,
        })
    }

    pub fn grid(&self) -> GridSpec {
        let block = self.sweep_block();
        block.grid.unwrap_or(match block.preset {
            Some(GridPreset::Ci) => GridSpec::ci(),
            _ => GridSpec::default(),
        })
    }

    pub fn sweep_template(&self) -> SweepTemplate {
        let block = self.sweep_block();
        let defaults = SweepTemplate::default();
        SweepTemplate {
            omega0: self.model.omega0,
            omega_q: self.model.omega_q,
            d: self.model.d,
            jc_only: self.model.jc_only,
            n_max: self.model.n_max,
            truncation_delta: if block.skip_truncation_check {
                None
            } else {
                block.truncation_delta.or(defaults.truncation_delta)
            },
            start: block.start.unwrap_or(Site::Left),
        }
    }

    pub fn scan_settings(&self) -> ScanSettings {
        let block = self.spectrum.unwrap_or_default();
        let d = ScanSettings::default();
        ScanSettings {
            zeta_levels: block.zeta_levels.unwrap_or(d.zeta_levels),
            chi_levels: block.chi_levels.unwrap_or(d.chi_levels),
            omega0: self.model.omega0,
            omega_q: self.model.omega_q,
            convergence: block.convergence.unwrap_or(d.convergence),
        }
    }

    /// Output directory: `--out`, then `output.directory`, then `./out`.
    pub fn out_dir(&self, overrides: &Overrides) -> PathBuf {
        overrides
            .out
            .clone()
            .or_else(|| self.output().directory)
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Copy with every default relevant to `command` written out.
    pub fn resolved(&self, command: &str, overrides: &Overrides) -> RunConfig {
        let mut r = self.clone();
        r.version = Some(crate::VERSION.to_string());
        let mut output = self.output();
        output.directory = Some(self.out_dir(overrides));
        r.output = Some(output);
        match command {
            "evolve" | "trajectories" => {
                r.model = self.resolved_model();
                r.initial_state = Some(self.initial_state());
                r.evolution = Some(self.plan());
                r.damping = self.damping(overrides.seed);
            }
            "sweep" => {
                let mut block = self.sweep_block();
                let grid = self.grid();
                let template = self.sweep_template();
                block.grid = Some(grid);
                block.preset = None;
                block.truncation_delta = template.truncation_delta;
                block.skip_truncation_check = template.truncation_delta.is_none();
                block.start = Some(template.start);
                block.checkpoint = Some(block.checkpoint.unwrap_or_else(|| PathBuf::from("sweep_checkpoint.jsonl")));
                r.sweep = Some(block);
                r.evolution = Some(EvolutionPlan {
                    t_final: grid.t_final,
                    ..self.plan()
                });
            }
            "spectrum" => {
                let settings = self.scan_settings();
                let mut block = self.spectrum.unwrap_or_default();
                block.zeta_levels = Some(settings.zeta_levels);
                block.chi_levels = Some(settings.chi_levels);
                block.convergence = Some(settings.convergence);
                r.spectrum = Some(block);
            }
            "renorm" => {
                r.renorm = Some(self.renorm.unwrap_or_default());
            }
            _ => {}
        }
        r
    }
}
