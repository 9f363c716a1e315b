//! Run orchestration: configuration, starting triples, the level loop,
//! checkpoints and the report/CSV artifacts.

pub mod audit;
pub mod step;
pub mod verify;

use crate::error::PipelineError;
use crate::gluing::TimePartition;
use crate::ledger::{Ledger, LedgerLine};
use crate::operators::leray;
use crate::schedule::{
    check_b_beta, level_values, seed_from_euler_field, seed_scales, EnergyProfile, EulerSeries, IterationParams,
};
use crate::solver::{FnsIntegrator, SolverConfig};
use crate::spectral::snapshot::{read_series, write_series};
use crate::spectral::{random_smooth_field, Grid, PeriodicField, Rank, Space};
use crate::state::SeedKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use step::{run_step, CsvRow, LevelInput, LevelReport, StepSettings};

/// Smooth Euler data mollified at the seed scale; see [`crate::schedule::seed_from_euler_field`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EulerSeedConfig {
    /// Sup norm of the initial Euler velocity (grid units).
    pub amplitude: f64,
    /// Largest wavenumber component of the random initial data.
    pub modes: i64,
    /// Spectral decay exponent of the random initial data.
    pub decay: f64,
    /// ν_n = δ_n^{1+β'}.
    pub beta_prime: f64,
    /// Seed index n of the scale δ_n.
    pub level: u32,
    /// Seed of the random initial data.
    pub field_seed: u64,
    /// Time step of the Euler solve.
    pub dt: f64,
}

impl Default for EulerSeedConfig {
    fn default() -> Self {
        EulerSeedConfig { amplitude: 0.02, modes: 2, decay: 1.0, beta_prime: 0.3, level: 0, field_seed: 3, dt: 0.02 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    ZeroSeed,
    MollifiedEulerSeed(EulerSeedConfig),
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario::ZeroSeed
    }
}

/// Prescribed energy e(t), in the units of the iteration (δ₁/2 ≤ e ≤ δ₁ for a
/// normalized profile) on the grid time axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileSpec {
    /// The profile attached to the seed (Euler seed only).
    Seed,
    /// e ≡ value; δ₁ when omitted.
    Constant { value: Option<f64> },
    /// Linear from `start` at t = 0 to `end` at the horizon.
    Linear { start: f64, end: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: usize,
    pub q_max: u32,
    /// Horizon on the grid time axis; 2τ₀ when omitted.
    pub t_end: Option<f64>,
    /// Seed of the random test fields of the residual oracles.
    pub seed: u64,
    /// Equation viscosity on the grid; the scenario's own when omitted.
    pub nu_grid: Option<f64>,
    pub output: Option<PathBuf>,
    pub params: IterationParams,
    pub scenario: Scenario,
    /// The scenario's natural profile when omitted.
    pub profile: Option<ProfileSpec>,
    /// Second profile of the comparison mode.
    pub compare_profile: Option<ProfileSpec>,
    pub step: StepSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: 64,
            q_max: 0,
            t_end: None,
            seed: 20240917,
            nu_grid: None,
            output: None,
            params: IterationParams::default(),
            scenario: Scenario::ZeroSeed,
            profile: None,
            compare_profile: None,
            step: StepSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<RunConfig, PipelineError> {
        RunConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn horizon(&self) -> Result<f64, PipelineError> {
        Ok(match self.t_end {
            Some(t) => t,
            None => 2.0 * level_values(&self.params, 0)?.tau_grid,
        })
    }

    /// Digest of everything that influences the numbers (the output path excluded).
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let text = toml::to_string(&c).expect("configuration serializes");
        hex(&Sha256::digest(text.as_bytes()))
    }

    /// Schedule predicates, grid resolution and profile checks, evaluated before any solve.
    pub fn validate(&self) -> Result<Ledger, PipelineError> {
        self.params.validate()?;
        if self.grid < 8 || self.grid % 2 != 0 {
            return Err(PipelineError::Config(format!("grid {} must be even and at least 8", self.grid)));
        }
        if self.step.samples_per_tau < 6 {
            return Err(PipelineError::Config("samples_per_tau must be at least 6".into()));
        }
        let t_end = self.horizon()?;
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(PipelineError::Config(format!("horizon {t_end} must be positive")));
        }
        let g = Grid::two_thirds(self.grid)?;
        let mut ledger = Ledger::default();
        let (ok, margin) = check_b_beta(&self.params);
        ledger.push(
            LedgerLine::ge("config.b_beta", margin, 0.0)
                .note(if ok { "b, β satisfy the scheme's compatibility condition" } else { "b, β outside the proven regime" }),
        );
        for q in 0..=self.q_max + 1 {
            let lv = level_values(&self.params, q)?;
            ledger.extend(lv.ledger.clone());
        }
        for q in 0..=self.q_max {
            let lv = level_values(&self.params, q)?;
            let k_max = self.step.perturbation.resolve_k_max(g, lv.freq_next);
            ledger.push(LedgerLine::ge(format!("config.mikado_truncation.q{q}"), k_max, 1.0).hard());
            if k_max < 1.0 {
                return Err(PipelineError::Config(format!(
                    "level {q}: frequency {} leaves no Mikado modes below the {}³ grid cutoff",
                    lv.freq_next, self.grid
                )));
            }
        }
        if let Some(p) = &self.profile {
            self.check_profile(p)?;
        }
        if let Some(p) = &self.compare_profile {
            self.check_profile(p)?;
        }
        Ok(ledger)
    }

    fn check_profile(&self, p: &ProfileSpec) -> Result<(), PipelineError> {
        match (p, &self.scenario) {
            (ProfileSpec::Seed, Scenario::ZeroSeed) => {
                Err(PipelineError::Config("the zero seed defines no energy profile".into()))
            }
            (ProfileSpec::Constant { value: Some(v) }, _) if !(*v > 0.0) => {
                Err(PipelineError::Config(format!("energy {v} must be positive")))
            }
            (ProfileSpec::Linear { start, end }, _) if !(*start > 0.0 && *end > 0.0) => {
                Err(PipelineError::Config("linear profile values must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedSummary {
    pub kind: SeedKind,
    pub nu_grid: f64,
    pub commutator_norm: f64,
    pub dissipative_norm: f64,
    /// Sample spacing of the Euler solve, when there is one.
    pub spacing: f64,
    pub ledger: Ledger,
}

/// Level 0 data derived from the scenario.
pub struct StartingPoint {
    pub summary: SeedSummary,
    /// Equation viscosity of the run on the grid.
    pub nu: f64,
    /// v₀ at the gluing times of level 0.
    pub gluing_initial: Vec<PeriodicField>,
    pub profile: Option<EnergyProfile>,
}

fn euler_initial(g: Grid, cfg: &EulerSeedConfig) -> Result<PeriodicField, PipelineError> {
    let u = leray(&random_smooth_field(g, Rank::Vector, cfg.modes, cfg.decay, cfg.field_seed))?;
    let s = u.sup_norm();
    if cfg.amplitude == 0.0 || s == 0.0 {
        return Ok(PeriodicField::zeros(g, Rank::Vector, Space::Modes));
    }
    Ok(u.scale(cfg.amplitude / s))
}

/// Build the starting triple of level 0 on [0, t_end].
pub fn starting_point(config: &RunConfig, t_end: f64) -> Result<StartingPoint, PipelineError> {
    let g = Grid::two_thirds(config.grid)?;
    let params = &config.params;
    let lv = level_values(params, 0)?;
    let partition = TimePartition::new(lv.tau_grid, t_end).map_err(|e| PipelineError::Config(e.to_string()))?;
    let count = partition.count();
    match &config.scenario {
        Scenario::ZeroSeed => {
            let nu = config.nu_grid.unwrap_or_else(|| params.nu_grid());
            Ok(StartingPoint {
                summary: SeedSummary {
                    kind: SeedKind::ZeroSeed,
                    nu_grid: nu,
                    commutator_norm: 0.0,
                    dissipative_norm: 0.0,
                    spacing: 0.0,
                    ledger: Ledger::default(),
                },
                nu,
                gluing_initial: vec![PeriodicField::zeros(g, Rank::Vector, Space::Modes); count],
                profile: None,
            })
        }
        Scenario::MollifiedEulerSeed(cfg) => {
            let sc = seed_scales(params, cfg.level, cfg.beta_prime);
            // τ₀/k no coarser than δ/4, so that every gluing time is an Euler sample
            let per_tau = (lv.tau_grid / (sc.delta_grid / 4.0)).ceil().max(1.0) as usize;
            let spacing = lv.tau_grid / per_tau as f64;
            let reach = (sc.delta_grid / spacing).floor() as usize;
            let last = (t_end / spacing).ceil() as usize + 1;
            let t0 = -(reach as f64) * spacing;
            let total = last + 2 * reach;
            let mut solver = SolverConfig {
                dt: cfg.dt.min(spacing),
                horizon: total as f64 * spacing,
                horizon_constant: None,
                alpha: params.alpha,
                ..config.step.solver.clone()
            };
            solver.sample_interval = spacing;
            let u0 = euler_initial(g, cfg)?;
            let mut integ = FnsIntegrator::new(&u0, 0.0, params.gamma, t0, &solver)
                .map_err(|e| PipelineError::Stage { level: 0, stage: "seed", message: e.to_string() })?;
            let mut velocity = Vec::with_capacity(total + 1);
            for j in 0..=total {
                integ
                    .advance_to(t0 + j as f64 * spacing)
                    .map_err(|e| PipelineError::Stage { level: 0, stage: "seed", message: e.to_string() })?;
                velocity.push(integ.velocity().clone());
            }
            let euler = EulerSeries { t0, spacing, velocity };
            let seed = seed_from_euler_field(&euler, params, cfg.level, cfg.beta_prime)?;
            let gluing_initial = (0..count).map(|i| seed.series.triples[i * per_tau].v.clone()).collect();
            let nu = config.nu_grid.unwrap_or(seed.nu_grid);
            Ok(StartingPoint {
                summary: SeedSummary {
                    kind: seed.kind,
                    nu_grid: seed.nu_grid,
                    commutator_norm: seed.commutator_norm,
                    dissipative_norm: seed.dissipative_norm,
                    spacing,
                    ledger: seed.ledger,
                },
                nu,
                gluing_initial,
                profile: seed.energy,
            })
        }
    }
}

/// The energy profile of a run on [0, t_end].
pub fn build_profile(
    spec: &ProfileSpec,
    params: &IterationParams,
    seed: Option<&EnergyProfile>,
    t_end: f64,
) -> Result<EnergyProfile, PipelineError> {
    match spec {
        ProfileSpec::Seed => {
            seed.cloned().ok_or_else(|| PipelineError::Config("the scenario defines no energy profile".into()))
        }
        ProfileSpec::Constant { value } => {
            let v = match value {
                Some(v) => *v,
                None => level_values(params, 0)?.delta_next,
            };
            Ok(EnergyProfile::constant(0.0, t_end, v))
        }
        ProfileSpec::Linear { start, end } => {
            let slope = (end - start) / t_end;
            Ok(EnergyProfile::from_fn(0.0, t_end, 64, slope.abs(), |t| start + slope * t)?)
        }
    }
}

fn default_profile(config: &RunConfig) -> ProfileSpec {
    match config.scenario {
        Scenario::ZeroSeed => ProfileSpec::Constant { value: None },
        Scenario::MollifiedEulerSeed(_) => ProfileSpec::Seed,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub grid: usize,
    pub q_max: u32,
    pub t_end: f64,
    pub nu_grid: f64,
    pub config_digest: String,
    /// True when no hard ledger line failed.
    pub pass: bool,
    pub hard_failures: Vec<String>,
    pub soft_failures: Vec<String>,
    pub validation: Ledger,
    pub seed: SeedSummary,
    pub levels: Vec<LevelReport>,
}

impl RunReport {
    fn summarize(&mut self) {
        let mut all = Ledger::default();
        all.extend(self.validation.clone());
        all.extend(self.seed.ledger.clone());
        for l in &self.levels {
            all.extend(l.ledger.clone());
        }
        self.hard_failures = all.hard_failures().iter().map(|l| l.id.clone()).collect();
        self.soft_failures = all.soft_failures().iter().map(|l| l.id.clone()).collect();
        self.pass = self.hard_failures.is_empty();
    }

    pub fn to_toml(&self) -> Result<String, PipelineError> {
        toml::to_string(self).map_err(|e| PipelineError::Config(format!("report serialization: {e}")))
    }

    pub fn digest(&self) -> Result<String, PipelineError> {
        Ok(hex(&Sha256::digest(self.to_toml()?.as_bytes())))
    }

    /// Digest of the level blocks only, independent of how the scenario is labelled.
    pub fn levels_digest(&self) -> Result<String, PipelineError> {
        #[derive(Serialize)]
        struct Levels<'a> {
            levels: &'a [LevelReport],
        }
        let text = toml::to_string(&Levels { levels: &self.levels })
            .map_err(|e| PipelineError::Config(format!("report serialization: {e}")))?;
        Ok(hex(&Sha256::digest(text.as_bytes())))
    }
}

/// Everything needed to continue a run after level `next_level − 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct CheckpointState {
    config_digest: String,
    next_level: u32,
    nu: f64,
    t_end: f64,
    profile: EnergyProfile,
    report: RunReport,
}

const CHECKPOINT_DIR: &str = "checkpoint";

fn checkpoint_paths(out: &Path) -> (PathBuf, PathBuf) {
    let dir = out.join(CHECKPOINT_DIR);
    (dir.join("state.toml"), dir.join("velocity.bin"))
}

fn write_checkpoint(out: &Path, state: &CheckpointState, times: &[f64], fields: &[PeriodicField]) -> Result<(), PipelineError> {
    let (state_path, series_path) = checkpoint_paths(out);
    std::fs::create_dir_all(state_path.parent().expect("checkpoint directory"))?;
    let series: Vec<(f64, PeriodicField)> = times.iter().copied().zip(fields.iter().cloned()).collect();
    let mut f = std::io::BufWriter::new(std::fs::File::create(&series_path)?);
    write_series(&mut f, &series)?;
    let text = toml::to_string(state).map_err(|e| PipelineError::Config(format!("checkpoint serialization: {e}")))?;
    std::fs::write(state_path, text)?;
    Ok(())
}

fn read_checkpoint(out: &Path) -> Result<Option<(CheckpointState, Vec<PeriodicField>)>, PipelineError> {
    let (state_path, series_path) = checkpoint_paths(out);
    if !state_path.exists() {
        return Ok(None);
    }
    let state: CheckpointState = toml::from_str(&std::fs::read_to_string(&state_path)?)
        .map_err(|e| PipelineError::Config(format!("checkpoint {}: {e}", state_path.display())))?;
    let mut f = std::io::BufReader::new(std::fs::File::open(&series_path)?);
    let fields = read_series(&mut f)?.into_iter().map(|(_, v)| v).collect();
    Ok(Some((state, fields)))
}

pub fn write_csv(path: &Path, rows: &[CsvRow]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>, PipelineError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<Vec<CsvRow>, _>>()
        .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Directory for the report, CSV series and checkpoints; nothing is written when `None`.
    pub out: Option<PathBuf>,
    /// Continue from the checkpoint in `out` when it belongs to the same configuration.
    pub resume: bool,
    /// Stop after this many levels (used to produce a partial run to resume from).
    pub stop_after: Option<u32>,
}

pub struct RunOutcome {
    pub report: RunReport,
    /// CSV rows per level run in this invocation, keyed by q + 1.
    pub series: Vec<(u32, Vec<CsvRow>)>,
    /// Wall time in seconds per level run in this invocation.
    pub timing: Vec<(u32, f64)>,
}

/// Run levels q = 0..=q_max. Hard ledger failures are reported, not raised;
/// errors are reserved for aborts (invalid configuration, failed solves,
/// perturbation outside its admissible range).
pub fn run(config: &RunConfig, options: &RunOptions) -> Result<RunOutcome, PipelineError> {
    let validation = config.validate()?;
    let t_end = config.horizon()?;
    let digest = config.digest();
    let g = Grid::two_thirds(config.grid)?;
    let mut settings = config.step.clone();
    settings.weak_seed = config.seed;

    let resumed = match (&options.out, options.resume) {
        (Some(out), true) => match read_checkpoint(out)? {
            Some((state, _)) if state.config_digest != digest => {
                return Err(PipelineError::Config(format!(
                    "checkpoint in {} belongs to configuration {}, not {digest}",
                    out.display(),
                    state.config_digest
                )))
            }
            found => found,
        },
        _ => None,
    };
    let (mut report, mut initial, profile, nu, first) = match resumed {
        Some((state, fields)) => (state.report, fields, state.profile, state.nu, state.next_level),
        None => {
            let start = starting_point(config, t_end)?;
            let spec = config.profile.clone().unwrap_or_else(|| default_profile(config));
            let profile = build_profile(&spec, &config.params, start.profile.as_ref(), t_end)?;
            let report = RunReport {
                scenario: match config.scenario {
                    Scenario::ZeroSeed => "zero_seed".into(),
                    Scenario::MollifiedEulerSeed(_) => "mollified_euler_seed".into(),
                },
                grid: config.grid,
                q_max: config.q_max,
                t_end,
                nu_grid: start.nu,
                config_digest: digest.clone(),
                pass: true,
                hard_failures: Vec::new(),
                soft_failures: Vec::new(),
                validation,
                seed: start.summary,
                levels: Vec::new(),
            };
            (report, start.gluing_initial, profile, start.nu, 0)
        }
    };
    if let Some(out) = &options.out {
        std::fs::create_dir_all(out)?;
    }

    let mut series = Vec::new();
    let mut timing = Vec::new();
    let last = match options.stop_after {
        Some(n) => config.q_max.min(first + n.max(1) - 1),
        None => config.q_max,
    };
    for q in first..=last {
        let clock = std::time::Instant::now();
        let lv = level_values(&config.params, q)?;
        let next_tau = level_values(&config.params, q + 1)?.tau_grid;
        let reference = initial.iter().enumerate().map(|(i, v)| (i as f64 * lv.tau_grid, v.clone())).collect();
        let input = LevelInput {
            q,
            grid: g,
            t_end,
            nu,
            gluing_initial: std::mem::take(&mut initial),
            reference,
            energy: profile.clone(),
            next_tau: Some(next_tau),
        };
        let out = run_step(&config.params, &input, &settings)?;
        timing.push((q, clock.elapsed().as_secs_f64()));
        initial = out.next_initial;
        report.levels.push(out.report);
        report.summarize();
        if let Some(dir) = &options.out {
            write_csv(&dir.join(format!("level_{}.csv", q + 1)), &out.rows)?;
            let times: Vec<f64> = (0..initial.len()).map(|i| i as f64 * next_tau).collect();
            let state = CheckpointState {
                config_digest: digest.clone(),
                next_level: q + 1,
                nu,
                t_end,
                profile: profile.clone(),
                report: report.clone(),
            };
            write_checkpoint(dir, &state, &times, &initial)?;
        }
        series.push((q + 1, out.rows));
    }
    report.summarize();
    if let Some(dir) = &options.out {
        std::fs::write(dir.join("report.toml"), report.to_toml()?)?;
        let mut t = String::new();
        for (q, s) in &timing {
            t.push_str(&format!("level_{q} = {s}\n"));
        }
        std::fs::write(dir.join("timing.toml"), t)?;
    }
    Ok(RunOutcome { report, series, timing })
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfileComparison {
    pub e0_a: f64,
    pub e0_b: f64,
    pub digest_initial_a: String,
    pub digest_initial_b: String,
    pub identical_initial: bool,
    /// max_t |⨍|v₁ᵃ|² − ⨍|v₁ᵇ|²|
    pub max_energy_difference: f64,
    /// max_t |e_a − e_b|
    pub max_profile_difference: f64,
}

/// Run level 0 under the configured profile and under `compare_profile`.
pub fn compare_profiles(config: &RunConfig) -> Result<ProfileComparison, PipelineError> {
    let other = config
        .compare_profile
        .clone()
        .ok_or_else(|| PipelineError::Config("compare_profile is not set".into()))?;
    let mut a = config.clone();
    a.q_max = 0;
    a.output = None;
    a.compare_profile = None;
    let mut b = a.clone();
    b.profile = Some(other);
    let opts = RunOptions::default();
    let ra = run(&a, &opts)?;
    let rb = run(&b, &opts)?;
    let rows_a = &ra.series[0].1;
    let rows_b = &rb.series[0].1;
    let diff = |f: &dyn Fn(&CsvRow) -> f64| {
        rows_a.iter().zip(rows_b).map(|(x, y)| (f(x) - f(y)).abs()).fold(0.0, f64::max)
    };
    let la = &ra.report.levels[0];
    let lb = &rb.report.levels[0];
    Ok(ProfileComparison {
        e0_a: rows_a[0].target_e,
        e0_b: rows_b[0].target_e,
        digest_initial_a: la.digest_initial.clone(),
        digest_initial_b: lb.digest_initial.clone(),
        identical_initial: la.digest_initial == lb.digest_initial,
        max_energy_difference: diff(&|r| r.kinetic_energy),
        max_profile_difference: diff(&|r| r.target_e),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CsvAudit {
    pub file: String,
    pub samples: usize,
    pub max_increase: f64,
    pub increases: usize,
    /// Largest |e_tot − (½ kinetic + dissipation)| in the file.
    pub consistency: f64,
}

/// Monotonicity of the e_tot column of every level CSV in `dir`.
pub fn audit_directory(dir: &Path) -> Result<Vec<CsvAudit>, PipelineError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("level_") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        let rows = read_csv(&f)?;
        let e_tot: Vec<f64> = rows.iter().map(|r| r.e_tot).collect();
        let mut running = f64::NEG_INFINITY;
        let mut max_increase: f64 = if rows.len() > 1 { f64::NEG_INFINITY } else { 0.0 };
        for &x in &e_tot {
            if running > f64::NEG_INFINITY {
                max_increase = max_increase.max(x - running);
            }
            running = running.max(x);
        }
        let consistency = rows
            .iter()
            .map(|r| (r.e_tot - 0.5 * r.kinetic_energy - r.dissipation_integral).abs())
            .fold(0.0, f64::max);
        out.push(CsvAudit {
            file: f.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string(),
            samples: rows.len(),
            max_increase,
            increases: e_tot.windows(2).filter(|w| w[1] > w[0]).count(),
            consistency,
        });
    }
    Ok(out)
}
