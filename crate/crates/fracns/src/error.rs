use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("grid size {0} must be even and at least 8")]
    BadGridSize(usize),
    #[error("dealias fraction {0} must lie in (0, 1]")]
    BadDealias(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("exponent {exponent} needs derivatives of order {order}, beyond the resolvable order {max}")]
    Unresolvable { exponent: f64, order: usize, max: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("field has a non-negligible mean {0:e}")]
    NonzeroMean(f64),
    #[error("snapshot format: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("a^(b^q) overflows at q = {q}; largest feasible level is {max_q}")]
    Overflow { q: u32, max_q: u32 },
    #[error("parameter out of range: {0}")]
    Param(String),
    #[error("energy profile violates {bound}: {detail}")]
    Profile { bound: &'static str, detail: String },
    #[error("time sampling too coarse: spacing {spacing} vs mollification scale {scale}")]
    CoarseSampling { spacing: f64, scale: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("CFL violation at t = {t}: dt = {dt} exceeds limit {limit}")]
    Cfl { t: f64, dt: f64, limit: f64 },
    #[error("blow-up detected; last valid time {last_valid_time}")]
    BlowUp { last_valid_time: f64 },
    #[error("horizon {horizon} exceeds the admissible local existence time {admissible}")]
    Horizon { horizon: f64, admissible: f64 },
    #[error("initial velocity is not divergence free (residual {0:e})")]
    NotDivergenceFree(f64),
    #[error("requested time {t} lies outside the available window [{start}, {end}]")]
    Window { t: f64, start: f64, end: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Error)]
pub enum MikadoError {
    #[error("matrix lies outside the admissible ball: |R - Id| = {0}")]
    OutsideBall(f64),
    #[error("pipes {0} and {1} overlap (separation {2} below {3})")]
    Overlap(usize, usize, f64, f64),
    #[error("zero wavevector has no potential")]
    ZeroMode,
    #[error("coefficient is not orthogonal to its wavevector (a.k = {0:e})")]
    NotOrthogonal(f64),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Error)]
pub enum GluingError {
    #[error("local solve for interval {index} failed: {source}")]
    LocalSolve {
        index: usize,
        #[source]
        source: SolverError,
    },
    #[error("velocity difference between solutions {0} and {1} has mean {2:e}")]
    MeanMismatch(usize, usize, f64),
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Error)]
pub enum PerturbationError {
    #[error("conjugated stress leaves the admissible ball at t = {t}, point {point:?} (distance {distance})")]
    OutsideBall { t: f64, point: [usize; 3], distance: f64 },
    #[error("energy gap is not positive at t = {t}: e - |v|^2 = {gap}, need more than {need}")]
    EnergyGap { t: f64, gap: f64, need: f64 },
    #[error("oscillation frequency {freq} exceeds grid Nyquist {nyquist}; use a larger grid or a smaller `a`")]
    Nyquist { freq: f64, nyquist: f64 },
    #[error("invalid cutoff family: {0}")]
    Cutoffs(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Mikado(#[from] MikadoError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Gluing(#[from] GluingError),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("level {level}, stage {stage}: {message}")]
    Stage { level: u32, stage: &'static str, message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}
