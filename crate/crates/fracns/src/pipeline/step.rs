//! One iteration step q → q+1, streamed over uniformly spaced sample times:
//! glue exact local solutions, transport the flows Φ_i, pump energy through
//! the Mikado perturbation and assemble the new triple. Only a five-sample
//! window of fields is held in memory; everything else is reduced on the fly.

use super::audit::{dissipation_audit, dissipation_rate};
use crate::error::PipelineError;
use crate::gluing::{cfl_gate, gluing_ledger, Gluer, GluingDiagnostics, TimePartition};
use crate::ledger::{Ledger, LedgerLine};
use crate::mikado::{compute_m, sample_ball, MConstant, MikadoFamily};
use crate::perturbation::{
    assemble_next, GluedSlice, PerturbationConfig, PerturbationSample, Perturber,
    PumpInput, PumpStats,
};
use crate::schedule::{inductive_estimates, level_values, EnergyProfile, IterationParams, LevelValues, Units};
use crate::solver::{FlowIntegrator, FlowQuality, SampledField, SolverConfig, TimeField};
use crate::spectral::{jacobian_values, mollify, snapshot::write_field, Grid, PeriodicField};
use crate::weak_form::WeakFormOracle;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, VecDeque};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepSettings {
    /// Sample times per τ_q; a multiple of 3 puts the cutoff hand-over windows on samples.
    pub samples_per_tau: usize,
    /// Random divergence-free test fields of the weak-form residual.
    pub weak_fields: usize,
    /// Seed of those test fields; a run sets it from its own seed.
    #[serde(skip)]
    pub weak_seed: u64,
    /// Matrices sampled from the ball when fitting M̄.
    pub ball_samples: usize,
    pub ball_seed: u64,
    pub perturbation: PerturbationConfig,
    /// Local solves and flow maps; `dt` is capped by the sample spacing.
    pub solver: SolverConfig,
}

impl Default for StepSettings {
    fn default() -> Self {
        StepSettings {
            samples_per_tau: 96,
            weak_fields: 20,
            weak_seed: 20240917,
            ball_samples: 100,
            ball_seed: 7,
            perturbation: PerturbationConfig::default(),
            solver: SolverConfig { horizon_constant: Some(0.1), ..SolverConfig::default() },
        }
    }
}

/// State of level q consumed by the step.
pub struct LevelInput {
    pub q: u32,
    pub grid: Grid,
    pub t_end: f64,
    /// Grid viscosity of the equation.
    pub nu: f64,
    /// v_q at the gluing times t_i = iτ_q.
    pub gluing_initial: Vec<PeriodicField>,
    /// Optional samples of v_q used for the gluing diagnostics.
    pub reference: Vec<(f64, PeriodicField)>,
    /// Prescribed energy e(t) on the grid time axis.
    pub energy: EnergyProfile,
    /// Gluing spacing of the following level, when one is run.
    pub next_tau: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub t: f64,
    pub kinetic_energy: f64,
    pub target_e: f64,
    pub dissipation_integral: f64,
    pub e_tot: f64,
    #[serde(rename = "R_norm_0")]
    pub r_norm_0: f64,
    pub v_norm_1: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelReport {
    pub q: u32,
    pub grid: usize,
    pub samples: usize,
    pub spacing: f64,
    pub t_end: f64,
    pub nu_grid: f64,
    pub level: LevelValues,
    pub next_frequency: u64,
    pub k_max: f64,
    pub half_modes: usize,
    pub m_constant: MConstant,
    pub c0: f64,
    pub rho_q_min: f64,
    pub rho_q_max: f64,
    pub weak_residual_glued: f64,
    pub weak_residual_next: f64,
    pub glued_stress: f64,
    pub next_stress: f64,
    pub max_divergence: f64,
    pub max_trace: f64,
    pub perturbation_sup: f64,
    pub perturbation_c1: f64,
    pub energy_tracking: f64,
    pub dissipative_stress: f64,
    pub pump: PumpStats,
    pub min_flow_det: f64,
    pub gluing: GluingDiagnostics,
    pub digest_initial: String,
    pub digest_final: String,
    pub ledger: Ledger,
}

pub struct LevelOutput {
    pub report: LevelReport,
    pub rows: Vec<CsvRow>,
    /// v_{q+1} at the gluing times of the next level.
    pub next_initial: Vec<PeriodicField>,
}

pub fn field_digest(f: &PeriodicField) -> String {
    let mut bytes = Vec::new();
    write_field(&mut bytes, f).expect("writing to memory cannot fail");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Window {
    j: usize,
    t: f64,
    v: PeriodicField,
    p: PeriodicField,
    r: PeriodicField,
    pump: PerturbationSample,
}

struct Reduction {
    rows: Vec<CsvRow>,
    rates: Vec<f64>,
    max_divergence: f64,
    max_trace: f64,
    next_stress: f64,
    w_sup: f64,
    w_grad: f64,
    energy_tracking: f64,
    dissipative_stress: f64,
    v_diff: f64,
    digest_initial: String,
    digest_final: String,
    ledger: Ledger,
    ring: Option<SampledField>,
    targets: VecDeque<f64>,
    next_initial: Vec<PeriodicField>,
}

fn stage(q: u32, stage: &'static str) -> impl Fn(String) -> PipelineError {
    move |message| PipelineError::Stage { level: q, stage, message }
}

fn gradient_sup(v: &PeriodicField) -> Result<f64, PipelineError> {
    let jac = jacobian_values(v)?;
    let mut m: f64 = 0.0;
    for p in 0..v.grid().len() {
        let mut s = 0.0;
        for row in &jac {
            for c in row {
                s += c[p] * c[p];
            }
        }
        m = m.max(s.sqrt());
    }
    Ok(m)
}

/// M̄ over sampled ball matrices for the given truncation, and the resulting M.
pub fn fit_m(family: &MikadoFamily, k_max: f64, samples: usize, seed: u64) -> Result<MConstant, PipelineError> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mats: Vec<_> = (0..samples).map(|_| sample_ball(&mut rng, 0.5)).collect();
    let fourier = family.fourier_data(k_max);
    let m_bar = fourier.decay_constant(family, &mats).map_err(|e| stage(0, "mikado")(e.to_string()))?;
    Ok(compute_m(m_bar, k_max))
}

/// Run one step q → q+1.
pub fn run_step(params: &IterationParams, input: &LevelInput, settings: &StepSettings) -> Result<LevelOutput, PipelineError> {
    let q = input.q;
    let g = input.grid;
    let lv = level_values(params, q)?;
    let tau = lv.tau_grid;
    let spt = settings.samples_per_tau.max(3);
    let h = tau / spt as f64;
    let last = (input.t_end / h - 1e-9).ceil() as usize;
    if last < 4 {
        return Err(PipelineError::Config("a step needs at least five sample times".into()));
    }
    let t_of = |j: usize| j as f64 * h;
    let t_end = t_of(last);
    let partition = TimePartition::new(tau, t_end).map_err(|e| stage(q, "partition")(e.to_string()))?;
    if input.gluing_initial.len() < partition.count() {
        return Err(PipelineError::Config(format!(
            "level {q} needs {} gluing initial fields, got {}",
            partition.count(),
            input.gluing_initial.len()
        )));
    }

    let family = MikadoFamily::standard().map_err(|e| stage(q, "mikado")(e.to_string()))?;
    let eta = settings.perturbation.cutoffs(tau, t_end).map_err(|e| stage(q, "cutoffs")(e.to_string()))?;
    let perturber = Perturber::new(family.clone(), g, lv.freq_next, eta, lv_next2(params, q)?, &settings.perturbation)
        .map_err(|e| stage(q, "perturbation")(e.to_string()))?;
    let m_const = fit_m(&family, perturber.k_max, settings.ball_samples, settings.ball_seed)?;
    let c0 = eta.c0(g, 4 * spt * partition.count());

    let mut local = settings.solver.clone();
    local.dt = local.dt.min(h);
    let ell = lv.ell_grid;
    let initial = &input.gluing_initial;
    let mut gluer = Gluer::new(partition, input.nu, params.gamma, params.alpha, &local, |i, _t| {
        Ok(mollify(&initial[i], ell)?.field)
    });
    let mut ledger = Ledger::default();
    for (i, v) in initial.iter().take(partition.count()).enumerate() {
        let v_ell = mollify(v, ell)?.field;
        let mut line = cfl_gate(&v_ell, &lv, params.alpha)?;
        line.id = format!("gluing.cfl_gate.t{i}");
        ledger.push(line);
    }

    let mut weak_glued = WeakFormOracle::new(g, 0.0, t_end, input.nu, params.gamma, settings.weak_fields, settings.weak_seed)?;
    let mut weak_next = WeakFormOracle::new(g, 0.0, t_end, input.nu, params.gamma, settings.weak_fields, settings.weak_seed)?;

    // Φ_i is anchored a few samples before supp η_i so that the time stencils
    // around every sample with η_i ≠ 0 find it
    let reach = 4.0 * h;
    let anchor = |i: usize| {
        let (a, _) = eta.support(i);
        if a - reach <= 0.0 {
            0
        } else {
            ((a - reach) / h + 1e-9).floor() as usize
        }
    };
    let mut flows: BTreeMap<usize, FlowIntegrator> = BTreeMap::new();
    let mut launched = 0usize;
    let mut velocity: Option<SampledField> = None;
    let mut quality = FlowQuality { min_det: f64::INFINITY, det_defect: 0.0, gradient_deviation: 0.0 };

    let mut red = Reduction {
        rows: Vec::with_capacity(last + 1),
        rates: Vec::with_capacity(last + 1),
        max_divergence: 0.0,
        max_trace: 0.0,
        next_stress: 0.0,
        w_sup: 0.0,
        w_grad: 0.0,
        energy_tracking: 0.0,
        dissipative_stress: 0.0,
        v_diff: 0.0,
        digest_initial: String::new(),
        digest_final: String::new(),
        ledger: Ledger::default(),
        ring: None,
        targets: VecDeque::new(),
        next_initial: Vec::new(),
    };
    if let Some(tn) = input.next_tau {
        // one spare gluing time covers a slightly longer rounded horizon at the next level
        let p = TimePartition::new(tn, t_end + tn).map_err(|e| stage(q + 1, "partition")(e.to_string()))?;
        red.targets = (0..p.count()).map(|i| p.t(i)).collect();
    }

    let mut window: VecDeque<Window> = VecDeque::with_capacity(6);
    let mut glued_stress: f64 = 0.0;
    let mut pump = PumpStats::default();
    let (mut rho_min, mut rho_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let lv1 = level_values(params, q + 1)?;
    let ctx = Ctx { params, input, lv1: &lv1, perturber: &perturber, h, last, tau };

    for j in 0..=last {
        let t = t_of(j);
        let reference = input
            .reference
            .iter()
            .find(|(s, _)| (s - t).abs() < 1e-9 * (1.0 + t.abs()))
            .map(|(_, v)| mollify(v, ell).map(|m| m.field))
            .transpose()?;
        let glued = gluer.sample(t, reference.as_ref()).map_err(|e| stage(q, "gluing")(e.to_string()))?;
        glued_stress = glued_stress.max(glued.r.sup_norm());
        weak_glued.push(t, &glued.v, &glued.r)?;

        match velocity.as_mut() {
            None => velocity = Some(SampledField::new(t, h, vec![glued.v.clone()]).map_err(|e| stage(q, "flow")(e.to_string()))?),
            Some(s) => s.push(glued.v.clone(), 6),
        }
        let vel = velocity.as_ref().expect("initialized above");
        while launched < eta.count() && anchor(launched) <= j {
            let mut cfg = local.clone();
            let (_, b) = eta.support(launched);
            cfg.horizon = (b + reach).min(t_end) - t_of(anchor(launched)) + 2.0 * h;
            cfg.horizon_constant = None;
            let f = FlowIntegrator::new(g, t_of(anchor(launched)), &cfg).map_err(|e| stage(q, "flow")(e.to_string()))?;
            flows.insert(launched, f);
            launched += 1;
        }
        for (i, f) in flows.iter_mut() {
            f.advance_to(t, vel as &dyn TimeField)
                .map_err(|e| stage(q, "flow")(format!("Φ_{i}: {e}")))?;
        }
        flows.retain(|&i, _| eta.support(i).1 + reach + h > t);

        let active: Vec<usize> = eta.active_within(t, reach);
        let mut flow_refs = Vec::with_capacity(active.len());
        let strict = eta.active(t);
        for &i in &active {
            let f = flows
                .get(&i)
                .ok_or_else(|| stage(q, "flow")(format!("Φ_{i} is not live at t = {t}")))?;
            if strict.contains(&i) {
                quality = quality.merge(FlowQuality::of(f.displacement()).map_err(|e| stage(q, "flow")(e.to_string()))?);
            }
            flow_refs.push((i, f.displacement()));
        }
        let pin = PumpInput {
            t,
            stress: &glued.r,
            glued_energy: glued.v.mean_square(),
            target_energy: input.energy.eval(t),
            flows: flow_refs,
        };
        let ps = perturber.perturb(&pin).map_err(|e| stage(q, "perturbation")(e.to_string()))?;
        pump = pump.merge(ps.stats);
        rho_min = rho_min.min(ps.rho_q);
        rho_max = rho_max.max(ps.rho_q);

        window.push_back(Window { j, t, v: glued.v, p: glued.p, r: glued.r, pump: ps });
        if window.len() > 5 {
            window.pop_front();
        }
        if j == 4 {
            for k in 0..3 {
                assemble(&ctx, &window, k, &mut red, &mut weak_next)?;
            }
        } else if j > 4 {
            assemble(&ctx, &window, 2, &mut red, &mut weak_next)?;
        }
        if j == last {
            assemble(&ctx, &window, 3, &mut red, &mut weak_next)?;
            assemble(&ctx, &window, 4, &mut red, &mut weak_next)?;
        }
    }

    let glued_report = weak_glued.finish();
    let next_report = weak_next.finish();
    let times: Vec<f64> = red.rows.iter().map(|r| r.t).collect();
    let energy: Vec<f64> = red.rows.iter().map(|r| r.kinetic_energy).collect();
    let audit = dissipation_audit(&times, &energy, &red.rates);
    for (row, (d, e)) in red.rows.iter_mut().zip(audit.dissipation_integral.iter().zip(&audit.e_tot)) {
        row.dissipation_integral = *d;
        row.e_tot = *e;
    }

    let gluing = gluer.diagnostics;
    ledger.extend(gluing_ledger(&gluing, &lv, params.alpha));
    ledger.extend(std::mem::take(&mut red.ledger));
    let dn = lv.delta_next;
    let w_c1 = red.w_sup + red.w_grad / lv.freq_next as f64;
    ledger.push(LedgerLine::le("step.divergence", red.max_divergence, 1e-10).hard());
    ledger.push(LedgerLine::le("step.trace", red.max_trace, 1e-8).hard());
    ledger.push(LedgerLine::le("step.ball", pump.max_ball_distance, 0.5).hard());
    ledger.push(LedgerLine::le("step.perturbation_sup", red.w_sup, 0.5 * m_const.m * dn.sqrt()));
    ledger.push(LedgerLine::le("step.perturbation_c1", w_c1, 0.5 * m_const.m * dn.sqrt()));
    ledger.push(LedgerLine::le("step.velocity_change", red.v_diff, m_const.m * dn.sqrt()));
    ledger.push(LedgerLine::lt("step.weak_residual.glued", glued_report.max_relative, 1e-4));
    ledger.push(LedgerLine::lt("step.weak_residual.next", next_report.max_relative, 1e-4));
    ledger.push(LedgerLine::lt("step.contraction", red.next_stress, glued_stress).note("trend; guaranteed only for large a"));
    ledger.push(LedgerLine::le("step.rho_i", pump.max_rho_i, dn / c0));
    ledger.push(LedgerLine::ge("step.rho_range.lower", rho_min, dn / (8.0 * lv.lambda_q.powf(params.alpha))));
    ledger.push(LedgerLine::le("step.rho_range.upper", rho_max, dn));
    ledger.push(LedgerLine::gt("step.cutoff_mass", c0, 0.0).hard());
    if settings.perturbation.coefficient_norms {
        ledger.push(LedgerLine::le("step.coefficient_decay", pump.max_scaled_coefficient, m_const.m_bar * dn.sqrt()));
    }
    let tracking_bound = lv.delta_q.sqrt() * dn.sqrt() * lv.lambda_q.powf(1.0 + 2.0 * params.alpha) / lv.lambda_next;
    ledger.push(LedgerLine::le("step.energy_tracking", red.energy_tracking, tracking_bound));
    let rd_scale = dn.sqrt() * lv.lambda_next.powf(params.gamma - 1.0 + params.alpha);
    ledger.push(
        LedgerLine::le("step.dissipative_stress", red.dissipative_stress, rd_scale)
            .note("constant-free comparison; the bound holds up to a constant"),
    );
    ledger.push(LedgerLine::le("step.energy_budget.increase", audit.max_increase, 0.0).note("e_tot of v_{q+1}"));

    let report = LevelReport {
        q,
        grid: g.n(),
        samples: last + 1,
        spacing: h,
        t_end,
        nu_grid: input.nu,
        level: lv.clone(),
        next_frequency: lv.freq_next,
        k_max: perturber.k_max,
        half_modes: perturber.fourier.modes.len() / 2,
        m_constant: m_const,
        c0,
        rho_q_min: rho_min,
        rho_q_max: rho_max,
        weak_residual_glued: glued_report.max_relative,
        weak_residual_next: next_report.max_relative,
        glued_stress,
        next_stress: red.next_stress,
        max_divergence: red.max_divergence,
        max_trace: red.max_trace,
        perturbation_sup: red.w_sup,
        perturbation_c1: w_c1,
        energy_tracking: red.energy_tracking,
        dissipative_stress: red.dissipative_stress,
        pump,
        min_flow_det: quality.min_det,
        gluing,
        digest_initial: red.digest_initial,
        digest_final: red.digest_final,
        ledger,
    };
    Ok(LevelOutput { report, rows: red.rows, next_initial: red.next_initial })
}

fn lv_next2(params: &IterationParams, q: u32) -> Result<f64, PipelineError> {
    Ok(level_values(params, q)?.delta_next2)
}

struct Ctx<'a> {
    params: &'a IterationParams,
    input: &'a LevelInput,
    lv1: &'a LevelValues,
    perturber: &'a Perturber,
    h: f64,
    last: usize,
    tau: f64,
}

/// Assemble the new triple at window position `pos` and fold it into the reductions.
fn assemble(
    ctx: &Ctx,
    window: &VecDeque<Window>,
    pos: usize,
    red: &mut Reduction,
    weak: &mut WeakFormOracle,
) -> Result<(), PipelineError> {
    let q = ctx.input.q;
    let err = stage(q, "assembly");
    let ws: [&PerturbationSample; 5] = std::array::from_fn(|m| &window[m].pump);
    let dw = ctx.perturber.time_derivative(ws, pos, ctx.h).map_err(|e| err(e.to_string()))?;
    let s = &window[pos];
    let glued = GluedSlice { v: &s.v, p: &s.p, r: &s.r };
    let (next, stats) =
        assemble_next(s.t, &glued, &s.pump, &dw, ctx.input.nu, ctx.params.gamma).map_err(|e| err(e.to_string()))?;
    weak.push(s.t, &next.v, &next.r)?;

    let e = ctx.input.energy.eval(s.t);
    let kinetic = next.v.mean_square();
    let r0 = next.r.sup_norm();
    let grad = gradient_sup(&next.v)?;
    let v0 = next.v.sup_norm();
    red.max_divergence = red.max_divergence.max(stats.divergence);
    red.max_trace = red.max_trace.max(stats.trace);
    red.next_stress = red.next_stress.max(r0);
    red.dissipative_stress = red.dissipative_stress.max(stats.dissipative_stress);
    red.w_sup = red.w_sup.max(s.pump.w.sup_norm());
    red.w_grad = red.w_grad.max(gradient_sup(&s.pump.w)?);
    red.energy_tracking = red.energy_tracking.max((e - kinetic - 0.5 * ctx.lv1.delta_next).abs());
    red.rates.push(dissipation_rate(&next.v, ctx.input.nu, ctx.params.gamma));
    red.rows.push(CsvRow {
        t: s.t,
        kinetic_energy: kinetic,
        target_e: e,
        dissipation_integral: 0.0,
        e_tot: 0.0,
        r_norm_0: r0,
        v_norm_1: v0 + Units::seminorm_from_grid(grad, 1.0, 0.0),
    });

    // v_q is known at the gluing times
    let ratio = s.t / ctx.tau;
    let i = ratio.round();
    if (ratio - i).abs() < 1e-9 {
        if let Some(vq) = ctx.input.gluing_initial.get(i as usize) {
            red.v_diff = red.v_diff.max(next.v.sub(vq)?.sup_norm());
        }
    }
    if s.j == 0 || s.j == ctx.last {
        let tag = if s.j == 0 { "initial" } else { "final" };
        let l = inductive_estimates(ctx.params, q + 1, &next, e, &format!("next.{tag}"))?;
        red.ledger.extend(l);
        let d = field_digest(&next.v);
        if s.j == 0 {
            red.digest_initial = d;
        } else {
            red.digest_final = d;
        }
    }

    if !red.targets.is_empty() {
        match red.ring.as_mut() {
            None => red.ring = Some(SampledField::new(s.t, ctx.h, vec![next.v.clone()]).map_err(|e| err(e.to_string()))?),
            Some(r) => r.push(next.v.clone(), 4),
        }
        let ring = red.ring.as_ref().expect("initialized above");
        while let Some(&target) = red.targets.front() {
            let ready = target <= s.t - ctx.h + 1e-9 * ctx.h || s.j == ctx.last;
            if !ready || target > s.t + 1e-9 * ctx.h {
                break;
            }
            red.next_initial.push(ring.at(target).map_err(|e| err(e.to_string()))?);
            red.targets.pop_front();
        }
    }
    Ok(())
}
