//! Time integration and the diagnostics-producing run loop.

use serde::{Deserialize, Serialize};

use crate::blobs::BlobSystem;
use crate::bounds::{gronwall_length, BoundConstants};
use crate::error::{Result, VortexError};
use crate::filament::{Filament, RateOptions};
use crate::kernel::Vec3;
use crate::loops::LoopSystem;
use crate::quadrature::Tolerance;
use crate::refine::{refine, RefinePolicy};

/// State of one of the three models.
#[derive(Debug, Clone)]
pub enum State {
    Filament(Filament),
    Blobs(BlobSystem),
    Loops(LoopSystem),
}

impl State {
    pub fn model(&self) -> &'static str {
        match self {
            State::Filament(_) => "filament",
            State::Blobs(_) => "blobs",
            State::Loops(_) => "loops",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            State::Filament(f) => f.len(),
            State::Blobs(b) => b.len(),
            State::Loops(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kernel_description(&self) -> String {
        match self {
            State::Filament(f) => f.kernel().describe(),
            State::Blobs(b) => b.kernel().describe(),
            State::Loops(l) => l.kernel().describe().to_string(),
        }
    }

    pub fn positions(&self) -> &[Vec3] {
        match self {
            State::Filament(f) => f.nodes(),
            State::Blobs(b) => b.positions(),
            State::Loops(l) => l.positions(),
        }
    }

    /// `ξ_α` for blobs, `m_α` for loops, `None` for filaments.
    pub fn vectors(&self) -> Option<&[Vec3]> {
        match self {
            State::Filament(_) => None,
            State::Blobs(b) => Some(b.vectors()),
            State::Loops(l) => Some(l.moments()),
        }
    }

    /// Positions followed by vectors, if any.
    pub fn flatten(&self) -> Vec<Vec3> {
        let mut y = self.positions().to_vec();
        if let Some(v) = self.vectors() {
            y.extend_from_slice(v);
        }
        y
    }

    /// Same model and parameters with the flattened state `y`.
    pub fn with_flat(&self, y: Vec<Vec3>) -> Result<State> {
        Ok(match self {
            State::Filament(f) => State::Filament(f.with_nodes(y)?),
            State::Blobs(b) => {
                let mut y = y;
                let v = y.split_off(b.len());
                State::Blobs(b.with_state(y, v)?)
            }
            State::Loops(l) => {
                let mut y = y;
                let v = y.split_off(l.len());
                State::Loops(l.with_state(y, v)?)
            }
        })
    }

    /// Time derivative of the flattened state.
    pub fn rhs(&self) -> Vec<Vec3> {
        match self {
            State::Filament(f) => f.rhs(),
            State::Blobs(b) => {
                let (mut x, v) = b.rhs();
                x.extend(v);
                x
            }
            State::Loops(l) => {
                let (mut x, v) = l.rhs();
                x.extend(v);
                x
            }
        }
    }

    pub fn energy(&self) -> f64 {
        match self {
            State::Filament(f) => f.energy().total,
            State::Blobs(b) => b.energy().total,
            State::Loops(l) => l.energy(),
        }
    }

    /// `(L, A)`: sums of `|ξ_α|` and `|ξ_α|²` (or of `|m_α|`, `|m_α|²`).
    pub fn length_and_variation(&self) -> (f64, f64) {
        match self {
            State::Filament(f) => {
                let fun = crate::filament::length_and_variation(f.nodes(), f.summation());
                (fun.0, fun.1)
            }
            State::Blobs(b) => b.length_and_variation(),
            State::Loops(l) => l.length_and_variation(),
        }
    }

    /// Constant `c` with `|dL/dt| ≤ c H^{1/2} L`.
    pub fn length_constant(&self, tol: Tolerance) -> Result<f64> {
        Ok(match self {
            State::Filament(f) => BoundConstants::from_moments(&f.kernel().spectral_moments(tol)?).c7,
            State::Blobs(b) => BoundConstants::from_moments(&b.kernel().spectral_moments(tol)?).c7,
            State::Loops(l) => l.kernel().derivative_constant(1),
        })
    }

    /// Analytic `dH/dt`; zero for loops, whose truncated Hamiltonian is
    /// conserved by the exact flow.
    pub fn energy_rate(&self, opts: &RateOptions) -> Result<f64> {
        match self {
            State::Filament(f) => Ok(f.energy_rate(opts)?.total),
            State::Blobs(b) => Ok(b.energy_rate(opts)?.total()),
            State::Loops(_) => Ok(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Euler,
    Rk4,
    /// Loops only.
    ImplicitMidpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub scheme: Scheme,
    /// `None` selects `0.1 / B_1`, recomputed after each refinement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_end: f64,
    /// Steps between diagnostics records and snapshots.
    #[serde(default = "one")]
    pub output_stride: usize,
}

fn one() -> usize {
    1
}

impl IntegratorSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(VortexError::invalid("integrator.dt", format!("must be finite and > 0, got {dt}")));
            }
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(VortexError::invalid(
                "integrator.t_end",
                format!("must be finite and >= 0, got {}", self.t_end),
            ));
        }
        if self.output_stride == 0 {
            return Err(VortexError::invalid("integrator.output_stride", "must be >= 1"));
        }
        Ok(())
    }
}

fn non_finite(t: f64) -> impl Fn(VortexError) -> VortexError {
    move |e| match e {
        VortexError::InvalidParameter { .. } => VortexError::NonFiniteState { t },
        other => other,
    }
}

fn axpy(y: &[Vec3], h: f64, k: &[Vec3]) -> Vec<Vec3> {
    y.iter().zip(k).map(|(a, b)| a + b * h).collect()
}

/// Advances `state` from `t` to `t + dt`.
pub fn step(state: &State, scheme: Scheme, dt: f64, t: f64) -> Result<State> {
    let y0 = state.flatten();
    let eval = |y: Vec<Vec3>| -> Result<Vec<Vec3>> {
        Ok(state.with_flat(y).map_err(non_finite(t))?.rhs())
    };
    let y1 = match scheme {
        Scheme::Euler => axpy(&y0, dt, &state.rhs()),
        Scheme::Rk4 => {
            let k1 = state.rhs();
            let k2 = eval(axpy(&y0, 0.5 * dt, &k1))?;
            let k3 = eval(axpy(&y0, 0.5 * dt, &k2))?;
            let k4 = eval(axpy(&y0, dt, &k3))?;
            y0.iter()
                .enumerate()
                .map(|(i, y)| y + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0))
                .collect()
        }
        Scheme::ImplicitMidpoint => {
            if !matches!(state, State::Loops(_)) {
                return Err(VortexError::invalid(
                    "integrator.scheme",
                    "implicit-midpoint is only available for loops",
                ));
            }
            implicit_midpoint(&y0, dt, eval)?
        }
    };
    state.with_flat(y1).map_err(non_finite(t + dt))
}

fn implicit_midpoint<F>(y0: &[Vec3], dt: f64, eval: F) -> Result<Vec<Vec3>>
where
    F: Fn(Vec<Vec3>) -> Result<Vec<Vec3>>,
{
    let mut y1 = axpy(y0, dt, &eval(y0.to_vec())?);
    let scale = y0.iter().map(|v| v.amax()).fold(1.0, f64::max);
    let mut change = f64::INFINITY;
    for it in 0..100 {
        let mid: Vec<Vec3> = y0.iter().zip(&y1).map(|(a, b)| (a + b) * 0.5).collect();
        let next = axpy(y0, dt, &eval(mid)?);
        change = next.iter().zip(&y1).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
        y1 = next;
        if change <= 4.0 * f64::EPSILON * scale {
            return Ok(y1);
        }
        if it > 3 && !change.is_finite() {
            break;
        }
    }
    Err(VortexError::NonConvergent {
        estimate: 0.0,
        error: change,
        intervals: 100,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    #[serde(rename = "H")]
    pub energy: f64,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "A")]
    pub variation: f64,
    /// `max_α |ẋ_α|`
    pub sup_u: f64,
    pub rate_total: f64,
    pub gronwall_l: f64,
    pub refinements: usize,
    pub n: usize,
}

/// A refinement applied during a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefineEvent {
    pub t: f64,
    #[serde(rename = "N_before")]
    pub n_before: usize,
    #[serde(rename = "N_after")]
    pub n_after: usize,
    #[serde(rename = "A_before")]
    pub a_before: f64,
    #[serde(rename = "A_after")]
    pub a_after: f64,
    #[serde(rename = "H_before")]
    pub h_before: f64,
    #[serde(rename = "H_after")]
    pub h_after: f64,
}

/// Receives run output as it is produced.
pub trait Sink {
    fn record(&mut self, _record: &DiagnosticsRecord) -> Result<()> {
        Ok(())
    }
    fn event(&mut self, _event: &RefineEvent) -> Result<()> {
        Ok(())
    }
    fn snapshot(&mut self, _index: usize, _t: f64, _state: &State) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub integrator: IntegratorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<RefinePolicy>,
    #[serde(default)]
    pub rate: RateOptions,
    /// Halts blob runs whose energy exceeds this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_ceiling: Option<f64>,
    /// Whether records carry the analytic `dH/dt` (costly for large N).
    #[serde(default = "yes")]
    pub rate_diagnostics: bool,
    #[serde(default)]
    pub moments_tolerance: Tolerance,
}

fn yes() -> bool {
    true
}

impl RunSpec {
    pub fn new(integrator: IntegratorSpec) -> Self {
        RunSpec {
            integrator,
            refine: None,
            rate: RateOptions::default(),
            energy_ceiling: None,
            rate_diagnostics: true,
            moments_tolerance: Tolerance::default(),
        }
    }
}

/// Output of [`run`]. When `error` is set the run stopped early and the
/// other fields describe everything up to the last accepted state.
#[derive(Debug, Clone)]
pub struct Trace {
    pub records: Vec<DiagnosticsRecord>,
    pub events: Vec<RefineEvent>,
    pub state: State,
    pub t: f64,
    pub steps: usize,
    pub error: Option<VortexError>,
}

/// `0.1 / B_1` with `B_1 = C_1 H^{1/2}`; `t_end` (or 1) if the bound is zero.
pub fn default_dt(c1: f64, energy: f64, t_end: f64) -> f64 {
    let b1 = c1 * energy.max(0.0).sqrt();
    if b1 > 0.0 && b1.is_finite() {
        0.1 / b1
    } else if t_end > 0.0 {
        t_end
    } else {
        1.0
    }
}

struct Runner<'a, 'b> {
    spec: &'a RunSpec,
    sinks: &'a mut [&'b mut dyn Sink],
    records: Vec<DiagnosticsRecord>,
    events: Vec<RefineEvent>,
    c7: f64,
    l0: f64,
    h_max: f64,
    snapshots: usize,
}

impl Runner<'_, '_> {
    fn emit(&mut self, state: &State, t: f64) -> Result<()> {
        let energy = state.energy();
        self.h_max = self.h_max.max(energy);
        let (length, variation) = state.length_and_variation();
        let vel = state.rhs();
        let sup_u = vel[..state.len()].iter().map(|v| v.norm()).fold(0.0, f64::max);
        let rate_total = if self.spec.rate_diagnostics {
            state.energy_rate(&self.spec.rate)?
        } else {
            f64::NAN
        };
        let rec = DiagnosticsRecord {
            t,
            energy,
            length,
            variation,
            sup_u,
            rate_total,
            gronwall_l: gronwall_length(self.l0, self.c7, self.h_max, t),
            refinements: self.events.len(),
            n: state.len(),
        };
        for s in self.sinks.iter_mut() {
            s.record(&rec)?;
            s.snapshot(self.snapshots, t, state)?;
        }
        self.snapshots += 1;
        self.records.push(rec);
        Ok(())
    }

    fn maybe_refine(&mut self, state: &mut State, t: f64) -> Result<bool> {
        let (Some(policy), State::Filament(f)) = (&self.spec.refine, &*state) else {
            return Ok(false);
        };
        if f.variation() <= policy.a_max {
            return Ok(false);
        }
        let (g, rep) = refine(f, policy, &self.spec.rate)?;
        let ev = RefineEvent {
            t,
            n_before: rep.n_before,
            n_after: rep.n_after,
            a_before: rep.a_before,
            a_after: rep.a_after,
            h_before: rep.h_before,
            h_after: rep.h_after,
        };
        log::info!("refined at t = {t}: N {} -> {}, A {} -> {}", ev.n_before, ev.n_after, ev.a_before, ev.a_after);
        for s in self.sinks.iter_mut() {
            s.event(&ev)?;
        }
        self.events.push(ev);
        self.h_max = self.h_max.max(rep.h_after);
        *state = State::Filament(g);
        Ok(true)
    }
}

/// Integrates to `t_end`, refining filaments when `A > a_max`, and emits a
/// record and snapshot every `output_stride` steps and at the end.
pub fn run(initial: State, spec: &RunSpec, sinks: &mut [&mut dyn Sink]) -> Trace {
    let mut state = initial;
    let mut t = 0.0;
    let mut steps = 0;
    let mut runner = Runner {
        spec,
        sinks,
        records: Vec::new(),
        events: Vec::new(),
        c7: 0.0,
        l0: 0.0,
        h_max: 0.0,
        snapshots: 0,
    };
    let out = (|| -> Result<()> {
        spec.integrator.validate()?;
        if let Some(p) = &spec.refine {
            p.validate()?;
        }
        if spec.integrator.scheme == Scheme::ImplicitMidpoint && !matches!(state, State::Loops(_)) {
            return Err(VortexError::invalid(
                "integrator.scheme",
                "implicit-midpoint is only available for loops",
            ));
        }
        runner.c7 = state.length_constant(spec.moments_tolerance)?;
        drive(&mut runner, &mut state, &mut t, &mut steps)
    })();
    if let Err(e) = &out {
        log::warn!("run stopped at t = {t}: {e}");
    }
    Trace {
        records: runner.records,
        events: runner.events,
        state,
        t,
        steps,
        error: out.err(),
    }
}

fn drive(r: &mut Runner<'_, '_>, state: &mut State, t: &mut f64, steps: &mut usize) -> Result<()> {
    let spec = r.spec;
    let t_end = spec.integrator.t_end;
    r.maybe_refine(state, 0.0)?;
    r.l0 = state.length_and_variation().0;
    r.emit(state, 0.0)?;
    let c7 = r.c7;
    let pick_dt = |h: f64| spec.integrator.dt.unwrap_or_else(|| default_dt(c7, h, t_end));
    let mut dt = pick_dt(r.h_max);
    let mut t_seg = 0.0;
    let mut k = 0usize;
    while *t < t_end {
        let next = t_seg + (k + 1) as f64 * dt;
        let last = next >= t_end * (1.0 - 1e-12);
        let t_next = if last { t_end } else { next };
        let new_state = step(state, spec.integrator.scheme, t_next - *t, *t)?;
        *state = new_state;
        *t = t_next;
        k += 1;
        *steps += 1;
        if let (Some(ceiling), State::Blobs(_)) = (spec.energy_ceiling, &*state) {
            let energy = state.energy();
            if energy > ceiling {
                return Err(VortexError::EnergyCeilingExceeded { t: *t, energy, ceiling });
            }
        }
        if r.maybe_refine(state, *t)? && spec.integrator.dt.is_none() {
            dt = pick_dt(state.energy());
            t_seg = *t;
            k = 0;
        }
        if *steps % spec.integrator.output_stride == 0 || last {
            r.emit(state, *t)?;
        }
    }
    Ok(())
}
