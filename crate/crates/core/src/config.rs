//! Simulation configuration in TOML.
//!
//! ```toml
//! model = "filament"
//! seed = 1
//!
//! [kernel]
//! kind = "rosenhead"
//! gamma = 1.0
//! mu = 0.5
//!
//! [initial]
//! scenario = "circle"
//! radius = 1.0
//! n = 64
//!
//! [integrator]
//! scheme = "rk4"
//! dt = 0.001
//! t_end = 1.0
//! ```
//!
//! Unknown keys are rejected, as are keys that do not apply to the chosen
//! kernel kind or scenario. Missing keys take the defaults documented on
//! each field, and [`SimulationConfig::to_toml`] writes the fully resolved
//! form.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::blobs::BlobSystem;
use crate::error::{io_error, Result, VortexError};
use crate::filament::{Filament, RateOptions};
use crate::io::{Outputs, Snapshot};
use crate::kernel::{Kernel, OscillatoryProbe, Vec3};
use crate::loops::{make_bump_kernel, Generator, LatticeKernel, LoopSystem};
use crate::quadrature::Tolerance;
use crate::refine::{RefineMode, RefinePolicy};
use crate::scenario;
use crate::sim::{IntegratorSpec, RunSpec, Scheme, State};
use crate::sum::Summation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Filament,
    Blobs,
    Loops,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Rosenhead,
    Gaussian,
    /// `Γ cos(ω|x|) exp(−|x|²/2σ²)`, which is not admissible for large `ωσ`.
    Oscillatory,
    /// Lattice kernel `ρ̂ = b̂²` for loops.
    Bump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub kind: KernelKind,
    /// Circulation; default 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Rosenhead core size; default 0.5.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Gaussian or oscillatory width; default 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Oscillatory wavenumber; default 4.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    /// Bump generator; default gaussian.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorKind>,
    /// Bump generator width; default 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    /// Lattice cutoff `K`; default 8.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<i32>,
    /// Allowed discarded tail fraction; default 1e-10.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_fraction: Option<f64>,
    /// Spectral-moment quadrature tolerance.
    #[serde(default)]
    pub tolerance: Tolerance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Circle,
    Ngon,
    PerturbedCircle,
    BlobCloud,
    LoopPair,
    LoopLattice,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub scenario: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centre: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_side: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineConfig {
    pub enabled: bool,
    pub a_max: f64,
    pub a_target: f64,
    pub mode: RefineMode,
    pub local_fraction: f64,
    pub max_points: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        let p = RefinePolicy::default();
        RefineConfig {
            enabled: false,
            a_max: p.a_max,
            a_target: p.a_target,
            mode: p.mode,
            local_fraction: p.local_fraction,
            max_points: p.max_points,
        }
    }
}

impl RefineConfig {
    pub fn policy(&self) -> RefinePolicy {
        RefinePolicy {
            a_max: self.a_max,
            a_target: self.a_target,
            mode: self.mode,
            local_fraction: self.local_fraction,
            max_points: self.max_points,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    /// Base Gauss–Legendre order for the segment integrals.
    pub quadrature_order: usize,
    /// Allowed relative disagreement between order `p` and `2p`.
    pub quadrature_rel_tol: f64,
    /// Include the analytic `dH/dt` in every record.
    pub energy_rate: bool,
    /// Halt blob runs above this energy; `0` disables the check.
    pub energy_ceiling: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        let r = RateOptions::default();
        DiagnosticsConfig {
            quadrature_order: r.order,
            quadrature_rel_tol: r.rel_tol,
            energy_rate: true,
            energy_ceiling: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub csv: bool,
    pub events: bool,
    pub snapshots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("vortex-out"),
            csv: true,
            events: true,
            snapshots: true,
        }
    }
}

impl OutputConfig {
    pub fn outputs(&self) -> Outputs {
        Outputs {
            csv: self.csv,
            events: self.events,
            snapshots: self.snapshots,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub model: Model,
    /// Fixed-order compensated summation; default true.
    #[serde(default = "default_true")]
    pub reproducible: bool,
    #[serde(default)]
    pub seed: u64,
    pub kernel: KernelConfig,
    pub initial: InitialConfig,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub refine: RefineConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_true() -> bool {
    true
}

fn prefixed(section: &str) -> impl Fn(VortexError) -> VortexError + '_ {
    move |e| match e {
        VortexError::InvalidParameter { name, reason } if !name.contains('.') => VortexError::InvalidParameter {
            name: format!("{section}.{name}"),
            reason,
        },
        other => other,
    }
}

fn unused(section: &str, key: &str, present: bool, owner: &str) -> Result<()> {
    if present {
        Err(VortexError::invalid(
            format!("{section}.{key}"),
            format!("not used by {owner}"),
        ))
    } else {
        Ok(())
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(VortexError::invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

impl SimulationConfig {
    /// Parses, fills defaults and validates.
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: SimulationConfig =
            toml::from_str(text).map_err(|e| VortexError::invalid("config", e.to_string().trim_end()))?;
        cfg.resolve()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(p) = cfg.initial.path.as_mut() {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
            if !p.exists() {
                return Err(VortexError::invalid("initial.path", format!("{} does not exist", p.display())));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn summation(&self) -> Summation {
        if self.reproducible {
            Summation::Reproducible
        } else {
            Summation::Fast
        }
    }

    fn resolve(&mut self) -> Result<()> {
        self.resolve_kernel()?;
        self.resolve_initial()?;
        self.integrator.validate()?;
        if self.integrator.scheme == Scheme::ImplicitMidpoint && self.model != Model::Loops {
            return Err(VortexError::invalid("integrator.scheme", "implicit-midpoint is only available for loops"));
        }
        if self.refine.enabled {
            if self.model != Model::Filament {
                return Err(VortexError::invalid("refine.enabled", "refinement applies to filaments only"));
            }
            self.refine.policy().validate().map_err(prefixed("refine"))?;
        }
        self.rate_options().validate().map_err(prefixed("diagnostics"))?;
        if !(self.diagnostics.energy_ceiling >= 0.0) {
            return Err(VortexError::invalid("diagnostics.energy_ceiling", "must be >= 0"));
        }
        Ok(())
    }

    fn resolve_kernel(&mut self) -> Result<()> {
        let k = &mut self.kernel;
        let owner = format!("{:?} kernel", k.kind).to_lowercase();
        let lattice = k.kind == KernelKind::Bump;
        if (self.model == Model::Loops) != lattice {
            return Err(VortexError::invalid(
                "kernel.kind",
                "loops need kind = \"bump\"; filaments and blobs need a whole-space kernel",
            ));
        }
        unused("kernel", "mu", k.mu.is_some() && k.kind != KernelKind::Rosenhead, &owner)?;
        unused(
            "kernel",
            "sigma",
            k.sigma.is_some() && !matches!(k.kind, KernelKind::Gaussian | KernelKind::Oscillatory),
            &owner,
        )?;
        unused("kernel", "omega", k.omega.is_some() && k.kind != KernelKind::Oscillatory, &owner)?;
        for (key, present) in [
            ("generator", k.generator.is_some()),
            ("width", k.width.is_some()),
            ("cutoff", k.cutoff.is_some()),
            ("tail_fraction", k.tail_fraction.is_some()),
        ] {
            unused("kernel", key, present && !lattice, &owner)?;
        }
        unused("kernel", "gamma", k.gamma.is_some() && lattice, &owner)?;
        match k.kind {
            KernelKind::Rosenhead => {
                k.mu.get_or_insert(0.5);
            }
            KernelKind::Gaussian => {
                k.sigma.get_or_insert(1.0);
            }
            KernelKind::Oscillatory => {
                k.sigma.get_or_insert(1.0);
                k.omega.get_or_insert(4.0);
            }
            KernelKind::Bump => {
                k.generator.get_or_insert(GeneratorKind::Gaussian);
                k.width.get_or_insert(1.0);
                k.cutoff.get_or_insert(8);
                k.tail_fraction.get_or_insert(1e-10);
            }
        }
        if !lattice {
            k.gamma.get_or_insert(1.0);
        }
        if !(k.tolerance.abs >= 0.0 && k.tolerance.rel >= 0.0 && k.tolerance.abs + k.tolerance.rel > 0.0) {
            return Err(VortexError::invalid("kernel.tolerance", "abs and rel must be >= 0, not both zero"));
        }
        if lattice {
            let w = k.width.unwrap();
            positive("kernel.width", w)?;
            if k.cutoff.unwrap() < 1 {
                return Err(VortexError::invalid("kernel.cutoff", "must be >= 1"));
            }
            let tail = k.tail_fraction.unwrap();
            if !(tail >= 0.0) {
                return Err(VortexError::invalid("kernel.tail_fraction", "must be >= 0"));
            }
        } else {
            self.build_kernel()?;
        }
        Ok(())
    }

    fn resolve_initial(&mut self) -> Result<()> {
        use ScenarioKind::*;
        let i = &mut self.initial;
        let owner = format!("scenario {:?}", i.scenario).to_lowercase();
        let allowed: &[&str] = match i.scenario {
            Circle | Ngon => &["radius", "n", "centre", "normal"],
            PerturbedCircle => &["radius", "n", "amplitude", "modes"],
            BlobCloud => &["radius", "n", "strength"],
            LoopPair => &["separation", "strength"],
            LoopLattice => &["per_side", "strength", "jitter"],
            File => &["path"],
        };
        let present = [
            ("radius", i.radius.is_some()),
            ("n", i.n.is_some()),
            ("centre", i.centre.is_some()),
            ("normal", i.normal.is_some()),
            ("amplitude", i.amplitude.is_some()),
            ("modes", i.modes.is_some()),
            ("strength", i.strength.is_some()),
            ("separation", i.separation.is_some()),
            ("per_side", i.per_side.is_some()),
            ("jitter", i.jitter.is_some()),
            ("path", i.path.is_some()),
        ];
        for (key, p) in present {
            unused("initial", key, p && !allowed.contains(&key), &owner)?;
        }
        let fits = match i.scenario {
            Circle | Ngon | PerturbedCircle => self.model == Model::Filament,
            BlobCloud => self.model == Model::Blobs,
            LoopPair | LoopLattice => self.model == Model::Loops,
            File => true,
        };
        if !fits {
            return Err(VortexError::invalid(
                "initial.scenario",
                format!("{owner} does not build a {:?} state", self.model).to_lowercase(),
            ));
        }
        match i.scenario {
            Circle => {
                i.radius.get_or_insert(1.0);
                i.n.get_or_insert(64);
                i.centre.get_or_insert([0.0; 3]);
                i.normal.get_or_insert([0.0, 0.0, 1.0]);
            }
            Ngon => {
                i.radius.get_or_insert(1.0);
                i.n.get_or_insert(8);
                i.centre.get_or_insert([0.0; 3]);
                i.normal.get_or_insert([0.0, 0.0, 1.0]);
            }
            PerturbedCircle => {
                i.radius.get_or_insert(1.0);
                i.n.get_or_insert(64);
                i.amplitude.get_or_insert(0.1);
                i.modes.get_or_insert(3);
            }
            BlobCloud => {
                i.radius.get_or_insert(1.0);
                i.n.get_or_insert(16);
                i.strength.get_or_insert(0.2);
            }
            LoopPair => {
                i.separation.get_or_insert(1.0);
                i.strength.get_or_insert(1.0);
            }
            LoopLattice => {
                i.per_side.get_or_insert(2);
                i.strength.get_or_insert(1.0);
                i.jitter.get_or_insert(0.2);
            }
            File => {
                if i.path.is_none() {
                    return Err(VortexError::invalid("initial.path", "required for scenario \"file\""));
                }
            }
        }
        if i.scenario != File {
            self.build_state()?;
        }
        Ok(())
    }

    /// Whole-space kernel for filament and blob models.
    pub fn build_kernel(&self) -> Result<Kernel> {
        let k = &self.kernel;
        let gamma = k.gamma.unwrap_or(1.0);
        match k.kind {
            KernelKind::Rosenhead => Kernel::rosenhead(gamma, k.mu.unwrap_or(0.5)),
            KernelKind::Gaussian => Kernel::gaussian(gamma, k.sigma.unwrap_or(1.0)),
            KernelKind::Oscillatory => Ok(Kernel::custom(Arc::new(OscillatoryProbe::new(
                gamma,
                k.omega.unwrap_or(4.0),
                k.sigma.unwrap_or(1.0),
            )?))),
            KernelKind::Bump => Err(VortexError::invalid("kernel.kind", "bump kernels are lattice kernels")),
        }
        .map_err(prefixed("kernel"))
    }

    pub fn build_lattice(&self) -> Result<LatticeKernel> {
        let k = &self.kernel;
        if k.kind != KernelKind::Bump {
            return Err(VortexError::invalid("kernel.kind", "loops need kind = \"bump\""));
        }
        let generator = match k.generator.unwrap_or(GeneratorKind::Gaussian) {
            GeneratorKind::Gaussian => Generator::Gaussian {
                width: k.width.unwrap_or(1.0),
            },
        };
        make_bump_kernel(&generator, k.cutoff.unwrap_or(8), k.tail_fraction.unwrap_or(1e-10)).map_err(prefixed("kernel"))
    }

    fn initial_points(&self) -> Result<(Vec<Vec3>, Option<Vec<Vec3>>)> {
        use ScenarioKind::*;
        let i = &self.initial;
        let r = i.radius.unwrap_or(1.0);
        let n = i.n.unwrap_or(64);
        let out = match i.scenario {
            Circle | Ngon => (
                scenario::circle(r, n, vec3(i.centre.unwrap_or([0.0; 3])), vec3(i.normal.unwrap_or([0.0, 0.0, 1.0])))?,
                None,
            ),
            PerturbedCircle => (
                scenario::perturbed_circle(r, n, i.amplitude.unwrap_or(0.1), i.modes.unwrap_or(3), self.seed)?,
                None,
            ),
            BlobCloud => {
                let (x, v) = scenario::blob_cloud(n, r, i.strength.unwrap_or(0.2), self.seed)?;
                (x, Some(v))
            }
            LoopPair => {
                let (x, v) = scenario::loop_pair(i.separation.unwrap_or(1.0), i.strength.unwrap_or(1.0))?;
                (x, Some(v))
            }
            LoopLattice => {
                let (x, v) = scenario::loop_lattice(
                    i.per_side.unwrap_or(2),
                    i.strength.unwrap_or(1.0),
                    i.jitter.unwrap_or(0.2),
                    self.seed,
                )?;
                (x, Some(v))
            }
            File => {
                let path = i.path.as_ref().expect("validated");
                let snap = Snapshot::read(path)?;
                let want = format!("{:?}", self.model).to_lowercase();
                if snap.model != want {
                    return Err(VortexError::invalid(
                        "initial.path",
                        format!("snapshot holds a {} state, config asks for {want}", snap.model),
                    ));
                }
                (snap.positions, snap.vectors)
            }
        };
        Ok(out)
    }

    pub fn build_state(&self) -> Result<State> {
        let mode = self.summation();
        let (x, v) = self.initial_points().map_err(prefixed("initial"))?;
        let state = match self.model {
            Model::Filament => State::Filament(Filament::new(x, self.build_kernel()?)?.with_summation(mode)),
            Model::Blobs => State::Blobs(
                BlobSystem::new(x, v.unwrap_or_default(), self.build_kernel()?)?.with_summation(mode),
            ),
            Model::Loops => State::Loops(
                LoopSystem::new(x, v.unwrap_or_default(), Arc::new(self.build_lattice()?))?.with_summation(mode),
            ),
        };
        Ok(state)
    }

    pub fn rate_options(&self) -> RateOptions {
        RateOptions {
            order: self.diagnostics.quadrature_order,
            rel_tol: self.diagnostics.quadrature_rel_tol,
            ..RateOptions::default()
        }
    }

    pub fn run_spec(&self) -> RunSpec {
        RunSpec {
            integrator: self.integrator,
            refine: self.refine.enabled.then(|| self.refine.policy()),
            rate: self.rate_options(),
            energy_ceiling: (self.diagnostics.energy_ceiling > 0.0).then_some(self.diagnostics.energy_ceiling),
            rate_diagnostics: self.diagnostics.energy_rate,
            moments_tolerance: self.kernel.tolerance,
        }
    }
}
