//! Declarative scenario files and the runner that turns them into CSV, JSON
//! and SVG outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::entropy::{entropy_trace_pf, ode_trace, MONOTONE_SLACK};
use crate::error::{Error, Result};
use crate::experiment::{PairOptions, PairRun};
use crate::frobenius::{
    geometric_rate, relaxation_trace, spectral_coefficients, test_density, UnitDensity, DEFAULT_K, GRID_M_MAX,
    TEST_DENSITIES,
};
use crate::io::{Cell, Csv, OutputDir, OutputFile};
use crate::maps::{divergence_step, iterate_map, lyapunov_estimate, MapOrbit, StepKind};
use crate::plot::{Chart, Heatmap, Series, Style};
use crate::splitter::{Splitter, SplitterSetup};
use crate::trajectories::{born_quantile, Fate, Trajectory};
use crate::wavefield::{fringe_analysis, wiener_field, GridWavefunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Scatter,
    Trajectories,
    Coherent,
    MapOrbit,
    PfRelax,
    EntropyTrace,
}

impl Kind {
    fn section(self) -> &'static str {
        match self {
            Kind::Scatter => "scatter",
            Kind::Trajectories => "trajectories",
            Kind::Coherent => "coherent",
            Kind::MapOrbit => "map_orbit",
            Kind::PfRelax => "pf_relax",
            Kind::EntropyTrace => "entropy_trace",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: Kind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; the command line takes precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub splitter: Option<SplitterSetup>,
    #[serde(default)]
    pub scatter: Option<ScatterParams>,
    #[serde(default)]
    pub trajectories: Option<TrajectoryParams>,
    #[serde(default)]
    pub coherent: Option<CoherentParams>,
    #[serde(default)]
    pub map_orbit: Option<MapOrbitParams>,
    #[serde(default)]
    pub pf_relax: Option<PfRelaxParams>,
    #[serde(default)]
    pub entropy_trace: Option<EntropyTraceParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatterParams {
    /// Trajectory steps between field frames.
    pub snapshot_every: usize,
    /// Keep every this many grid nodes in the field tables.
    pub x_stride: usize,
    /// Frames written to the snapshot table, spread evenly in time.
    pub profiles: usize,
    /// Allowed deviation of the output norms from `|R|²` and `|T|²`.
    pub norm_tolerance: f64,
    /// Allowed relative deviation of the fringe period from `λ/2`.
    pub fringe_tolerance: f64,
}

impl Default for ScatterParams {
    fn default() -> Self {
        Self {
            snapshot_every: 200,
            x_stride: 8,
            profiles: 5,
            norm_tolerance: 0.02,
            fringe_tolerance: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryParams {
    pub uniform: usize,
    pub born: usize,
    pub conjugacy_points: usize,
    pub bins: usize,
    pub record_every: usize,
    /// Split point tolerance as a fraction of the packet length.
    pub split_tolerance: f64,
    pub conjugacy_tolerance: f64,
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        Self {
            uniform: 200,
            born: 2000,
            conjugacy_points: 80,
            bins: 20,
            record_every: 50,
            split_tolerance: 0.02,
            conjugacy_tolerance: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoherentParams {
    pub conjugacy_points: usize,
    pub record_every: usize,
    pub snapshot_every: usize,
    pub x_stride: usize,
    pub conjugacy_tolerance: f64,
}

impl Default for CoherentParams {
    fn default() -> Self {
        Self {
            conjugacy_points: 80,
            record_every: 50,
            snapshot_every: 200,
            x_stride: 8,
            conjugacy_tolerance: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapOrbitParams {
    pub y0: Vec<f64>,
    pub steps: usize,
    pub map: StepKind,
    /// Initial separation for the exponent estimate.
    pub lyapunov_delta: f64,
    pub lyapunov_window: usize,
    /// Time between two passes through the splitter.
    pub step_delay: f64,
    /// Separation on the circle that counts as divergence.
    pub divergence_threshold: f64,
    /// Latest step at which the first two orbits may diverge.
    pub divergence_steps: usize,
    pub lyapunov_tolerance: f64,
}

impl Default for MapOrbitParams {
    fn default() -> Self {
        Self {
            y0: vec![0.22, 0.220001],
            steps: 25,
            map: StepKind::Bernoulli,
            lyapunov_delta: 1e-10,
            lyapunov_window: 20,
            step_delay: 1.0,
            divergence_threshold: 0.1,
            divergence_steps: 25,
            lyapunov_tolerance: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PfRelaxParams {
    /// A named test density, or `spike`.
    pub density: String,
    pub spike_center: f64,
    /// In grid nodes.
    pub spike_half_width: usize,
    pub k: u32,
    pub steps: usize,
    /// Bernoulli order of the spectral decomposition; 0 skips it.
    pub spectral_order: usize,
    /// Iterates written as density tables.
    pub plot_steps: Vec<usize>,
    pub check_step: usize,
    /// Sup distance from equilibrium required at `check_step`.
    pub sup_threshold: f64,
}

impl Default for PfRelaxParams {
    fn default() -> Self {
        Self {
            density: "bumps".into(),
            spike_center: 0.3,
            spike_half_width: 4,
            k: DEFAULT_K,
            steps: 20,
            spectral_order: 3,
            plot_steps: vec![0, 1, 2, 3],
            check_step: 3,
            sup_threshold: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyTraceParams {
    pub density: String,
    pub spike_center: f64,
    pub spike_half_width: usize,
    pub k: u32,
    pub steps: usize,
    /// Relaxation time of the ODE model.
    pub tau: f64,
    pub t_end: f64,
    pub ode_samples: usize,
    pub monotone_slack: f64,
}

impl Default for EntropyTraceParams {
    fn default() -> Self {
        Self {
            density: "bumps".into(),
            spike_center: 0.3,
            spike_half_width: 4,
            k: DEFAULT_K,
            steps: 20,
            tau: 1.0,
            t_end: 5.0,
            ode_samples: 50,
            monotone_slack: MONOTONE_SLACK,
        }
    }
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_error(path, format!("must be positive, got {v}")))
    }
}

fn nonzero(path: &str, n: usize) -> Result<()> {
    if n == 0 {
        Err(config_error(path, "must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_density(section: &str, name: &str, k: u32) -> Result<()> {
    if name != "spike" && test_density(name).is_none() {
        return Err(config_error(
            &format!("{section}.density"),
            format!("unknown density `{name}`; expected spike or one of {TEST_DENSITIES:?}"),
        ));
    }
    if !(4..=20).contains(&k) {
        return Err(config_error(&format!("{section}.k"), "must lie in 4..=20"));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| config_error("", e.message().trim()))?;
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_error(if path == "." { "" } else { &path }, e.into_inner().message().trim())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or(self.kind.section())
    }

    fn splitter_setup(&self) -> SplitterSetup {
        self.splitter.clone().unwrap_or_default()
    }

    /// Rejects missing or foreign sections and non-positive tolerances.
    pub fn validate(&self) -> Result<()> {
        let present = [
            (Kind::Scatter, self.scatter.is_some()),
            (Kind::Trajectories, self.trajectories.is_some()),
            (Kind::Coherent, self.coherent.is_some()),
            (Kind::MapOrbit, self.map_orbit.is_some()),
            (Kind::PfRelax, self.pf_relax.is_some()),
            (Kind::EntropyTrace, self.entropy_trace.is_some()),
        ];
        for (kind, has) in present {
            if has && kind != self.kind {
                return Err(config_error(
                    kind.section(),
                    format!("section does not belong to kind `{}`", self.kind.section()),
                ));
            }
        }
        if !present.iter().any(|(k, has)| *k == self.kind && *has) {
            return Err(config_error(self.kind.section(), "missing section for this kind"));
        }
        let uses_splitter = matches!(self.kind, Kind::Scatter | Kind::Trajectories | Kind::Coherent);
        if self.splitter.is_some() && !uses_splitter {
            return Err(config_error("splitter", "only scatter, trajectories and coherent use a splitter"));
        }
        if let Some(s) = &self.splitter {
            positive("splitter.dt_factor", s.dt_factor)?;
            positive("splitter.propagator.dt_safety", s.propagator.dt_safety)?;
            positive("splitter.propagator.edge_tolerance", s.propagator.edge_tolerance)?;
            positive("splitter.propagator.step_norm_tolerance", s.propagator.step_norm_tolerance)?;
            positive("splitter.points_per_wavelength", s.points_per_wavelength)?;
            if !(s.target_reflectance > 0.0 && s.target_reflectance < 1.0) {
                return Err(config_error("splitter.target_reflectance", "must lie in (0, 1)"));
            }
        }
        if let Some(p) = &self.scatter {
            positive("scatter.norm_tolerance", p.norm_tolerance)?;
            positive("scatter.fringe_tolerance", p.fringe_tolerance)?;
            nonzero("scatter.snapshot_every", p.snapshot_every)?;
            nonzero("scatter.x_stride", p.x_stride)?;
            nonzero("scatter.profiles", p.profiles)?;
        }
        if let Some(p) = &self.trajectories {
            positive("trajectories.split_tolerance", p.split_tolerance)?;
            positive("trajectories.conjugacy_tolerance", p.conjugacy_tolerance)?;
            nonzero("trajectories.uniform", p.uniform)?;
            nonzero("trajectories.born", p.born)?;
            nonzero("trajectories.bins", p.bins)?;
            nonzero("trajectories.record_every", p.record_every)?;
            if p.conjugacy_points < 4 {
                return Err(config_error("trajectories.conjugacy_points", "need at least 4"));
            }
        }
        if let Some(p) = &self.coherent {
            positive("coherent.conjugacy_tolerance", p.conjugacy_tolerance)?;
            nonzero("coherent.record_every", p.record_every)?;
            nonzero("coherent.snapshot_every", p.snapshot_every)?;
            nonzero("coherent.x_stride", p.x_stride)?;
            if p.conjugacy_points < 4 {
                return Err(config_error("coherent.conjugacy_points", "need at least 4"));
            }
        }
        if let Some(p) = &self.map_orbit {
            if p.y0.is_empty() || p.y0.iter().any(|y| !(0.0..=1.0).contains(y)) {
                return Err(config_error("map_orbit.y0", "need at least one start point in [0, 1]"));
            }
            positive("map_orbit.lyapunov_delta", p.lyapunov_delta)?;
            positive("map_orbit.step_delay", p.step_delay)?;
            positive("map_orbit.divergence_threshold", p.divergence_threshold)?;
            positive("map_orbit.lyapunov_tolerance", p.lyapunov_tolerance)?;
            nonzero("map_orbit.steps", p.steps)?;
            nonzero("map_orbit.lyapunov_window", p.lyapunov_window)?;
        }
        if let Some(p) = &self.pf_relax {
            check_density("pf_relax", &p.density, p.k)?;
            positive("pf_relax.sup_threshold", p.sup_threshold)?;
            nonzero("pf_relax.steps", p.steps)?;
            if p.check_step > p.steps || p.plot_steps.iter().any(|&n| n > p.steps) {
                return Err(config_error("pf_relax.plot_steps", "steps beyond `steps`"));
            }
            if p.spectral_order > GRID_M_MAX {
                return Err(config_error("pf_relax.spectral_order", format!("at most {GRID_M_MAX}")));
            }
        }
        if let Some(p) = &self.entropy_trace {
            check_density("entropy_trace", &p.density, p.k)?;
            positive("entropy_trace.tau", p.tau)?;
            positive("entropy_trace.t_end", p.t_end)?;
            positive("entropy_trace.monotone_slack", p.monotone_slack)?;
            nonzero("entropy_trace.steps", p.steps)?;
            nonzero("entropy_trace.ode_samples", p.ode_samples)?;
        }
        Ok(())
    }

    /// Every tolerance the scenario checks against, by config path.
    pub fn tolerances(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: f64| out.push((k.to_string(), v));
        if matches!(self.kind, Kind::Scatter | Kind::Trajectories | Kind::Coherent) {
            let s = self.splitter_setup();
            push("splitter.propagator.edge_tolerance", s.propagator.edge_tolerance);
            push("splitter.propagator.step_norm_tolerance", s.propagator.step_norm_tolerance);
        }
        if let Some(p) = &self.scatter {
            push("scatter.norm_tolerance", p.norm_tolerance);
            push("scatter.fringe_tolerance", p.fringe_tolerance);
        }
        if let Some(p) = &self.trajectories {
            push("trajectories.split_tolerance", p.split_tolerance);
            push("trajectories.conjugacy_tolerance", p.conjugacy_tolerance);
        }
        if let Some(p) = &self.coherent {
            push("coherent.conjugacy_tolerance", p.conjugacy_tolerance);
        }
        if let Some(p) = &self.map_orbit {
            push("map_orbit.lyapunov_tolerance", p.lyapunov_tolerance);
            push("map_orbit.divergence_threshold", p.divergence_threshold);
        }
        if let Some(p) = &self.pf_relax {
            push("pf_relax.sup_threshold", p.sup_threshold);
        }
        if let Some(p) = &self.entropy_trace {
            push("entropy_trace.monotone_slack", p.monotone_slack);
        }
        out
    }
}

/// A scenario-level pass/fail test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance condition.
    pub target: String,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, value: f64, target: impl Into<String>, passed: bool) -> Self {
        Self {
            name: name.into(),
            value,
            target: target.into(),
            passed,
        }
    }

    fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self::new(name, value, format!("<= {limit:e}"), value <= limit)
    }
}

#[derive(Clone, Debug, Serialize)]
struct Metadata<'a> {
    name: &'a str,
    kind: Kind,
    seed: u64,
    tolerances: Vec<(String, f64)>,
    checks: &'a [Check],
    summary: serde_json::Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub config: ScenarioConfig,
    pub code_version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputFile>,
}

#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub manifest: RunManifest,
    pub checks: Vec<Check>,
}

impl ScenarioOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs one scenario into `out`, writing `manifest.json` last.
pub fn run_scenario(config: &ScenarioConfig, out: &Path) -> Result<ScenarioOutcome> {
    config.validate()?;
    let started = Instant::now();
    let mut dir = OutputDir::create(out)?;
    let (checks, summary) = match config.kind {
        Kind::Scatter => run_scatter(config, &mut dir),
        Kind::Trajectories => run_trajectories(config, &mut dir),
        Kind::Coherent => run_coherent(config, &mut dir),
        Kind::MapOrbit => run_map_orbit(config, &mut dir),
        Kind::PfRelax => run_pf_relax(config, &mut dir),
        Kind::EntropyTrace => run_entropy_trace(config, &mut dir),
    }
    .map_err(|e| e.context(format!("scenario `{}`", config.name())))?;

    dir.write_json(
        "metadata.json",
        &Metadata {
            name: config.name(),
            kind: config.kind,
            seed: config.seed,
            tolerances: config.tolerances(),
            checks: &checks,
            summary,
        },
    )?;
    let manifest = RunManifest {
        config: config.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs: dir.files().to_vec(),
    };
    dir.write_json("manifest.json", &manifest)?;
    Ok(ScenarioOutcome { manifest, checks })
}

type Produced = Result<(Vec<Check>, serde_json::Value)>;

fn json(value: impl Serialize) -> serde_json::Value {
    serde_json::to_value(value).expect("report types serialize")
}

fn snapshot_table(frames: &[&GridWavefunction], x_stride: usize) -> Csv {
    let mut csv = Csv::new(&["t", "x", "re_psi", "im_psi", "abs2"]);
    for psi in frames {
        let g = psi.grid();
        for i in (0..g.len).step_by(x_stride) {
            let v = psi.values()[i];
            csv.row(&[psi.t().into(), g.x(i).into(), v.re.into(), v.im.into(), v.norm_sqr().into()]);
        }
    }
    csv
}

/// Evenly spaced frames in time, always including the one nearest `t = 0`.
fn pick_profiles(frames: &[GridWavefunction], n: usize) -> Vec<&GridWavefunction> {
    let last = frames.len() - 1;
    let mut idx: Vec<usize> = (0..n)
        .map(|i| if n == 1 { 0 } else { (i * last + (n - 1) / 2) / (n - 1) })
        .collect();
    idx.push(impact_index(frames));
    idx.sort_unstable();
    idx.dedup();
    idx.into_iter().map(|i| &frames[i]).collect()
}

fn impact_index(frames: &[GridWavefunction]) -> usize {
    frames
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.t().abs().total_cmp(&b.1.t().abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn emit_field(dir: &mut OutputDir, frames: &[GridWavefunction], x_stride: usize, title: &str) -> Result<()> {
    let field = wiener_field(frames, x_stride)?;
    let mut csv = Csv::new(&["t", "x", "re_psi"]);
    for (t, row) in field.times.iter().zip(&field.re) {
        for (x, re) in field.positions.iter().zip(row) {
            csv.row(&[(*t).into(), (*x).into(), (*re).into()]);
        }
    }
    dir.write_csv("field.csv", &csv)?;

    // The heatmap keeps at most ~360 columns.
    let step = field.positions.len().div_ceil(360);
    let cols: Vec<usize> = (0..field.positions.len()).step_by(step).collect();
    let heat = Heatmap {
        title: title.into(),
        x_label: "x".into(),
        y_label: "t".into(),
        x_range: (field.positions[0], *field.positions.last().unwrap()),
        y_range: (field.times[0], *field.times.last().unwrap()),
        rows: field.times.len(),
        cols: cols.len(),
        values: field.re.iter().flat_map(|row| cols.iter().map(|&c| row[c])).collect(),
    };
    dir.write_text("field.svg", &heat.to_svg())?;
    Ok(())
}

fn run_scatter(config: &ScenarioConfig, dir: &mut OutputDir) -> Produced {
    let p = config.scatter.as_ref().expect("validated");
    let splitter = Splitter::new(config.splitter_setup())?;
    let run = splitter.run(vec![splitter.incident(crate::maps::Gate::Plus)?], &[], 1, Some(p.snapshot_every))?;
    let frames = &run.snapshots[0];
    let psi = &run.final_states[0];

    dir.write_csv("snapshots.csv", &snapshot_table(&pick_profiles(frames, p.profiles), p.x_stride))?;
    emit_field(dir, frames, p.x_stride, "Re psi(x, t)")?;
    let mut chart = Chart::new("|psi|^2 at selected times", "x", "|psi|^2");
    for (i, f) in pick_profiles(frames, p.profiles).into_iter().enumerate() {
        let g = f.grid();
        let pts = (0..g.len).step_by(p.x_stride.min(2)).map(|j| (g.x(j), f.values()[j].norm_sqr())).collect();
        chart = chart.with(Series::new(format!("t = {:.1}", f.t()), pts, Style::Line).colored(crate::plot::PALETTE[i % 6]));
    }
    dir.write_text("profiles.svg", &chart.to_svg())?;

    // Standing wave in front of the barrier while the packet straddles it.
    let impact = &frames[impact_index(frames)];
    let lo = splitter.barrier.width;
    let hi = 0.5 * (splitter.length - splitter.ramp);
    let fringe = fringe_analysis(impact, lo, hi)?;
    let half_wavelength = 0.5 * splitter.wavelength;

    let (plus, minus) = splitter.gate_norms(psi);
    let r2 = splitter.amplitudes.reflectance();
    let drift = run.norm_drift.iter().copied().fold(0.0, f64::max);
    let checks = vec![
        Check::at_most("reflected_norm_error", (plus - r2).abs(), p.norm_tolerance),
        Check::at_most("transmitted_norm_error", (minus - (1.0 - r2)).abs(), p.norm_tolerance),
        Check::at_most(
            "fringe_period_rel_error",
            (fringe.period / half_wavelength - 1.0).abs(),
            p.fringe_tolerance,
        ),
    ];
    let summary = serde_json::json!({
        "reflected": plus,
        "transmitted": minus,
        "expected_reflected": r2,
        "norm_drift": drift,
        "fringe_period": fringe.period,
        "fringe_visibility": fringe.visibility,
        "half_wavelength": half_wavelength,
        "impact_time": impact.t(),
        "frames": frames.len(),
    });
    Ok((checks, summary))
}

fn trajectories_table(trajectories: &[Trajectory]) -> Csv {
    let mut csv = Csv::new(&["traj_id", "t", "x"]);
    for (id, tr) in trajectories.iter().enumerate() {
        for (t, x) in tr.times.iter().zip(&tr.positions) {
            csv.row(&[id.into(), (*t).into(), (*x).into()]);
        }
    }
    csv
}

fn fate_color(fate: Fate) -> &'static str {
    match fate {
        Fate::Reflected => "#d62728",
        Fate::Transmitted => "#1f77b4",
        Fate::Undecided => "#7f7f7f",
    }
}

fn trajectory_chart(title: &str, trajectories: &[Trajectory], fates: Option<&[Fate]>, every: usize) -> Chart {
    let mut chart = Chart::new(title, "t", "x");
    for (i, tr) in trajectories.iter().enumerate().step_by(every.max(1)) {
        let pts = tr.times.iter().copied().zip(tr.positions.iter().copied()).collect();
        let mut s = Series::new("", pts, Style::Line);
        s = s.colored(fates.map_or("#1f77b4", |f| fate_color(f[i])));
        chart = chart.with(s);
    }
    chart
}

fn ymap_outputs(dir: &mut OutputDir, pair: &PairRun, kind: StepKind, stem: &str) -> Result<crate::experiment::ConjugacyReport> {
    let report = pair.conjugacy(kind);
    let mut csv = Csv::new(&["y_in", "y_out", "expected"]);
    for p in &report.points {
        csv.row(&[p.y_in.into(), p.y_out.into(), p.expected.into()]);
    }
    dir.write_csv(&format!("{stem}.csv"), &csv)?;
    let exact: Vec<(f64, f64)> = (0..=400)
        .map(|i| {
            let y = i as f64 / 400.0;
            (y, kind.apply(y))
        })
        .collect();
    let measured = report.points.iter().map(|p| (p.y_in, p.y_out)).collect();
    let title = match kind {
        StepKind::Bernoulli => "decohered splitter: y -> 2y mod 1",
        StepKind::Coherent => "coherent splitter: y -> y/2 + 1/2",
    };
    let chart = Chart::new(title, "y_n", "y_n+1")
        .x_range(0.0, 1.0)
        .y_range(0.0, 1.05)
        .with(Series::new("map", exact, Style::Points).colored("#bbbbbb"))
        .with(Series::new("trajectories", measured, Style::Points).colored("#d62728"));
    dir.write_text(&format!("{stem}.svg"), &chart.to_svg())?;
    Ok(report)
}

fn run_trajectories(config: &ScenarioConfig, dir: &mut OutputDir) -> Produced {
    let p = config.trajectories.as_ref().expect("validated");
    let opts = PairOptions {
        uniform: p.uniform,
        born: p.born,
        conjugacy: p.conjugacy_points,
        seed: config.seed,
        record_every: p.record_every,
        snapshot_every: None,
    };
    let pair = PairRun::execute(config.splitter_setup(), &opts)?;
    let uniform = &pair.run.trajectories[pair.uniform.clone()];
    dir.write_csv("trajectories.csv", &trajectories_table(uniform))?;

    let mut checks = Vec::new();
    let (fate_list, split, reflected_fraction) = match pair.uniform_fates() {
        Ok(f) => {
            let mut csv = Csv::new(&["traj_id", "x0", "fate"]);
            for (id, (x0, fate)) in f.initial_positions.iter().zip(&f.fates).enumerate() {
                let label = fate.to_string();
                csv.row(&[id.into(), (*x0).into(), label.as_str().into()]);
            }
            dir.write_csv("fates.csv", &csv)?;
            checks.push(Check::new("order_preserved", 0.0, "no crossing", true));
            let reflected = f.fraction(Fate::Reflected);
            (Some(f.fates), f.split_point, Some(reflected))
        }
        // The value is the index of the first trajectory out of order.
        Err(Error::OrderViolation { index }) => {
            checks.push(Check::new("order_preserved", index as f64, "no crossing", false));
            (None, None, None)
        }
        Err(e) => return Err(e),
    };
    dir.write_text(
        "trajectories.svg",
        &trajectory_chart("trajectories from the + gate", uniform, fate_list.as_deref(), 4).to_svg(),
    )?;

    let psi_in = pair.splitter.incident(crate::maps::Gate::Plus)?;
    let expected_split = born_quantile(&psi_in, 1.0 - pair.splitter.amplitudes.reflectance())?;
    let split_error = split.map_or(f64::INFINITY, |s| (s - expected_split).abs() / pair.splitter.length);
    checks.push(Check::at_most("split_point_error_over_L", split_error, p.split_tolerance));

    let eq = pair.equivariance(p.bins)?;
    checks.push(Check::at_most("equivariance_l1", eq.distance, eq.bound));
    let bern = ymap_outputs(dir, &pair, StepKind::Bernoulli, "ymap")?;
    checks.push(Check::at_most("conjugacy_max_error", bern.max_error(), p.conjugacy_tolerance));
    let fits = bern.branch_fits();

    let summary = serde_json::json!({
        "scatter": pair.scatter_report(),
        "split_point": split,
        "expected_split_point": expected_split,
        "reflected_fraction": reflected_fraction,
        "equivariance": eq,
        "branch_fits": fits,
    });
    Ok((checks, summary))
}

fn run_coherent(config: &ScenarioConfig, dir: &mut OutputDir) -> Produced {
    let p = config.coherent.as_ref().expect("validated");
    let opts = PairOptions {
        uniform: 0,
        born: 0,
        conjugacy: p.conjugacy_points,
        seed: config.seed,
        record_every: p.record_every,
        snapshot_every: Some(p.snapshot_every),
    };
    let pair = PairRun::execute(config.splitter_setup(), &opts)?;
    let coherent = &pair.run.trajectories[pair.coherent.clone()];
    dir.write_csv("trajectories.csv", &trajectories_table(coherent))?;
    dir.write_text(
        "trajectories.svg",
        &trajectory_chart("coherent superposition: trajectories", coherent, None, 1).to_svg(),
    )?;

    let frames = pair.run.snapshots[0]
        .iter()
        .zip(&pair.run.snapshots[1])
        .map(|(a, b)| PairRun::coherent_of(&[a.clone(), b.clone()]))
        .collect::<Result<Vec<_>>>()?;
    dir.write_csv("snapshots.csv", &snapshot_table(&pick_profiles(&frames, 5), p.x_stride))?;
    emit_field(dir, &frames, p.x_stride, "Re psi(x, t), coherent input")?;

    let report = ymap_outputs(dir, &pair, StepKind::Coherent, "ymap")?;
    let final_state = frames.last().expect("at least the initial frame");
    let (plus, _) = pair.splitter.gate_norms(final_state);
    let checks = vec![Check::at_most("conjugacy_max_error", report.max_error(), p.conjugacy_tolerance)];
    let summary = serde_json::json!({
        "plus_gate_norm": plus / final_state.norm(),
        "branch_fits": report.branch_fits(),
    });
    Ok((checks, summary))
}

fn orbit_table(orbit: &MapOrbit) -> Csv {
    let mut csv = Csv::new(&["n", "y", "branch_bit"]);
    for (n, (y, b)) in orbit.ys.iter().zip(&orbit.branch_bits).enumerate() {
        csv.row(&[n.into(), (*y).into(), Cell::from(*b)]);
    }
    csv
}

fn run_map_orbit(config: &ScenarioConfig, dir: &mut OutputDir) -> Produced {
    let p = config.map_orbit.as_ref().expect("validated");
    let orbits = p
        .y0
        .iter()
        .map(|&y0| iterate_map(y0, p.steps, p.map))
        .collect::<Result<Vec<_>>>()?;
    let mut chart = Chart::new("orbits", "n", "y_n").y_range(0.0, 1.0);
    for (i, orbit) in orbits.iter().enumerate() {
        dir.write_csv(&format!("orbit_{i}.csv"), &orbit_table(orbit))?;
        let pts = orbit.ys.iter().enumerate().map(|(n, y)| (n as f64, *y)).collect();
        chart = chart.with(Series::new(format!("y0 = {}", orbit.y0), pts, Style::LinePoints));
    }
    dir.write_text("orbits.svg", &chart.to_svg())?;

    let lyap = lyapunov_estimate(p.y0[0], p.lyapunov_delta, p.lyapunov_window, p.map, p.step_delay)?;
    dir.write_json("lyapunov.json", &lyap)?;
    let expected = p.map.slope().ln();
    let mut checks = vec![Check::at_most(
        "lyapunov_error",
        (lyap.exponent - expected).abs(),
        p.lyapunov_tolerance,
    )];
    let divergence = (orbits.len() >= 2)
        .then(|| divergence_step(&orbits[0], &orbits[1], p.divergence_threshold))
        .flatten();
    if orbits.len() >= 2 && p.map == StepKind::Bernoulli {
        checks.push(Check::new(
            "divergence_step",
            divergence.map_or(f64::INFINITY, |n| n as f64),
            format!("<= {}", p.divergence_steps),
            divergence.is_some_and(|n| n <= p.divergence_steps),
        ));
    }
    let summary = serde_json::json!({
        "lyapunov": lyap,
        "expected_exponent": expected,
        "divergence_step": divergence,
    });
    Ok((checks, summary))
}

fn initial_density(name: &str, k: u32, center: f64, half_width: usize) -> Result<UnitDensity> {
    match name {
        "spike" => UnitDensity::spike(k, center, half_width),
        _ => UnitDensity::from_fn(k, test_density(name).expect("validated")),
    }
}

fn density_table(f: &UnitDensity) -> Csv {
    let mut csv = Csv::new(&["y", "f"]);
    for (y, v) in f.nodes().into_iter().zip(f.values()) {
        csv.row(&[y.into(), (*v).into()]);
    }
    csv
}

fn run_pf_relax(config: &ScenarioConfig, dir: &mut OutputDir) -> Produced {
    let p = config.pf_relax.as_ref().expect("validated");
    let f0 = initial_density(&p.density, p.k, p.spike_center, p.spike_half_width)?;
    let iterates = f0.iterate(p.steps);
    let trace = relaxation_trace(&f0, p.steps);

    let mut csv = Csv::new(&["n", "sup", "l1"]);
    for (n, d) in trace.iter().enumerate() {
        csv.row(&[n.into(), d.sup.into(), d.l1.into()]);
    }
    dir.write_csv("relaxation.csv", &csv)?;
    let mut chart = Chart::new(format!("density under the transfer operator ({})", p.density), "y", "f_n(y)").x_range(0.0, 1.0);
    for &n in &p.plot_steps {
        let f = &iterates[n];
        dir.write_csv(&format!("density_{n:02}.csv"), &density_table(f))?;
        let pts = f.nodes().into_iter().zip(f.values().iter().copied()).collect();
        chart = chart.with(Series::new(format!("n = {n}"), pts, Style::Line));
    }
    dir.write_text("densities.svg", &chart.to_svg())?;
    let sup_pts = trace.iter().enumerate().map(|(n, d)| (n as f64, d.sup)).collect();
    let l1_pts = trace.iter().enumerate().map(|(n, d)| (n as f64, d.l1)).collect();
    let chart = Chart::new("distance from equilibrium", "n", "distance")
        .log_y()
        .with(Series::new("sup |f_n - 1|", sup_pts, Style::LinePoints))
        .with(Series::new("L1", l1_pts, Style::LinePoints));
    dir.write_text("relaxation.svg", &chart.to_svg())?;

    let mut summary = serde_json::json!({
        "geometric_rate": geometric_rate(&trace),
        "final_sup": trace.last().map(|d| d.sup),
    });
    if p.spectral_order > 0 && p.density != "spike" {
        // Rough densities fall back to the highest order they support.
        let mut order = p.spectral_order;
        let dec = loop {
            match spectral_coefficients(&f0, order) {
                Err(Error::RoughDensity { order: bad, .. }) if bad > 1 => order = bad - 1,
                other => break other?,
            }
        };
        dir.write_json("decomposition.json", &dec)?;
        summary["spectral_order_used"] = order.into();
        summary["spectral_residual"] = json(dec.residual);
    }
    let checks = vec![Check::at_most(
        &format!("sup_distance_at_step_{}", p.check_step),
        trace[p.check_step].sup,
        p.sup_threshold,
    )];
    Ok((checks, summary))
}

fn run_entropy_trace(config: &ScenarioConfig, dir: &mut OutputDir) -> Produced {
    let p = config.entropy_trace.as_ref().expect("validated");
    let f0 = initial_density(&p.density, p.k, p.spike_center, p.spike_half_width)?;
    let mut checks = Vec::new();
    let trace = match entropy_trace_pf(&f0, p.steps) {
        Ok(t) => t,
        Err(Error::MonotonicityViolation { before, after, .. }) => {
            checks.push(Check::at_most("entropy_decrease", before - after, p.monotone_slack));
            return Ok((checks, serde_json::Value::Null));
        }
        Err(e) => return Err(e),
    };
    let mut csv = Csv::new(&["n", "S", "dS_bound"]);
    for ((n, s), b) in trace.steps.iter().zip(&trace.s).zip(&trace.ds_bound) {
        csv.row(&[(*n).into(), (*s).into(), (*b).into()]);
    }
    dir.write_csv("entropy.csv", &csv)?;

    let ode = ode_trace(&f0, p.tau, p.t_end, p.ode_samples)?;
    let mut csv = Csv::new(&["t", "sup_dist", "S"]);
    for s in &ode {
        csv.row(&[s.t.into(), s.sup_dist.into(), s.s.into()]);
    }
    dir.write_csv("ode.csv", &csv)?;

    let pf_pts = trace.steps.iter().zip(&trace.s).map(|(n, s)| (*n as f64, *s)).collect();
    let chart = Chart::new("entropy along the transfer-operator trace", "n", "S_n").with(Series::new(
        "S_n",
        pf_pts,
        Style::LinePoints,
    ));
    dir.write_text("entropy.svg", &chart.to_svg())?;
    let chart = Chart::new("relaxation model", "t", "")
        .with(Series::new("S(t)", ode.iter().map(|s| (s.t, s.s)).collect(), Style::Line))
        .with(Series::new("dS/dt", ode.iter().map(|s| (s.t, s.ds_dt)).collect(), Style::Line))
        .with(Series::new("lower bound", ode.iter().map(|s| (s.t, s.lower_bound)).collect(), Style::Line));
    dir.write_text("ode.svg", &chart.to_svg())?;

    let max_decrease = trace.s.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::at_most("entropy_decrease", max_decrease.max(0.0), p.monotone_slack));
    let terminal = *trace.s.last().expect("trace has the initial entry");
    checks.push(Check::new(
        "terminal_entropy",
        terminal,
        "in [-1e-9, 0] (smooth densities)",
        p.density == "spike" || (-1e-9..=0.0).contains(&terminal),
    ));
    let chain = ode.iter().map(|s| (s.ds_dt - s.lower_bound).min(s.lower_bound)).fold(f64::INFINITY, f64::min);
    checks.push(Check::new("ode_bound_chain_margin", chain, ">= 0", chain >= 0.0));
    let summary = serde_json::json!({
        "initial_entropy": trace.s[0],
        "terminal_entropy": terminal,
    });
    Ok((checks, summary))
}

/// A scenario shipped with the binary.
pub struct BuiltIn {
    pub name: &'static str,
    pub toml: &'static str,
}

pub const BUILT_IN: [BuiltIn; 7] = [
    BuiltIn {
        name: "fig1_scatter",
        toml: include_str!("../scenarios/fig1_scatter.toml"),
    },
    BuiltIn {
        name: "scatter_asymmetric",
        toml: include_str!("../scenarios/scatter_asymmetric.toml"),
    },
    BuiltIn {
        name: "fig2_trajectories",
        toml: include_str!("../scenarios/fig2_trajectories.toml"),
    },
    BuiltIn {
        name: "fig3_coherent",
        toml: include_str!("../scenarios/fig3_coherent.toml"),
    },
    BuiltIn {
        name: "fig5_orbit",
        toml: include_str!("../scenarios/fig5_orbit.toml"),
    },
    BuiltIn {
        name: "fig6_pf_relax",
        toml: include_str!("../scenarios/fig6_pf_relax.toml"),
    },
    BuiltIn {
        name: "entropy_trace",
        toml: include_str!("../scenarios/entropy_trace.toml"),
    },
];

pub fn built_in(name: &str) -> Option<&'static BuiltIn> {
    BUILT_IN.iter().find(|b| b.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn built_in_scenarios_parse() {
        for b in &BUILT_IN {
            let c = ScenarioConfig::from_toml(b.toml).unwrap_or_else(|e| panic!("{}: {e}", b.name));
            assert_eq!(c.name(), b.name);
        }
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let err = ScenarioConfig::from_toml("kind = \"pf_relax\"\n[pf_relax]\nstpes = 3\n").unwrap_err();
        match err {
            Error::Config { path, message } => {
                assert_eq!(path, "pf_relax.stpes");
                assert!(message.contains("stpes"), "{message}");
            }
            e => panic!("{e}"),
        }
        let err = ScenarioConfig::from_toml("kind = \"scatter\"\n[scatter]\n[splitter.propagator]\ndt_safty = 1\n")
            .unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "splitter.propagator.dt_safty"), "{err}");
    }

    #[test]
    fn validation_rejects_bad_values() {
        let bad = [
            "kind = \"pf_relax\"\n",
            "kind = \"pf_relax\"\n[pf_relax]\nsup_threshold = 0.0\n",
            "kind = \"pf_relax\"\n[pf_relax]\ndensity = \"nope\"\n",
            "kind = \"map_orbit\"\n[map_orbit]\n[pf_relax]\n",
            "kind = \"map_orbit\"\n[map_orbit]\n[splitter]\n",
            "kind = \"scatter\"\n[scatter]\n[splitter]\ndt_factor = -1.0\n",
            "kind = \"walk\"\n",
        ];
        for text in bad {
            assert!(
                matches!(ScenarioConfig::from_toml(text), Err(Error::Config { .. })),
                "accepted: {text}"
            );
        }
    }

    #[test]
    fn map_orbit_scenario_writes_manifest_last() {
        let dir = tempfile::tempdir().unwrap();
        let config = ScenarioConfig::from_toml(built_in("fig5_orbit").unwrap().toml).unwrap();
        let outcome = run_scenario(&config, dir.path()).unwrap();
        assert!(outcome.passed(), "{:?}", outcome.checks);
        let names: Vec<&str> = outcome.manifest.outputs.iter().map(|f| f.path.as_str()).collect();
        assert!(names.contains(&"orbit_0.csv") && names.contains(&"lyapunov.json"));
        assert_eq!(*names.last().unwrap(), "metadata.json");
        for f in &outcome.manifest.outputs {
            let bytes = std::fs::read(dir.path().join(&f.path)).unwrap();
            assert_eq!(crate::io::sha256_hex(&bytes), f.sha256);
        }
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["outputs"].as_array().unwrap().len(), names.len());
    }

    #[test]
    fn pf_and_entropy_scenarios_pass() {
        for name in ["fig6_pf_relax", "entropy_trace"] {
            let dir = tempfile::tempdir().unwrap();
            let config = ScenarioConfig::from_toml(built_in(name).unwrap().toml).unwrap();
            let outcome = run_scenario(&config, dir.path()).unwrap();
            assert!(outcome.passed(), "{name}: {:?}", outcome.checks);
        }
    }

    #[test]
    fn profiles_include_the_impact_frame() {
        let s = crate::splitter::Splitter::new(SplitterSetup {
            packet_wavelengths: 10.0,
            points_per_wavelength: 30.0,
            ..SplitterSetup::default()
        })
        .unwrap();
        let psi = s.incident(crate::maps::Gate::Plus).unwrap();
        let frames: Vec<GridWavefunction> = [-3.0, -1.0, 0.5, 2.0, 4.0]
            .iter()
            .map(|&t| {
                let mut f = psi.clone();
                f.set_t(t);
                f
            })
            .collect();
        let picked: Vec<f64> = pick_profiles(&frames, 2).iter().map(|f| f.t()).collect();
        assert_eq!(picked, vec![-3.0, 0.5, 4.0]);
    }
}
