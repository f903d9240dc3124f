//! The acceptance suite: each criterion measured, compared with its
//! tolerance and collected into a report.

use std::f64::consts::{LN_2, PI};
use std::fmt::Write as _;
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;

use crate::entropy::{entropy_trace_pf, ode_trace, MONOTONE_SLACK};
use crate::error::Result;
use crate::experiment::{PairOptions, PairRun};
use crate::frobenius::{
    bernoulli_poly, derivative_contraction, geometric_rate, grid_nodes, pf_apply_values, relaxation_distance,
    relaxation_trace, steps_to_relax, test_density, UnitDensity, DEFAULT_K, GRID_M_MAX,
};
use crate::maps::{divergence_step, iterate_map, lyapunov_estimate, Gate, StepKind};
use crate::splitter::{Splitter, SplitterSetup};
use crate::trajectories::born_quantile;
use crate::wavefield::{fringe_analysis, scattering_amplitudes, BarrierSpec, Units};

/// Smooth densities for the relaxation and entropy criteria.
pub const SMOOTH_DENSITIES: [&str; 3] = ["bumps", "mix", "wiggle"];
/// The near-singular contrast density: four nodes either side of `y = 0.3`.
pub const SPIKE: (f64, usize) = (0.3, 4);
pub const ASYMMETRIC_REFLECTANCE: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    /// Headline value compared with `tolerance`.
    pub measured: f64,
    pub tolerance: String,
    pub passed: bool,
    /// Secondary measurements.
    pub detail: String,
    pub seconds: f64,
}

impl Criterion {
    fn failed_to_run(id: u8, name: &'static str, err: &crate::Error) -> Self {
        Self {
            id,
            name,
            measured: f64::NAN,
            tolerance: "-".into(),
            passed: false,
            detail: format!("did not run: {err}"),
            seconds: 0.0,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<34} {:<4} measured {:<12.4e} tolerance {}  ({})",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.measured,
            self.tolerance,
            self.detail
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Propagator time step as a multiple of its accuracy bound. Values above
    /// 1 are the negative control: the solver refuses the step.
    pub dt_factor: f64,
    pub splitter: SplitterSetup,
    pub pair: PairOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            dt_factor: 1.0,
            splitter: SplitterSetup::default(),
            pair: PairOptions {
                uniform: 200,
                born: 2000,
                conjugacy: 80,
                seed: 0,
                record_every: 100,
                snapshot_every: None,
            },
        }
    }
}

impl VerifyOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn setup(&self) -> SplitterSetup {
        SplitterSetup {
            dt_factor: self.dt_factor,
            ..self.splitter.clone()
        }
    }

    /// The shared two-gate run. The only snapshot kept besides the end points
    /// is the impact frame.
    pub fn pair_run(&self) -> Result<PairRun> {
        let setup = self.setup();
        let opts = PairOptions {
            seed: self.seed,
            snapshot_every: Some(usize::MAX),
            ..self.pair.clone()
        };
        PairRun::execute(setup, &opts)
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Report {
    pub criteria: Vec<Criterion>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:<4} {:<34} {:>12}  {:<34} verdict", "id", "criterion", "measured", "tolerance").unwrap();
        for c in &self.criteria {
            writeln!(
                out,
                "{:<4} {:<34} {:>12.4e}  {:<34} {}",
                c.id,
                c.name,
                c.measured,
                c.tolerance,
                if c.passed { "PASS" } else { "FAIL" }
            )
            .unwrap();
            writeln!(out, "     {} [{:.1} s]", c.detail, c.seconds).unwrap();
        }
        out
    }
}

fn timed(f: impl FnOnce() -> Criterion) -> Criterion {
    let start = Instant::now();
    let mut c = f();
    c.seconds += start.elapsed().as_secs_f64();
    c
}

/// `|T|²`, `arg T / π` and `|R − iT|/|R|` for `q = ratio·|k|` and `ε = λ/4π`,
/// for the packet incident from `x > 0` (`k = −1`).
fn calibration_amplitudes(ratio: f64) -> Result<(f64, f64, f64)> {
    let units = Units::default();
    let k: f64 = -1.0;
    let width = 2.0 * PI / k.abs() / (4.0 * PI);
    let amps = scattering_amplitudes(k, &BarrierSpec::from_interior_ratio(k, ratio, width, units), units)?;
    let r_vs_it = (amps.r - Complex64::i() * amps.t).norm() / amps.r.norm();
    Ok((amps.transmittance(), amps.t.arg() / PI, r_vs_it))
}

pub fn splitter_calibration() -> Criterion {
    timed(|| {
        let name = "splitter calibration";
        let ratio = match Splitter::new(SplitterSetup::default()) {
            Ok(s) => s.interior_ratio,
            Err(e) => return Criterion::failed_to_run(1, name, &e),
        };
        let (cal, literal) = match (calibration_amplitudes(ratio), calibration_amplitudes(2.5)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return Criterion::failed_to_run(1, name, &e),
        };
        let (t2, arg, r_it) = cal;
        let passed = (t2 - 0.5).abs() <= 0.005 && (arg - 0.267).abs() <= 0.005 && r_it <= 1e-3;
        Criterion {
            id: 1,
            name,
            measured: r_it,
            tolerance: "|R - iT|/|R| <= 1e-3".into(),
            passed,
            detail: format!(
                "q/k = {ratio:.6}: |T|^2 = {t2:.6}, arg T = {arg:.4} pi; at q/k = 2.5: |T|^2 = {:.6}, arg T = {:.4} pi, |R - iT|/|R| = {:.2e}",
                literal.0, literal.1, literal.2
            ),
            seconds: 0.0,
        }
    })
}

/// Output norms of the 50/50 pair run and of a single asymmetric run.
pub fn scattering_agreement(pair: std::result::Result<&PairRun, &crate::Error>, opts: &VerifyOptions) -> Criterion {
    timed(|| {
        let name = "analytic-numeric scattering";
        let pair = match pair {
            Ok(p) => p,
            Err(e) => return Criterion::failed_to_run(2, name, e),
        };
        let sym = pair.scatter_report();
        let asym = Splitter::new(SplitterSetup {
            dt_factor: opts.dt_factor,
            ..SplitterSetup::asymmetric(ASYMMETRIC_REFLECTANCE)
        })
        .and_then(|s| {
            let run = s.run(vec![s.incident(Gate::Plus)?], &[], 1, None)?;
            let (plus, minus) = s.gate_norms(&run.final_states[0]);
            let r2 = s.amplitudes.reflectance();
            let rel = ((plus - r2) / r2).abs().max(((minus - (1.0 - r2)) / (1.0 - r2)).abs());
            Ok((rel, plus, r2, run.norm_drift[0]))
        });
        let (asym_rel, asym_plus, asym_r2, asym_drift) = match asym {
            Ok(v) => v,
            Err(e) => return Criterion::failed_to_run(2, name, &e),
        };
        let worst = sym.relative_error().max(asym_rel);
        let drift = sym.norm_drift.max(asym_drift);
        Criterion {
            id: 2,
            name,
            measured: worst,
            tolerance: "relative error <= 0.02".into(),
            passed: worst <= 0.02,
            detail: format!(
                "50/50: reflected {:.5} vs {:.5}; asymmetric: reflected {asym_plus:.5} vs {asym_r2:.5}; norm drift {drift:.2e}",
                sym.reflected, sym.expected_reflected
            ),
            seconds: 0.0,
        }
    })
}

pub fn no_crossing_split(pair: std::result::Result<&PairRun, &crate::Error>) -> Criterion {
    timed(|| {
        let name = "no crossing, H = 0 split";
        let pair = match pair {
            Ok(p) => p,
            Err(e) => return Criterion::failed_to_run(3, name, e),
        };
        let fates = match pair.uniform_fates() {
            Ok(f) => f,
            Err(e) => return Criterion::failed_to_run(3, name, &e),
        };
        let split = match pair
            .splitter
            .incident(Gate::Plus)
            .and_then(|psi| born_quantile(&psi, 1.0 - pair.splitter.amplitudes.reflectance()))
        {
            Ok(x) => x,
            Err(e) => return Criterion::failed_to_run(3, name, &e),
        };
        let err = fates
            .split_point
            .map_or(f64::INFINITY, |s| (s - split).abs() / pair.splitter.length);
        Criterion {
            id: 3,
            name,
            measured: err,
            tolerance: "|split - center| <= 0.02 L".into(),
            passed: err <= 0.02 && fates.trapped == 0,
            detail: format!(
                "{} trajectories, order preserved, split at {:.4} vs packet center {:.4}, reflected fraction {:.3}",
                fates.fates.len(),
                fates.split_point.unwrap_or(f64::NAN),
                split,
                fates.fraction(crate::trajectories::Fate::Reflected)
            ),
            seconds: 0.0,
        }
    })
}

pub fn equivariance(pair: std::result::Result<&PairRun, &crate::Error>) -> Criterion {
    timed(|| {
        let name = "equivariance";
        let pair = match pair {
            Ok(p) => p,
            Err(e) => return Criterion::failed_to_run(4, name, e),
        };
        match pair.equivariance(20) {
            Ok(r) => Criterion {
                id: 4,
                name,
                measured: r.distance,
                tolerance: format!("L1 <= 3 sqrt(bins/N) = {:.3}", r.bound),
                passed: r.passed(),
                detail: format!("{} Born samples, {} bins", r.samples, r.bins),
                seconds: 0.0,
            },
            Err(e) => Criterion::failed_to_run(4, name, &e),
        }
    })
}

pub fn map_conjugacy(pair: std::result::Result<&PairRun, &crate::Error>) -> Criterion {
    timed(|| {
        let name = "map conjugacy";
        let pair = match pair {
            Ok(p) => p,
            Err(e) => return Criterion::failed_to_run(5, name, e),
        };
        let bern = pair.conjugacy(StepKind::Bernoulli);
        let coh = pair.conjugacy(StepKind::Coherent);
        let worst = bern.max_error().max(coh.max_error());
        Criterion {
            id: 5,
            name,
            measured: worst,
            tolerance: "max |y_out - map(y_in)| <= 0.02".into(),
            passed: worst <= 0.02,
            detail: format!(
                "{} points per case; decohered {:.4}, coherent {:.4}",
                bern.points.len(),
                bern.max_error(),
                coh.max_error()
            ),
            seconds: 0.0,
        }
    })
}

pub fn lyapunov() -> Criterion {
    timed(|| {
        let name = "Lyapunov exponent";
        let report = match lyapunov_estimate(0.22, 1e-10, 20, StepKind::Bernoulli, 1.0) {
            Ok(r) => r,
            Err(e) => return Criterion::failed_to_run(6, name, &e),
        };
        let lin = match UnitDensity::from_fn(DEFAULT_K, |y| 1.0 + 0.8 * (y - 0.5)) {
            Ok(f) => f,
            Err(e) => return Criterion::failed_to_run(6, name, &e),
        };
        let contraction = derivative_contraction(&lin);
        let err = (report.exponent - LN_2).abs();
        Criterion {
            id: 6,
            name,
            measured: err,
            tolerance: "|lambda - ln 2| <= 1e-12".into(),
            passed: err <= 1e-12 && (contraction - 0.5).abs() <= 1e-10,
            detail: format!(
                "exponent {:.15} over {} steps; derivative contraction {:.12}",
                report.exponent, report.window, contraction
            ),
            seconds: 0.0,
        }
    })
}

/// `max_m sup|U B_m − 2^{−m} B_m|` on the `2^k + 1` grid.
pub fn eigen_residual(k: u32) -> Result<f64> {
    let nodes = grid_nodes(k);
    let mut worst = 0.0f64;
    for m in 1..=GRID_M_MAX {
        let b = nodes.iter().map(|&y| bernoulli_poly(m, y)).collect::<Result<Vec<f64>>>()?;
        let ub = pf_apply_values(&b)?;
        let scale = 0.5f64.powi(m as i32);
        let r = ub.iter().zip(&b).map(|(u, v)| (u - scale * v).abs()).fold(0.0, f64::max);
        worst = worst.max(r);
    }
    Ok(worst)
}

pub fn pf_spectrum() -> Criterion {
    timed(|| {
        let name = "transfer-operator spectrum";
        let (r12, r13) = match (eigen_residual(DEFAULT_K), eigen_residual(DEFAULT_K + 1)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return Criterion::failed_to_run(7, name, &e),
        };
        Criterion {
            id: 7,
            name,
            measured: r12,
            tolerance: "max_m sup error <= 1e-8 at K = 12".into(),
            passed: r12 <= 1e-8,
            detail: format!(
                "m = 1..{GRID_M_MAX}; linear interpolation error h^2/8 |B_m''| dominates; K = 13 gives {r13:.2e}"
            ),
            seconds: 0.0,
        }
    })
}

fn smooth(name: &str) -> Result<UnitDensity> {
    UnitDensity::from_fn(DEFAULT_K, test_density(name).expect("known density"))
}

pub fn relaxation_attractor() -> Criterion {
    timed(|| {
        let name = "relaxation attractor";
        let mut worst_rate = 0.0f64;
        let mut worst_d20 = 0.0f64;
        let mut parts = Vec::new();
        let mut smooth_d3 = 0.0f64;
        for d in SMOOTH_DENSITIES {
            let f0 = match smooth(d) {
                Ok(f) => f,
                Err(e) => return Criterion::failed_to_run(8, name, &e),
            };
            let trace = relaxation_trace(&f0, 20);
            let rate = geometric_rate(&trace);
            worst_rate = worst_rate.max(rate);
            worst_d20 = worst_d20.max(trace[20].sup);
            smooth_d3 = smooth_d3.max(trace[3].sup);
            parts.push(format!("{d}: rate {rate:.3}, d20 {:.1e}", trace[20].sup));
        }
        let spikes = [DEFAULT_K, DEFAULT_K + 2]
            .map(|k| UnitDensity::spike(k, SPIKE.0, SPIKE.1).map(|f| (steps_to_relax(&f, 0.01, 60), f)));
        let (wait12, wait14, spike_d3) = match spikes {
            [Ok((a, f)), Ok((b, _))] => (a, b, relaxation_distance(&f.iterate(3)[3]).sup),
            [Err(e), _] | [_, Err(e)] => return Criterion::failed_to_run(8, name, &e),
        };
        // The spike only relaxes once the doubling has stretched it across the
        // interval; its waiting time grows without bound as the grid refines.
        let contrast = spike_d3 > 100.0 * smooth_d3 && matches!((wait12, wait14), (Some(a), Some(b)) if b >= a + 2);
        let passed = worst_rate <= 0.55 && worst_d20 < 1e-5 && contrast;
        parts.push(format!(
            "spike: sup after 3 steps {spike_d3:.2} vs smooth {smooth_d3:.1e}; steps to sup < 0.01: {} at K = 12, {} at K = 14",
            wait12.map_or("never".into(), |n| n.to_string()),
            wait14.map_or("never".into(), |n| n.to_string())
        ));
        Criterion {
            id: 8,
            name,
            measured: worst_rate,
            tolerance: "rate <= 0.55, d20 < 1e-5, spike contrast".into(),
            passed,
            detail: parts.join("; "),
            seconds: 0.0,
        }
    })
}

pub fn h_theorem() -> Criterion {
    timed(|| {
        let name = "H-theorem";
        let mut densities = Vec::new();
        for d in SMOOTH_DENSITIES {
            match smooth(d) {
                Ok(f) => densities.push((d, f)),
                Err(e) => return Criterion::failed_to_run(9, name, &e),
            }
        }
        match UnitDensity::spike(DEFAULT_K, SPIKE.0, SPIKE.1) {
            Ok(f) => densities.push(("spike", f)),
            Err(e) => return Criterion::failed_to_run(9, name, &e),
        }
        let mut worst_drop = f64::NEG_INFINITY;
        let mut terminal_ok = true;
        let mut chain_margin = f64::INFINITY;
        let mut parts = Vec::new();
        for (d, f0) in &densities {
            let trace = match entropy_trace_pf(f0, 20) {
                Ok(t) => t,
                Err(e) => return Criterion::failed_to_run(9, name, &e),
            };
            let drop = trace.s.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max);
            worst_drop = worst_drop.max(drop);
            let terminal = *trace.s.last().unwrap();
            terminal_ok &= (-1e-9..=0.0).contains(&terminal);
            parts.push(format!("{d}: S0 {:.3e} -> S20 {terminal:.2e}", trace.s[0]));
            // dS/dt is infinite at t = 0 where the spike vanishes.
            if *d == "spike" {
                continue;
            }
            let ode = match ode_trace(f0, 1.0, 5.0, 50) {
                Ok(o) => o,
                Err(e) => return Criterion::failed_to_run(9, name, &e),
            };
            for s in &ode {
                chain_margin = chain_margin.min((s.ds_dt - s.lower_bound).min(s.lower_bound));
            }
        }
        parts.push(format!("ODE (smooth densities): min of (dS/dt - bound, bound) = {chain_margin:.2e}"));
        Criterion {
            id: 9,
            name,
            measured: worst_drop.max(0.0),
            tolerance: format!("decrease <= {MONOTONE_SLACK:e}, S20 in [-1e-9, 0], chain >= 0"),
            passed: worst_drop <= MONOTONE_SLACK && terminal_ok && chain_margin >= 0.0,
            detail: parts.join("; "),
            seconds: 0.0,
        }
    })
}

pub fn figures(pair: std::result::Result<&PairRun, &crate::Error>) -> Criterion {
    timed(|| {
        let name = "figure reproduction";
        let mut parts = Vec::new();
        let mut passed = true;
        let mut fringe_err = f64::NAN;

        match pair {
            Ok(pair) => {
                let frames = &pair.run.snapshots[0];
                let impact = frames
                    .iter()
                    .min_by(|a, b| a.t().abs().total_cmp(&b.t().abs()))
                    .expect("initial frame is always kept");
                let s = &pair.splitter;
                match fringe_analysis(impact, s.barrier.width, 0.5 * (s.length - s.ramp)) {
                    Ok(f) => {
                        fringe_err = (f.period / (0.5 * s.wavelength) - 1.0).abs();
                        passed &= fringe_err <= 0.05;
                        parts.push(format!("fig1 fringe period {:.4} vs lambda/2 {:.4}", f.period, 0.5 * s.wavelength));
                    }
                    Err(e) => {
                        passed = false;
                        parts.push(format!("fig1 failed: {e}"));
                    }
                }
                let [lo, hi] = pair.conjugacy(StepKind::Bernoulli).branch_fits();
                let fit_err = (lo.slope - 2.0)
                    .abs()
                    .max((hi.slope - 2.0).abs())
                    .max(lo.offset.abs())
                    .max((hi.offset + 1.0).abs());
                passed &= fit_err <= 0.05;
                parts.push(format!(
                    "fig2 branches: slope {:.3}/{:.3}, offset {:.3}/{:.3}",
                    lo.slope, hi.slope, lo.offset, hi.offset
                ));
            }
            Err(e) => {
                passed = false;
                parts.push(format!("figs 1-2 did not run: {e}"));
            }
        }

        let div = match (
            iterate_map(0.22, 25, StepKind::Bernoulli),
            iterate_map(0.220001, 25, StepKind::Bernoulli),
        ) {
            (Ok(a), Ok(b)) => divergence_step(&a, &b, 0.1),
            _ => None,
        };
        passed &= div.is_some_and(|n| n <= 25);
        parts.push(format!("fig5 divergence at step {}", div.map_or("never".into(), |n| n.to_string())));

        match smooth("bumps") {
            Ok(f0) => {
                let d3 = relaxation_distance(&f0.iterate(3)[3]).sup;
                passed &= d3 < 0.01;
                parts.push(format!("fig6 sup after 3 steps {d3:.2e}"));
            }
            Err(e) => {
                passed = false;
                parts.push(format!("fig6 failed: {e}"));
            }
        }
        Criterion {
            id: 10,
            name,
            measured: fringe_err,
            tolerance: "fringe 5%, fits 0.05, div <= 25, sup3 < 0.01".into(),
            passed,
            detail: parts.join("; "),
            seconds: 0.0,
        }
    })
}

/// Runs every criterion. The splitter run is shared by criteria 2-5 and 10.
pub fn verify_all(opts: &VerifyOptions) -> Report {
    let start = Instant::now();
    let pair = opts.pair_run();
    let pair_seconds = start.elapsed().as_secs_f64();
    let pair_ref = pair.as_ref();
    let mut criteria = vec![
        splitter_calibration(),
        scattering_agreement(pair_ref, opts),
        no_crossing_split(pair_ref),
        equivariance(pair_ref),
        map_conjugacy(pair_ref),
        lyapunov(),
        pf_spectrum(),
        relaxation_attractor(),
        h_theorem(),
        figures(pair_ref),
    ];
    for c in criteria.iter_mut().filter(|c| matches!(c.id, 2 | 3)) {
        c.seconds += pair_seconds;
    }
    Report { criteria }
}
