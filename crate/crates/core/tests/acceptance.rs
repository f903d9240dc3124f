//! Acceptance criteria 1-10. Each test prints one PASS/FAIL line.

use std::io::Write;
use std::sync::OnceLock;

use bohmlab::experiment::PairRun;
use bohmlab::verify::{self, Criterion, VerifyOptions};

fn options() -> &'static VerifyOptions {
    static OPTS: OnceLock<VerifyOptions> = OnceLock::new();
    OPTS.get_or_init(VerifyOptions::default)
}

// Criteria 2-5 and 10 read the same splitter run.
fn pair() -> Result<&'static PairRun, &'static bohmlab::Error> {
    static PAIR: OnceLock<bohmlab::Result<PairRun>> = OnceLock::new();
    PAIR.get_or_init(|| options().pair_run()).as_ref()
}

fn check(c: Criterion) {
    // Straight to stderr so the line shows up without --nocapture.
    writeln!(std::io::stderr(), "{}", c.line()).unwrap();
    assert!(c.passed, "{}", c.line());
}

#[test]
fn criterion_01_splitter_calibration() {
    check(verify::splitter_calibration());
}

#[test]
fn criterion_02_scattering_agreement() {
    check(verify::scattering_agreement(pair(), options()));
}

#[test]
fn criterion_03_no_crossing_split() {
    check(verify::no_crossing_split(pair()));
}

#[test]
fn criterion_04_equivariance() {
    check(verify::equivariance(pair()));
}

#[test]
fn criterion_05_map_conjugacy() {
    check(verify::map_conjugacy(pair()));
}

#[test]
fn criterion_06_lyapunov() {
    check(verify::lyapunov());
}

#[test]
fn criterion_07_transfer_operator_spectrum() {
    check(verify::pf_spectrum());
}

#[test]
fn criterion_08_relaxation_attractor() {
    check(verify::relaxation_attractor());
}

#[test]
fn criterion_09_h_theorem() {
    check(verify::h_theorem());
}

#[test]
fn criterion_10_figures() {
    check(verify::figures(pair()));
}
