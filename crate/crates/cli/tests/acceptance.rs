//! Acceptance matrix: one PASS/FAIL line per criterion.
//!
//! Criteria whose published constants disagree with what the computation
//! gives are reported as FAIL. For those the target checks that the
//! disagreement is still exactly the documented one, so the run only fails
//! on unexpected results.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use reslab::suites::{Check, Report, Session, Suite};

/// Runtime budget in seconds (criterion 4 allows one minute per constant,
/// criterion 12 twenty minutes per case).
fn budget(s: Suite) -> f64 {
    match s {
        Suite::LemmaComp => 5.0,
        Suite::Bessel => 10.0,
        Suite::FreeSpace => 30.0,
        Suite::GreenConstants => 240.0,
        Suite::Projector | Suite::N5Anomalous => 120.0,
        Suite::Dim3Resonance | Suite::ConicOrders | Suite::Rb0 | Suite::Unboundedness => 300.0,
        Suite::N4Series => 600.0,
        Suite::IndexAudit => 10.0,
        Suite::RieszThresholds => 3600.0,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Known discrepancy and the test that it is still the same one.
fn known(s: Suite) -> Option<(&'static str, fn(&Report) -> bool)> {
    match s {
        Suite::LemmaComp => Some((
            "the integral is exactly half the published closed form",
            |r| {
                r.checks.iter().all(|c| !c.pass && rel(c.measured, 0.5 * c.predicted) < 1e-9)
            },
        )),
        Suite::GreenConstants => Some((
            "lemma coefficient has the published magnitude and the opposite sign",
            |r| {
                let fails: Vec<&Check> = r.failures().collect();
                fails.len() == 1
                    && fails[0].name.starts_with("lemma coefficient")
                    && rel(fails[0].measured, -fails[0].predicted) < 1e-5
            },
        )),
        Suite::Dim3Resonance => Some((
            "the d11 term enters the fitted k^-1 coefficient with sign +, matching the quadrature of the other sign convention",
            |r| {
                let fails: Vec<&Check> = r.failures().collect();
                !fails.is_empty()
                    && fails.iter().all(|c| c.name.starts_with("fitted k^-1 = psi~psi~ - d11"))
                    && r.checks.iter().filter(|c| c.name.starts_with("quadrature")).all(|c| c.pass)
            },
        )),
        Suite::N4Series => Some((
            "coefficient ratio follows gamma - log 2 - fp, not -omega",
            |r| {
                let fails: Vec<&Check> = r.failures().collect();
                fails.len() == 1 && fails[0].name == "R_{0,2}/R_{0,1} = -omega"
            },
        )),
        _ => None,
    }
}

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut session = Session::new(BTreeMap::new(), 0);
    let mut unexpected = 0;
    let mut lines = Vec::new();
    for suite in Suite::ALL {
        if !filter.is_empty() && !filter.iter().any(|f| suite.name().contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let result = session.run(suite);
        let secs = t.elapsed().as_secs_f64();
        let tag = format!("C{:02} {:<17}", suite.criterion(), suite.name());
        let line = match result {
            Err(e) => {
                unexpected += 1;
                format!("FAIL {tag} error: {e}")
            }
            Ok(rep) => {
                let n_pass = rep.checks.iter().filter(|c| c.pass).count();
                let in_time = secs <= budget(suite);
                let pass = rep.pass && in_time;
                for c in rep.failures() {
                    println!("     {tag} failed: {} | predicted {:.8e} measured {:.8e} error {:.3e} tol {:.1e} {}", c.name, c.predicted, c.measured, c.error, c.tolerance, c.note);
                }
                let timing = format!("{n_pass}/{} checks, {secs:.1} s of {:.0} s", rep.checks.len(), budget(suite));
                match (pass, known(suite)) {
                    (true, _) => format!("PASS {tag} {timing}"),
                    (false, Some((why, still_same))) if in_time => {
                        if still_same(&rep) {
                            format!("FAIL {tag} {timing} (known discrepancy: {why})")
                        } else {
                            unexpected += 1;
                            format!("FAIL {tag} {timing} (differs from the known discrepancy: {why})")
                        }
                    }
                    (false, _) => {
                        unexpected += 1;
                        if in_time {
                            format!("FAIL {tag} {timing}")
                        } else {
                            format!("FAIL {tag} {timing} (over the runtime budget)")
                        }
                    }
                }
            }
        };
        println!("{line}");
        lines.push(line);
    }
    println!("\nacceptance summary");
    for l in &lines {
        println!("  {l}");
    }
    if unexpected > 0 {
        println!("{unexpected} unexpected failure(s)");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
