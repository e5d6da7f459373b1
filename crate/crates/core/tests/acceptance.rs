//! Acceptance criteria A1..A11. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails. Set `STIRSIM_ACCEPTANCE=quick`
//! to run only the oracle, kernel and theory criteria, or to a comma list
//! such as `A3,A8` to pick criteria.

use std::process::ExitCode;

use stirsim::acceptance::{self, AcceptanceConfig};

fn main() -> ExitCode {
    // Skip when the harness only lists tests.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let selection = std::env::var("STIRSIM_ACCEPTANCE").unwrap_or_default();
    let ids: Vec<&str> = match selection.as_str() {
        "" | "all" => acceptance::ALL.to_vec(),
        "quick" => acceptance::QUICK.to_vec(),
        list => list.split(',').map(str::trim).collect(),
    };
    let cfg = AcceptanceConfig::default();
    let mut failed = 0;
    for id in &ids {
        match acceptance::run(id, &cfg) {
            Ok(report) => {
                println!("{}", report.line());
                failed += usize::from(!report.pass);
            }
            Err(e) => {
                println!("FAIL {id}: error: {e}");
                failed += 1;
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", ids.len() - failed, ids.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
