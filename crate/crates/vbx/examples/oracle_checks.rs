//! Engine versus exact references: forward-backward against path
//! enumeration, the converged ELBO against the closed-form single-speaker
//! marginal, and the stationarity of the speaker posterior update.
//!
//! ```sh
//! cargo run --example oracle_checks
//! ```

fn main() -> vbx::Result<()> {
    let report = vbx::oracle::engine_delta_report(2026, 25)?;
    print!("{report}");
    Ok(())
}
