//! DER anatomy under the forgiving, fair and full setups: how the collar
//! and overlap handling change the scored region, plus the per-speaker
//! Jaccard error rate.
//!
//! ```sh
//! cargo run --example score_setups
//! ```

use vbx::scoring::{der, jer_per_speaker, optimal_mapping, ScoreSetup};
use vbx::timeline::{Segment, Timeline};

fn main() -> vbx::Result<()> {
    // Reference: A talks twice, B once, with a stretch of overlap.
    let reference = Timeline::from_segments(
        "meeting",
        vec![
            Segment::from_seconds("meeting", 0.0, 6.0, "A"),
            Segment::from_seconds("meeting", 5.0, 5.0, "B"),
            Segment::from_seconds("meeting", 11.0, 4.0, "A"),
        ],
    )?;
    // Hypothesis: boundary placed late, overlap missed, B's tail cut.
    let hypothesis = Timeline::from_segments(
        "meeting",
        vec![
            Segment::from_seconds("meeting", 0.0, 6.5, "x"),
            Segment::from_seconds("meeting", 6.5, 3.0, "y"),
            Segment::from_seconds("meeting", 11.0, 4.0, "x"),
        ],
    )?;

    println!("optimal speaker mapping:");
    for (r, h) in optimal_mapping(&reference, &hypothesis) {
        println!("  {r} -> {h}");
    }

    println!();
    println!(
        "{:<10} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "setup", "scored s", "miss s", "fa s", "ser s", "DER %"
    );
    for name in ["forgiving", "fair", "full"] {
        let setup = ScoreSetup::named(name).unwrap();
        let result = der(&reference, &hypothesis, &setup)?;
        println!(
            "{:<10} {:>9.2} {:>9.2} {:>9.2} {:>9.2} {:>9.2}",
            name,
            result.total_speech.as_seconds(),
            result.miss.as_seconds(),
            result.fa.as_seconds(),
            result.ser.as_seconds(),
            100.0 * result.der()
        );
    }

    println!();
    println!("per-speaker Jaccard error rates:");
    let speakers = reference.speakers();
    for (speaker, score) in speakers
        .iter()
        .zip(jer_per_speaker(&reference, &hypothesis)?)
    {
        println!("  {speaker}: {:.4}", score);
    }
    Ok(())
}
