//! Reference construction from a word-level transcript: words merge when
//! they touch, every real pause survives, vocal sounds are dropped unless
//! explicitly kept.
//!
//! ```sh
//! cargo run --example build_reference
//! ```

use vbx::scoring::{build_reference, WordKind, WordRecord};
use vbx::timeline::Ticks;

fn main() -> vbx::Result<()> {
    let t = Ticks::from_seconds;
    let words = vec![
        WordRecord::timed("A", WordKind::Word, t(0.86), t(0.98))?,
        WordRecord::timed("A", WordKind::Word, t(0.98), t(1.1))?,
        WordRecord::timed("A", WordKind::Word, t(1.1), t(1.40))?,
        WordRecord::timed("A", WordKind::Word, t(1.45), t(1.55))?,
        WordRecord::timed("A", WordKind::Word, t(1.55), t(1.62))?,
        WordRecord::timed("A", WordKind::Word, t(1.62), t(2.0))?,
        WordRecord::timed("A", WordKind::VocalSound, t(2.1), t(2.4))?,
        WordRecord::untimed("A", WordKind::VocalSound),
        WordRecord::timed("B", WordKind::Word, t(2.0), t(2.6))?,
    ];

    for include_sounds in [false, true] {
        let (timeline, skipped) = build_reference("demo", &words, include_sounds)?;
        println!(
            "vocal sounds {}: {} segments, {skipped} untimed records skipped",
            if include_sounds { "kept" } else { "dropped" },
            timeline.len()
        );
        for seg in timeline.segments() {
            println!("  {} [{} .. {}]", seg.speaker, seg.onset, seg.offset());
        }
    }
    Ok(())
}
