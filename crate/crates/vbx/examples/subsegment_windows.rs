//! Sliding-window sub-segmentation of VAD speech: 1.5 s windows every
//! 0.25 s, short segments dropped, the last window truncated at the
//! segment end.
//!
//! ```sh
//! cargo run --example subsegment_windows
//! ```

use vbx::io::VadTimeline;
use vbx::pipeline::{subsegment, SubsegmentConfig};
use vbx::timeline::Ticks;

fn main() {
    let t = Ticks::from_seconds;
    let vad = VadTimeline {
        recording_id: "demo".into(),
        intervals: vec![
            (t(0.0), t(2.0)),  // long enough for three windows
            (t(3.0), t(3.8)),  // shorter than one window: kept whole
            (t(5.0), t(5.05)), // below the minimum length: dropped
            (t(6.0), t(7.6)),  // final window truncated at 7.6
        ],
    };
    let cfg = SubsegmentConfig::default();
    println!(
        "window {} s, shift {} s, min length {} s",
        cfg.window, cfg.shift, cfg.min_len
    );
    for (onset, offset) in subsegment(&vad, &cfg) {
        println!("  [{onset} .. {offset}] ({} s)", offset - onset);
    }
}
