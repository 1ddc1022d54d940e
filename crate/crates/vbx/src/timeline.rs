//! Labeled time intervals for hypotheses and references.
//!
//! All arithmetic runs on integer ticks of 1e-7 s so that boundary
//! comparisons are exact; conversion to and from decimal seconds happens
//! only at the I/O edges.

use std::fmt;

/// Ticks per second (one tick = 0.1 microsecond).
pub const TICKS_PER_SECOND: i64 = 10_000_000;

/// A point or duration on the recording clock, in exact 1e-7 s ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Ticks(pub i64);

impl Ticks {
    pub fn from_seconds(seconds: f64) -> Self {
        Ticks((seconds * TICKS_PER_SECOND as f64).round() as i64)
    }

    pub fn as_seconds(self) -> f64 {
        self.0 as f64 / TICKS_PER_SECOND as f64
    }

    pub fn max(self, other: Ticks) -> Ticks {
        Ticks(self.0.max(other.0))
    }

    pub fn min(self, other: Ticks) -> Ticks {
        Ticks(self.0.min(other.0))
    }
}

impl std::ops::Add for Ticks {
    type Output = Ticks;
    fn add(self, rhs: Ticks) -> Ticks {
        Ticks(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Ticks {
    type Output = Ticks;
    fn sub(self, rhs: Ticks) -> Ticks {
        Ticks(self.0 - rhs.0)
    }
}

impl std::ops::Mul<i64> for Ticks {
    type Output = Ticks;
    fn mul(self, rhs: i64) -> Ticks {
        Ticks(self.0 * rhs)
    }
}

impl fmt::Display for Ticks {
    /// Decimal seconds with trailing zeros trimmed, e.g. `1.25`, `0.1`, `3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let whole = abs / TICKS_PER_SECOND as u64;
        let frac = abs % TICKS_PER_SECOND as u64;
        if frac == 0 {
            write!(f, "{sign}{whole}")
        } else {
            let digits = format!("{frac:07}");
            write!(f, "{sign}{whole}.{}", digits.trim_end_matches('0'))
        }
    }
}

/// One labeled speech interval of a recording.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub recording_id: String,
    pub onset: Ticks,
    pub duration: Ticks,
    pub speaker: String,
}

impl Segment {
    pub fn new(recording_id: &str, onset: Ticks, duration: Ticks, speaker: &str) -> Self {
        Segment {
            recording_id: recording_id.to_string(),
            onset,
            duration,
            speaker: speaker.to_string(),
        }
    }

    pub fn from_seconds(recording_id: &str, onset: f64, duration: f64, speaker: &str) -> Self {
        Segment::new(
            recording_id,
            Ticks::from_seconds(onset),
            Ticks::from_seconds(duration),
            speaker,
        )
    }

    pub fn offset(&self) -> Ticks {
        self.onset + self.duration
    }
}

/// Ordered list of segments for one recording. Overlaps between different
/// speakers are permitted; same-speaker overlaps are removed by
/// [`Timeline::normalize`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timeline {
    pub recording_id: String,
    segments: Vec<Segment>,
}

impl Timeline {
    pub fn new(recording_id: &str) -> Self {
        Timeline {
            recording_id: recording_id.to_string(),
            segments: Vec::new(),
        }
    }

    /// Builds a timeline from segments, sorting by onset. Rejects segments
    /// with non-positive duration or a mismatched recording id.
    pub fn from_segments(
        recording_id: &str,
        mut segments: Vec<Segment>,
    ) -> crate::Result<Timeline> {
        for seg in &segments {
            if seg.duration.0 <= 0 {
                return Err(crate::Error::invalid(format!(
                    "segment at {} has non-positive duration",
                    seg.onset
                )));
            }
            if seg.recording_id != recording_id {
                return Err(crate::Error::invalid(format!(
                    "segment recording id {:?} does not match timeline {:?}",
                    seg.recording_id, recording_id
                )));
            }
        }
        segments.sort_by_key(|s| s.onset);
        Ok(Timeline {
            recording_id: recording_id.to_string(),
            segments,
        })
    }

    pub fn push(&mut self, seg: Segment) -> crate::Result<()> {
        if seg.duration.0 <= 0 {
            return Err(crate::Error::invalid(format!(
                "segment at {} has non-positive duration",
                seg.onset
            )));
        }
        if seg.recording_id != self.recording_id {
            return Err(crate::Error::invalid(format!(
                "segment recording id {:?} does not match timeline {:?}",
                seg.recording_id, self.recording_id
            )));
        }
        match self.segments.last() {
            Some(last) if last.onset > seg.onset => {
                self.segments.push(seg);
                self.segments.sort_by_key(|s| s.onset);
            }
            _ => self.segments.push(seg),
        }
        Ok(())
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    /// Speaker names in order of first appearance.
    pub fn speakers(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for seg in &self.segments {
            if !out.iter().any(|s| s == &seg.speaker) {
                out.push(seg.speaker.clone());
            }
        }
        out
    }

    /// Merges overlapping or touching same-speaker segments, keeping the
    /// cross-speaker structure intact.
    pub fn normalize(&self) -> Timeline {
        let mut merged: Vec<Segment> = Vec::new();
        for speaker in self.speakers() {
            let mut intervals = self.speaker_intervals(&speaker);
            intervals.sort();
            for (on, off) in merge_intervals(&intervals) {
                merged.push(Segment::new(&self.recording_id, on, off - on, &speaker));
            }
        }
        merged.sort_by_key(|s| s.onset);
        Timeline {
            recording_id: self.recording_id.clone(),
            segments: merged,
        }
    }

    /// Raw (onset, offset) intervals of one speaker, in stored order.
    pub fn speaker_intervals(&self, speaker: &str) -> Vec<(Ticks, Ticks)> {
        self.segments
            .iter()
            .filter(|s| s.speaker == speaker)
            .map(|s| (s.onset, s.offset()))
            .collect()
    }

    /// Total duration covered by one speaker after merging overlaps.
    pub fn speaker_duration(&self, speaker: &str) -> Ticks {
        let mut intervals = self.speaker_intervals(speaker);
        intervals.sort();
        merge_intervals(&intervals)
            .iter()
            .fold(Ticks(0), |acc, (on, off)| acc + (*off - *on))
    }
}

/// Merges a sorted list of (onset, offset) intervals, fusing overlaps and
/// exact adjacency.
pub fn merge_intervals(sorted: &[(Ticks, Ticks)]) -> Vec<(Ticks, Ticks)> {
    let mut out: Vec<(Ticks, Ticks)> = Vec::new();
    for &(on, off) in sorted {
        match out.last_mut() {
            Some((_, last_off)) if on <= *last_off => {
                *last_off = (*last_off).max(off);
            }
            _ => out.push((on, off)),
        }
    }
    out
}

/// Duration of the intersection of two sorted, disjoint interval lists.
pub fn intersection_duration(a: &[(Ticks, Ticks)], b: &[(Ticks, Ticks)]) -> Ticks {
    let mut total = Ticks(0);
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let on = a[i].0.max(b[j].0);
        let off = a[i].1.min(b[j].1);
        if on < off {
            total = total + (off - on);
        }
        if a[i].1 <= b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}
