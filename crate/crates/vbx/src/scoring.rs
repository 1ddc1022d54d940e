//! Diarization metrics: optimal speaker mapping, DER under the
//! forgiving/fair/full setups, Jaccard error rate, and reference
//! construction from word-level transcripts.

use std::collections::HashMap;

use crate::timeline::{intersection_duration, merge_intervals, Segment, Ticks, Timeline};
use crate::{Error, Result};

/// Collar and overlap handling for DER.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreSetup {
    pub collar: Ticks,
    pub score_overlap: bool,
}

impl ScoreSetup {
    /// 0.25 s collar, overlap regions excluded.
    pub fn forgiving() -> Self {
        ScoreSetup {
            collar: Ticks::from_seconds(0.25),
            score_overlap: false,
        }
    }

    /// 0.25 s collar, overlap scored.
    pub fn fair() -> Self {
        ScoreSetup {
            collar: Ticks::from_seconds(0.25),
            score_overlap: true,
        }
    }

    /// No collar, overlap scored.
    pub fn full() -> Self {
        ScoreSetup {
            collar: Ticks(0),
            score_overlap: true,
        }
    }

    pub fn named(name: &str) -> Option<Self> {
        match name {
            "forgiving" => Some(Self::forgiving()),
            "fair" => Some(Self::fair()),
            "full" => Some(Self::full()),
            _ => None,
        }
    }
}

/// Annotation kind in a word-level transcript.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordKind {
    Word,
    VocalSound,
}

/// One transcript token; `times` is `None` for annotations that carry no
/// time marks.
#[derive(Debug, Clone)]
pub struct WordRecord {
    pub speaker: String,
    pub kind: WordKind,
    pub times: Option<(Ticks, Ticks)>,
}

impl WordRecord {
    pub fn timed(speaker: &str, kind: WordKind, start: Ticks, end: Ticks) -> Result<Self> {
        if start >= end {
            return Err(Error::invalid(format!(
                "word for {speaker} has start {start} not before end {end}"
            )));
        }
        Ok(WordRecord {
            speaker: speaker.to_string(),
            kind,
            times: Some((start, end)),
        })
    }

    pub fn untimed(speaker: &str, kind: WordKind) -> Self {
        WordRecord {
            speaker: speaker.to_string(),
            kind,
            times: None,
        }
    }
}

type IntervalMap = Vec<(String, Vec<(Ticks, Ticks)>)>;

fn speaker_interval_map(timeline: &Timeline) -> IntervalMap {
    timeline
        .speakers()
        .into_iter()
        .map(|speaker| {
            let mut iv = timeline.speaker_intervals(&speaker);
            iv.sort();
            let merged = merge_intervals(&iv);
            (speaker, merged)
        })
        .collect()
}

fn active_at(intervals: &[(Ticks, Ticks)], instant: Ticks) -> bool {
    let idx = intervals.partition_point(|&(on, _)| on <= instant);
    idx > 0 && instant < intervals[idx - 1].1
}

/// One-to-one speaker pairing maximizing total overlapped time. Speakers
/// with no overlap stay unmatched; an empty side yields an empty mapping.
pub fn optimal_mapping(reference: &Timeline, hypothesis: &Timeline) -> Vec<(String, String)> {
    let ref_map = speaker_interval_map(reference);
    let hyp_map = speaker_interval_map(hypothesis);
    if ref_map.is_empty() || hyp_map.is_empty() {
        return Vec::new();
    }

    let nr = ref_map.len();
    let nh = hyp_map.len();
    let mut weight = vec![vec![0i64; nh]; nr];
    for (i, (_, ri)) in ref_map.iter().enumerate() {
        for (j, (_, hj)) in hyp_map.iter().enumerate() {
            weight[i][j] = intersection_duration(ri, hj).0;
        }
    }

    // Square max-weight assignment: pad with zero-weight columns/rows and
    // minimize (max - w).
    let n = nr.max(nh);
    let max_w = weight
        .iter()
        .flat_map(|row| row.iter().copied())
        .max()
        .unwrap_or(0);
    let mut cost = vec![vec![max_w; n]; n];
    for (i, row) in weight.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            cost[i][j] = max_w - w;
        }
    }
    let assignment = hungarian_min_cost(&cost);

    let mut pairs = Vec::new();
    for (i, &j) in assignment.iter().enumerate().take(nr) {
        if j < nh && weight[i][j] > 0 {
            pairs.push((ref_map[i].0.clone(), hyp_map[j].0.clone()));
        }
    }
    pairs
}

/// Minimum-cost perfect assignment on a square matrix (Kuhn-Munkres with
/// potentials). Returns the column chosen for each row.
fn hungarian_min_cost(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut min_slack = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < min_slack[j] {
                    min_slack[j] = cur;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![usize::MAX; n];
    for j in 1..=n {
        if matched_row[j] != 0 {
            assignment[matched_row[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Time components of the diarization error rate, in exact ticks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DerResult {
    pub miss: Ticks,
    pub fa: Ticks,
    pub ser: Ticks,
    pub total_speech: Ticks,
}

impl DerResult {
    fn ratio(&self, part: Ticks) -> f64 {
        if self.total_speech.0 == 0 {
            0.0
        } else {
            part.0 as f64 / self.total_speech.0 as f64
        }
    }

    pub fn der(&self) -> f64 {
        self.ratio(self.miss + self.fa + self.ser)
    }

    pub fn miss_rate(&self) -> f64 {
        self.ratio(self.miss)
    }

    pub fn fa_rate(&self) -> f64 {
        self.ratio(self.fa)
    }

    pub fn ser_rate(&self) -> f64 {
        self.ratio(self.ser)
    }

    /// Componentwise sum, for pooling recordings.
    pub fn accumulate(&mut self, other: &DerResult) {
        self.miss = self.miss + other.miss;
        self.fa = self.fa + other.fa;
        self.ser = self.ser + other.ser;
        self.total_speech = self.total_speech + other.total_speech;
    }
}

/// Measures miss, false alarm and speaker error over the scored region.
///
/// The scored region drops `collar` on both sides of every reference
/// segment boundary, and, when overlap is not scored, every instant where
/// two or more reference speakers are active. The denominator counts
/// reference speaker-seconds inside the scored region (overlap counted per
/// speaker). The speaker mapping is computed once on the unfiltered
/// timelines.
pub fn der(reference: &Timeline, hypothesis: &Timeline, setup: &ScoreSetup) -> Result<DerResult> {
    if reference.recording_id != hypothesis.recording_id {
        return Err(Error::invalid(format!(
            "recording {:?} scored against {:?}",
            reference.recording_id, hypothesis.recording_id
        )));
    }
    let mapping: HashMap<String, String> =
        optimal_mapping(reference, hypothesis).into_iter().collect();
    let ref_map = speaker_interval_map(reference);
    let hyp_map = speaker_interval_map(hypothesis);

    // No-score zones around every stored reference boundary.
    let collar_zones = if setup.collar.0 > 0 {
        let mut zones: Vec<(Ticks, Ticks)> = Vec::new();
        for seg in reference.segments() {
            zones.push((seg.onset - setup.collar, seg.onset + setup.collar));
            zones.push((seg.offset() - setup.collar, seg.offset() + setup.collar));
        }
        zones.sort();
        merge_intervals(&zones)
    } else {
        Vec::new()
    };

    let mut cuts: Vec<Ticks> = Vec::new();
    for (_, iv) in ref_map.iter().chain(hyp_map.iter()) {
        for &(on, off) in iv {
            cuts.push(on);
            cuts.push(off);
        }
    }
    for &(on, off) in &collar_zones {
        cuts.push(on);
        cuts.push(off);
    }
    cuts.sort();
    cuts.dedup();

    let mut result = DerResult::default();
    for pair in cuts.windows(2) {
        let (start, end) = (pair[0], pair[1]);
        let dur = (end - start).0;
        if dur <= 0 || active_at(&collar_zones, start) {
            continue;
        }
        let ref_active: Vec<&str> = ref_map
            .iter()
            .filter(|(_, iv)| active_at(iv, start))
            .map(|(s, _)| s.as_str())
            .collect();
        if !setup.score_overlap && ref_active.len() >= 2 {
            continue;
        }
        let hyp_active: Vec<&str> = hyp_map
            .iter()
            .filter(|(_, iv)| active_at(iv, start))
            .map(|(s, _)| s.as_str())
            .collect();

        let n_ref = ref_active.len() as i64;
        let n_hyp = hyp_active.len() as i64;
        let n_correct = ref_active
            .iter()
            .filter(|r| {
                mapping
                    .get(**r)
                    .is_some_and(|h| hyp_active.iter().any(|a| a == h))
            })
            .count() as i64;

        result.total_speech = result.total_speech + Ticks(n_ref * dur);
        result.miss = result.miss + Ticks((n_ref - n_hyp).max(0) * dur);
        result.fa = result.fa + Ticks((n_hyp - n_ref).max(0) * dur);
        result.ser = result.ser + Ticks((n_ref.min(n_hyp) - n_correct) * dur);
    }
    Ok(result)
}

/// Per-reference-speaker Jaccard distances under the global optimal mapping
/// (no collar, overlap scored by definition). Unpaired speakers score 1.
pub fn jer_per_speaker(reference: &Timeline, hypothesis: &Timeline) -> Result<Vec<f64>> {
    if reference.recording_id != hypothesis.recording_id {
        return Err(Error::invalid(format!(
            "recording {:?} scored against {:?}",
            reference.recording_id, hypothesis.recording_id
        )));
    }
    if reference.is_empty() {
        return Err(Error::UndefinedMetric(
            "JER needs a non-empty reference".into(),
        ));
    }
    let mapping: HashMap<String, String> =
        optimal_mapping(reference, hypothesis).into_iter().collect();
    let hyp_map: HashMap<String, Vec<(Ticks, Ticks)>> =
        speaker_interval_map(hypothesis).into_iter().collect();

    let mut scores = Vec::new();
    for (speaker, intervals) in speaker_interval_map(reference) {
        let score = match mapping.get(&speaker).and_then(|h| hyp_map.get(h)) {
            Some(hyp_iv) => {
                let inter = intersection_duration(&intervals, hyp_iv).0 as f64;
                let ref_total: i64 = intervals.iter().map(|(a, b)| (*b - *a).0).sum();
                let hyp_total: i64 = hyp_iv.iter().map(|(a, b)| (*b - *a).0).sum();
                let union = (ref_total + hyp_total) as f64 - inter;
                1.0 - inter / union
            }
            None => 1.0,
        };
        scores.push(score);
    }
    Ok(scores)
}

/// Mean Jaccard distance over reference speakers.
pub fn jer(reference: &Timeline, hypothesis: &Timeline) -> Result<f64> {
    let scores = jer_per_speaker(reference, hypothesis)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Builds a diarization reference from a word-level transcript: keeps words
/// (vocal sounds only when asked), merges same-speaker tokens that touch or
/// overlap, and preserves every positive pause. Returns the timeline and
/// the number of untimed records skipped.
pub fn build_reference(
    recording_id: &str,
    words: &[WordRecord],
    include_vocal_sounds: bool,
) -> Result<(Timeline, usize)> {
    let mut per_speaker: Vec<(String, Vec<(Ticks, Ticks)>)> = Vec::new();
    let mut skipped = 0usize;
    for word in words {
        if word.kind == WordKind::VocalSound && !include_vocal_sounds {
            continue;
        }
        let Some((start, end)) = word.times else {
            skipped += 1;
            continue;
        };
        if start >= end {
            return Err(Error::invalid(format!(
                "word for {} has start {} not before end {}",
                word.speaker, start, end
            )));
        }
        match per_speaker.iter_mut().find(|(s, _)| *s == word.speaker) {
            Some((_, iv)) => iv.push((start, end)),
            None => per_speaker.push((word.speaker.clone(), vec![(start, end)])),
        }
    }

    let mut segments = Vec::new();
    for (speaker, mut intervals) in per_speaker {
        intervals.sort();
        for (on, off) in merge_intervals(&intervals) {
            segments.push(Segment::new(recording_id, on, off - on, &speaker));
        }
    }
    Ok((Timeline::from_segments(recording_id, segments)?, skipped))
}

/// Scores of one recording, for report assembly.
#[derive(Debug, Clone)]
pub struct RecordingScore {
    pub recording_id: String,
    pub der: DerResult,
    pub jer_speakers: Vec<f64>,
}

/// Per-recording lines plus an overall row: MISS, FA, SER, DER, JER as
/// 2-decimal percentages. Overall DER pools times; overall JER averages over
/// all reference speakers.
pub fn format_report(scores: &[RecordingScore], setup_name: &str) -> String {
    use std::fmt::Write as _;

    let mut out = String::new();
    writeln!(out, "setup: {setup_name}").unwrap();
    writeln!(
        out,
        "{:<24} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "RECORDING", "MISS", "FA", "SER", "DER", "JER"
    )
    .unwrap();
    let mut pooled = DerResult::default();
    let mut all_jer: Vec<f64> = Vec::new();
    for score in scores {
        let jer_mean = if score.jer_speakers.is_empty() {
            f64::NAN
        } else {
            score.jer_speakers.iter().sum::<f64>() / score.jer_speakers.len() as f64
        };
        writeln!(
            out,
            "{:<24} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
            score.recording_id,
            100.0 * score.der.miss_rate(),
            100.0 * score.der.fa_rate(),
            100.0 * score.der.ser_rate(),
            100.0 * score.der.der(),
            100.0 * jer_mean,
        )
        .unwrap();
        pooled.accumulate(&score.der);
        all_jer.extend_from_slice(&score.jer_speakers);
    }
    let overall_jer = if all_jer.is_empty() {
        f64::NAN
    } else {
        all_jer.iter().sum::<f64>() / all_jer.len() as f64
    };
    writeln!(
        out,
        "{:<24} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
        "OVERALL",
        100.0 * pooled.miss_rate(),
        100.0 * pooled.fa_rate(),
        100.0 * pooled.ser_rate(),
        100.0 * pooled.der(),
        100.0 * overall_jer,
    )
    .unwrap();
    out
}
