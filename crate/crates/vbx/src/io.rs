//! Text and binary file formats: embedding sequences, VAD labels, RTTM
//! timelines, PLDA model and space files, labeled training embeddings and
//! word-level transcripts. Writers are byte-deterministic; readers reject
//! malformed lines with their line number.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::plda::{DiarSpace, LabeledEmbeddings, PldaModel};
use crate::scoring::{WordKind, WordRecord};
use crate::timeline::{Segment, Ticks, Timeline};
use crate::{Error, Result};

pub const EMB_TEXT_MAGIC: &str = "VBXEMB";
pub const EMB_BINARY_MAGIC: &str = "VBXEMBB";
pub const PLDA_MAGIC: &str = "VBXPLDA";
pub const SPACE_MAGIC: &str = "VBXSPACE";
pub const LABELED_MAGIC: &str = "VBXLBL";

/// Timestamped embedding rows for one recording.
#[derive(Debug, Clone)]
pub struct EmbeddingSequence {
    pub recording_id: String,
    pub dim: usize,
    pub onsets: Vec<Ticks>,
    pub offsets: Vec<Ticks>,
    pub vectors: Array2<f64>,
}

impl EmbeddingSequence {
    pub fn new(
        recording_id: &str,
        onsets: Vec<Ticks>,
        offsets: Vec<Ticks>,
        vectors: Array2<f64>,
    ) -> Result<Self> {
        let t = vectors.nrows();
        if onsets.len() != t || offsets.len() != t {
            return Err(Error::invalid(format!(
                "{} onsets / {} offsets for {t} vectors",
                onsets.len(),
                offsets.len()
            )));
        }
        for i in 0..t {
            if offsets[i] <= onsets[i] {
                return Err(Error::invalid(format!(
                    "row {i}: offset {} not after onset {}",
                    offsets[i], onsets[i]
                )));
            }
            if i > 0 && onsets[i] <= onsets[i - 1] {
                return Err(Error::invalid(format!(
                    "row {i}: onset {} not after previous onset {}",
                    onsets[i],
                    onsets[i - 1]
                )));
            }
        }
        Ok(EmbeddingSequence {
            recording_id: recording_id.to_string(),
            dim: vectors.ncols(),
            onsets,
            offsets,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Oracle speech intervals for one recording.
#[derive(Debug, Clone)]
pub struct VadTimeline {
    pub recording_id: String,
    pub intervals: Vec<(Ticks, Ticks)>,
}

/// Floats serialize with 17 significant digits so they round-trip exactly.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(token: &str, line: usize, what: &str) -> Result<f64> {
    let value: f64 = token
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid {what}: {token:?}")))?;
    if !value.is_finite() {
        return Err(Error::parse(line, format!("non-finite {what}: {token:?}")));
    }
    Ok(value)
}

fn parse_usize(token: &str, line: usize, what: &str) -> Result<usize> {
    token
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid {what}: {token:?}")))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "recording".to_string())
}

fn check_header<'a>(tokens: &'a [&'a str], magic: &str, fields: usize) -> Result<&'a [&'a str]> {
    if tokens.len() != fields || tokens[0] != magic {
        return Err(Error::parse(
            1,
            format!(
                "expected header `{magic} 1 ...`, got {:?}",
                tokens.join(" ")
            ),
        ));
    }
    if tokens[1] != "1" {
        return Err(Error::parse(
            1,
            format!("unsupported {magic} version {:?}", tokens[1]),
        ));
    }
    Ok(&tokens[2..])
}

// ---------------------------------------------------------------------------
// Embedding files

pub fn write_embeddings_text(path: &Path, seq: &EmbeddingSequence) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("{EMB_TEXT_MAGIC} 1 {}\n", seq.dim));
    for i in 0..seq.len() {
        out.push_str(&format!("{} {}", seq.onsets[i], seq.offsets[i]));
        for v in seq.vectors.row(i) {
            out.push(' ');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_embeddings_binary(path: &Path, seq: &EmbeddingSequence) -> Result<()> {
    let mut out: Vec<u8> = Vec::with_capacity(seq.len() * (seq.dim + 2) * 8 + 32);
    out.extend_from_slice(format!("{EMB_BINARY_MAGIC} 1 {}\n", seq.dim).as_bytes());
    for i in 0..seq.len() {
        out.extend_from_slice(&seq.onsets[i].as_seconds().to_le_bytes());
        out.extend_from_slice(&seq.offsets[i].as_seconds().to_le_bytes());
        for v in seq.vectors.row(i) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

/// Reads either the text or the binary embedding format, sniffing the magic.
/// The recording id is the file stem.
pub fn read_embeddings(path: &Path) -> Result<EmbeddingSequence> {
    let bytes = fs::read(path)?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::parse(1, "missing header line".to_string()))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| Error::parse(1, "header is not UTF-8".to_string()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let recording_id = file_stem(path);

    if tokens.first() == Some(&EMB_BINARY_MAGIC) {
        let rest = check_header(&tokens, EMB_BINARY_MAGIC, 3)?;
        let dim = parse_usize(rest[0], 1, "dimension")?;
        let body = &bytes[newline + 1..];
        let stride = (dim + 2) * 8;
        if stride == 0 || body.len() % stride != 0 {
            return Err(Error::parse(
                1,
                format!(
                    "binary body of {} bytes is not a multiple of row size {stride}",
                    body.len()
                ),
            ));
        }
        let t = body.len() / stride;
        let mut onsets = Vec::with_capacity(t);
        let mut offsets = Vec::with_capacity(t);
        let mut vectors = Array2::<f64>::zeros((t, dim));
        for i in 0..t {
            let row = &body[i * stride..(i + 1) * stride];
            let read = |k: usize| f64::from_le_bytes(row[k * 8..(k + 1) * 8].try_into().unwrap());
            let (onset, offset) = (read(0), read(1));
            if !onset.is_finite() || !offset.is_finite() {
                return Err(Error::parse(
                    i + 2,
                    format!("non-finite timestamp in row {i}"),
                ));
            }
            onsets.push(Ticks::from_seconds(onset));
            offsets.push(Ticks::from_seconds(offset));
            for j in 0..dim {
                let v = read(2 + j);
                if !v.is_finite() {
                    return Err(Error::parse(i + 2, format!("non-finite value in row {i}")));
                }
                vectors[(i, j)] = v;
            }
        }
        return EmbeddingSequence::new(&recording_id, onsets, offsets, vectors);
    }

    let text = std::str::from_utf8(&bytes)
        .map_err(|_| Error::parse(1, "file is not UTF-8".to_string()))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty file".to_string()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let rest = check_header(&tokens, EMB_TEXT_MAGIC, 3)?;
    let dim = parse_usize(rest[0], 1, "dimension")?;

    let mut onsets = Vec::new();
    let mut offsets = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != dim + 2 {
            return Err(Error::parse(
                line_no,
                format!("expected {} fields, got {}", dim + 2, tokens.len()),
            ));
        }
        onsets.push(Ticks::from_seconds(parse_f64(tokens[0], line_no, "onset")?));
        offsets.push(Ticks::from_seconds(parse_f64(
            tokens[1], line_no, "offset",
        )?));
        for tok in &tokens[2..] {
            values.push(parse_f64(tok, line_no, "embedding value")?);
        }
    }
    let t = onsets.len();
    let vectors = Array2::from_shape_vec((t, dim), values).expect("shape checked per line");
    EmbeddingSequence::new(&recording_id, onsets, offsets, vectors)
}

// ---------------------------------------------------------------------------
// VAD files

/// One `onset offset speech` interval per line.
pub fn read_vad(path: &Path) -> Result<VadTimeline> {
    let text = fs::read_to_string(path)?;
    let mut intervals = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 3 {
            return Err(Error::parse(
                line_no,
                format!(
                    "expected `onset offset speech`, got {} fields",
                    tokens.len()
                ),
            ));
        }
        if tokens[2] != "speech" {
            return Err(Error::parse(
                line_no,
                format!("unknown VAD label {:?}", tokens[2]),
            ));
        }
        let onset = Ticks::from_seconds(parse_f64(tokens[0], line_no, "onset")?);
        let offset = Ticks::from_seconds(parse_f64(tokens[1], line_no, "offset")?);
        if offset <= onset {
            return Err(Error::parse(
                line_no,
                format!("interval ({onset}, {offset}) has no positive length"),
            ));
        }
        if let Some(&(_, prev_off)) = intervals.last() {
            if onset < prev_off {
                return Err(Error::parse(
                    line_no,
                    format!("interval starting at {onset} overlaps the previous one"),
                ));
            }
        }
        intervals.push((onset, offset));
    }
    Ok(VadTimeline {
        recording_id: file_stem(path),
        intervals,
    })
}

pub fn write_vad(path: &Path, vad: &VadTimeline) -> Result<()> {
    let mut out = String::new();
    for &(on, off) in &vad.intervals {
        out.push_str(&format!("{on} {off} speech\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// RTTM

fn rttm_line(seg: &Segment) -> String {
    format!(
        "SPEAKER {} 1 {:.3} {:.3} <NA> <NA> {} <NA> <NA>\n",
        seg.recording_id,
        seg.onset.as_seconds(),
        seg.duration.as_seconds(),
        seg.speaker
    )
}

pub fn write_rttm(path: &Path, timelines: &[Timeline]) -> Result<()> {
    let mut out = String::new();
    for timeline in timelines {
        for seg in timeline.segments() {
            out.push_str(&rttm_line(seg));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Parses RTTM `SPEAKER` records, grouping timelines by file id in order of
/// first appearance.
pub fn read_rttm(path: &Path) -> Result<Vec<Timeline>> {
    let text = fs::read_to_string(path)?;
    parse_rttm(&text)
}

pub fn parse_rttm(text: &str) -> Result<Vec<Timeline>> {
    let mut timelines: Vec<Timeline> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 9 {
            return Err(Error::parse(
                line_no,
                format!("expected 9 RTTM fields, got {}", tokens.len()),
            ));
        }
        if tokens[0] != "SPEAKER" {
            return Err(Error::parse(
                line_no,
                format!("unknown RTTM type {:?}", tokens[0]),
            ));
        }
        let recording = tokens[1];
        let onset = Ticks::from_seconds(parse_f64(tokens[3], line_no, "onset")?);
        let duration = Ticks::from_seconds(parse_f64(tokens[4], line_no, "duration")?);
        if duration.0 <= 0 {
            return Err(Error::parse(line_no, "non-positive duration".to_string()));
        }
        let speaker = tokens[7];
        let timeline = match timelines.iter_mut().find(|t| t.recording_id == recording) {
            Some(t) => t,
            None => {
                timelines.push(Timeline::new(recording));
                timelines.last_mut().unwrap()
            }
        };
        timeline
            .push(Segment::new(recording, onset, duration, speaker))
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
    }
    Ok(timelines)
}

// ---------------------------------------------------------------------------
// PLDA model and space files

pub fn write_plda(path: &Path, model: &PldaModel) -> Result<()> {
    let d = model.dim;
    let mut out = String::new();
    out.push_str(&format!("{PLDA_MAGIC} 1 {d}\n"));
    push_vector(&mut out, model.mean.view());
    for i in 0..d {
        push_vector(&mut out, model.within_cov.row(i));
    }
    for i in 0..d {
        push_vector(&mut out, model.between_cov.row(i));
    }
    fs::write(path, out)?;
    Ok(())
}

fn push_vector(out: &mut String, row: ndarray::ArrayView1<f64>) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&fmt_f64(*v));
    }
    out.push('\n');
}

fn parse_vector(line: &str, line_no: usize, expect: usize, what: &str) -> Result<Vec<f64>> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != expect {
        return Err(Error::parse(
            line_no,
            format!("expected {expect} {what} values, got {}", tokens.len()),
        ));
    }
    tokens.iter().map(|t| parse_f64(t, line_no, what)).collect()
}

pub fn read_plda(path: &Path) -> Result<PldaModel> {
    let text = fs::read_to_string(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty file".to_string()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let rest = check_header(&tokens, PLDA_MAGIC, 3)?;
    let d = parse_usize(rest[0], 1, "dimension")?;

    let mut take_row = |what: &str| -> Result<Vec<f64>> {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| Error::parse(0, format!("missing {what} line")))?;
        parse_vector(line, idx + 1, d, what)
    };
    let mean = Array1::from_vec(take_row("mean")?);
    let mut within = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        let row = take_row("within-covariance")?;
        for (j, v) in row.into_iter().enumerate() {
            within[(i, j)] = v;
        }
    }
    let mut between = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        let row = take_row("between-covariance")?;
        for (j, v) in row.into_iter().enumerate() {
            between[(i, j)] = v;
        }
    }
    Ok(PldaModel {
        dim: d,
        mean,
        within_cov: within,
        between_cov: between,
    })
}

pub fn write_space(path: &Path, space: &DiarSpace) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!(
        "{SPACE_MAGIC} 1 {} {}\n",
        space.source_dim, space.dim
    ));
    push_vector(&mut out, space.mean.view());
    for r in 0..space.dim {
        out.push_str(&fmt_f64(space.phi[r]));
        for i in 0..space.source_dim {
            out.push(' ');
            out.push_str(&fmt_f64(space.projection[(i, r)]));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_space(path: &Path) -> Result<DiarSpace> {
    let text = fs::read_to_string(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty file".to_string()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let rest = check_header(&tokens, SPACE_MAGIC, 4)?;
    let d = parse_usize(rest[0], 1, "source dimension")?;
    let r = parse_usize(rest[1], 1, "retained dimension")?;
    if r == 0 || r > d {
        return Err(Error::parse(1, format!("invalid dimensions D={d} R={r}")));
    }

    let (idx, line) = lines
        .next()
        .ok_or_else(|| Error::parse(0, "missing mean line".to_string()))?;
    let mean = Array1::from_vec(parse_vector(line, idx + 1, d, "mean")?);

    let mut phi = Array1::<f64>::zeros(r);
    let mut projection = Array2::<f64>::zeros((d, r));
    for k in 0..r {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| Error::parse(0, format!("missing eigenpair line {k}")))?;
        let row = parse_vector(line, idx + 1, d + 1, "eigenpair")?;
        if row[0] <= 0.0 {
            return Err(Error::parse(
                idx + 1,
                format!("phi must be positive, got {}", row[0]),
            ));
        }
        phi[k] = row[0];
        for i in 0..d {
            projection[(i, k)] = row[1 + i];
        }
    }
    Ok(DiarSpace {
        source_dim: d,
        dim: r,
        mean,
        projection,
        phi,
    })
}

// ---------------------------------------------------------------------------
// Labeled training embeddings

pub fn write_labeled(path: &Path, data: &LabeledEmbeddings) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("{LABELED_MAGIC} 1 {}\n", data.vectors.ncols()));
    for (i, id) in data.speaker_ids.iter().enumerate() {
        out.push_str(id);
        for v in data.vectors.row(i) {
            out.push(' ');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_labeled(path: &Path) -> Result<LabeledEmbeddings> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty file".to_string()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let rest = check_header(&tokens, LABELED_MAGIC, 3)?;
    let d = parse_usize(rest[0], 1, "dimension")?;

    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != d + 1 {
            return Err(Error::parse(
                line_no,
                format!("expected speaker + {d} values, got {} fields", tokens.len()),
            ));
        }
        ids.push(tokens[0].to_string());
        for tok in &tokens[1..] {
            values.push(parse_f64(tok, line_no, "embedding value")?);
        }
    }
    let n = ids.len();
    let vectors = Array2::from_shape_vec((n, d), values).expect("shape checked per line");
    LabeledEmbeddings::new(vectors, ids)
}

// ---------------------------------------------------------------------------
// Word-level transcripts

/// Lines of `recording speaker start end kind`, with `NA NA` marking missing
/// times and kind one of `word` or `vocal_sound`. Returns records grouped by
/// recording in order of first appearance.
pub fn read_words(path: &Path) -> Result<Vec<(String, Vec<WordRecord>)>> {
    let text = fs::read_to_string(path)?;
    let mut grouped: Vec<(String, Vec<WordRecord>)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 5 {
            return Err(Error::parse(
                line_no,
                format!(
                    "expected `recording speaker start end kind`, got {} fields",
                    tokens.len()
                ),
            ));
        }
        let kind = match tokens[4] {
            "word" => WordKind::Word,
            "vocal_sound" => WordKind::VocalSound,
            other => {
                return Err(Error::parse(line_no, format!("unknown kind {other:?}")));
            }
        };
        let record = if tokens[2] == "NA" || tokens[3] == "NA" {
            WordRecord::untimed(tokens[1], kind)
        } else {
            let start = Ticks::from_seconds(parse_f64(tokens[2], line_no, "start")?);
            let end = Ticks::from_seconds(parse_f64(tokens[3], line_no, "end")?);
            WordRecord::timed(tokens[1], kind, start, end)
                .map_err(|e| Error::parse(line_no, e.to_string()))?
        };
        match grouped.iter_mut().find(|(r, _)| r == tokens[0]) {
            Some((_, records)) => records.push(record),
            None => grouped.push((tokens[0].to_string(), vec![record])),
        }
    }
    Ok(grouped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use tempfile::tempdir;

    fn sample_sequence() -> EmbeddingSequence {
        EmbeddingSequence::new(
            "rec",
            vec![Ticks::from_seconds(0.0), Ticks::from_seconds(0.25)],
            vec![Ticks::from_seconds(1.5), Ticks::from_seconds(1.75)],
            array![[0.1, -2.5], [1.0 / 3.0, 4.4e-3]],
        )
        .unwrap()
    }

    #[test]
    fn embedding_text_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rec.emb");
        let seq = sample_sequence();
        write_embeddings_text(&path, &seq).unwrap();
        let back = read_embeddings(&path).unwrap();
        assert_eq!(back.recording_id, "rec");
        assert_eq!(back.onsets, seq.onsets);
        assert_eq!(back.offsets, seq.offsets);
        assert_eq!(back.vectors, seq.vectors);

        // Byte-deterministic writer.
        let again = dir.path().join("rec2.emb");
        write_embeddings_text(&again, &back).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
    }

    #[test]
    fn embedding_binary_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rec.embb");
        let seq = sample_sequence();
        write_embeddings_binary(&path, &seq).unwrap();
        let back = read_embeddings(&path).unwrap();
        assert_eq!(back.onsets, seq.onsets);
        assert_eq!(back.vectors, seq.vectors);
    }

    #[test]
    fn embedding_reader_reports_bad_lines() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.emb");
        fs::write(&path, "VBXEMB 1 128\n0.0 1.5 0.25\n").unwrap();
        match read_embeddings(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }

        fs::write(&path, "NOPE 1 2\n").unwrap();
        assert!(matches!(
            read_embeddings(&path),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn embeddings_reject_unsorted_onsets() {
        let err = EmbeddingSequence::new(
            "rec",
            vec![Ticks::from_seconds(0.5), Ticks::from_seconds(0.25)],
            vec![Ticks::from_seconds(1.0), Ticks::from_seconds(1.0)],
            array![[0.0], [1.0]],
        );
        assert!(err.is_err());
    }

    #[test]
    fn vad_parse_and_validation() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rec.vad");
        fs::write(&path, "1.00 2.50 speech\n3.0 4.0 speech\n").unwrap();
        let vad = read_vad(&path).unwrap();
        assert_eq!(
            vad.intervals,
            vec![
                (Ticks::from_seconds(1.0), Ticks::from_seconds(2.5)),
                (Ticks::from_seconds(3.0), Ticks::from_seconds(4.0))
            ]
        );

        fs::write(&path, "1.0 2.0 music\n").unwrap();
        assert!(matches!(read_vad(&path), Err(Error::Parse { line: 1, .. })));

        fs::write(&path, "1.0 2.0 speech\n1.5 3.0 speech\n").unwrap();
        assert!(matches!(read_vad(&path), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn rttm_matches_expected_bytes() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("hyp.rttm");
        let timeline = Timeline::from_segments(
            "rec1",
            vec![Segment::from_seconds("rec1", 0.0, 0.5, "spk00")],
        )
        .unwrap();
        write_rttm(&path, &[timeline]).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            "SPEAKER rec1 1 0.000 0.500 <NA> <NA> spk00 <NA> <NA>\n"
        );
    }

    #[test]
    fn rttm_groups_by_recording() {
        let text = "SPEAKER a 1 0.0 1.0 <NA> <NA> s1 <NA> <NA>\n\
                    SPEAKER b 1 0.0 2.0 <NA> <NA> s2 <NA> <NA>\n\
                    SPEAKER a 1 1.0 1.0 <NA> <NA> s2 <NA> <NA>\n";
        let timelines = parse_rttm(text).unwrap();
        assert_eq!(timelines.len(), 2);
        assert_eq!(timelines[0].recording_id, "a");
        assert_eq!(timelines[0].len(), 2);
        assert_eq!(timelines[1].recording_id, "b");
    }

    #[test]
    fn rttm_rejects_unknown_type() {
        assert!(matches!(
            parse_rttm("LEXEME rec 1 0.0 1.0 <NA> <NA> w <NA> <NA>\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    proptest! {
        #[test]
        fn rttm_round_trip_is_byte_identical(
            segs in proptest::collection::vec((0u32..36000, 1u32..6000, 0usize..4), 1..20)
        ) {
            // Millisecond-grid segments, sorted by onset: a valid timeline.
            let dir = tempdir().unwrap();
            let path = dir.path().join("t.rttm");
            let mut sorted = segs.clone();
            sorted.sort_by_key(|&(on, _, _)| on);
            let timeline = Timeline::from_segments(
                "rec",
                sorted
                    .iter()
                    .map(|&(on, dur, spk)| {
                        Segment::new(
                            "rec",
                            Ticks(on as i64 * 10_000),
                            Ticks(dur as i64 * 10_000),
                            &format!("spk{spk:02}"),
                        )
                    })
                    .collect(),
            )
            .unwrap();
            write_rttm(&path, &[timeline]).unwrap();
            let bytes1 = fs::read(&path).unwrap();
            let back = read_rttm(&path).unwrap();
            write_rttm(&path, &back).unwrap();
            let bytes2 = fs::read(&path).unwrap();
            prop_assert_eq!(bytes1, bytes2);
        }
    }

    #[test]
    fn plda_and_space_round_trip() {
        let dir = tempdir().unwrap();
        let model = PldaModel {
            dim: 2,
            mean: array![0.25, -1.5],
            within_cov: array![[2.0, 0.1], [0.1, 1.0]],
            between_cov: array![[5.0, 0.0], [0.0, 3.0]],
        };
        let path = dir.path().join("model.plda");
        write_plda(&path, &model).unwrap();
        let back = read_plda(&path).unwrap();
        assert_eq!(back.mean, model.mean);
        assert_eq!(back.within_cov, model.within_cov);
        assert_eq!(back.between_cov, model.between_cov);

        let (space, _) = crate::plda::derive_space(&model, 2).unwrap();
        let spath = dir.path().join("model.space");
        write_space(&spath, &space).unwrap();
        let back = read_space(&spath).unwrap();
        assert_eq!(back.source_dim, 2);
        assert_eq!(back.dim, 2);
        assert_eq!(back.phi, space.phi);
        assert_eq!(back.projection, space.projection);
        assert_eq!(back.mean, space.mean);
    }

    #[test]
    fn labeled_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("train.lbl");
        let data = LabeledEmbeddings::new(
            array![[0.5, 1.0], [2.0, -1.0], [0.1, 0.2]],
            vec!["a".into(), "b".into(), "a".into()],
        )
        .unwrap();
        write_labeled(&path, &data).unwrap();
        let back = read_labeled(&path).unwrap();
        assert_eq!(back.speaker_ids, data.speaker_ids);
        assert_eq!(back.vectors, data.vectors);
    }

    #[test]
    fn words_file_parsing() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("words.txt");
        fs::write(
            &path,
            "rec1 A 0.86 0.98 word\nrec1 A NA NA vocal_sound\nrec2 B 1.0 2.0 word\n",
        )
        .unwrap();
        let grouped = read_words(&path).unwrap();
        assert_eq!(grouped.len(), 2);
        assert_eq!(grouped[0].0, "rec1");
        assert_eq!(grouped[0].1.len(), 2);
        assert!(grouped[0].1[1].times.is_none());

        fs::write(&path, "rec1 A 0.86 0.98 noise\n").unwrap();
        assert!(matches!(
            read_words(&path),
            Err(Error::Parse { line: 1, .. })
        ));

        fs::write(&path, "rec1 A 0.98 0.86 word\n").unwrap();
        assert!(matches!(
            read_words(&path),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
