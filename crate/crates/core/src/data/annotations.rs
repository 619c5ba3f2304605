use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::FrameSpan;

/// A grounded query with boundaries in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub video_id: String,
    pub query: String,
    pub start_sec: f64,
    pub end_sec: f64,
    pub duration_sec: f64,
    /// Annotated point in seconds. Sampled from the boundaries when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_sec: Option<f64>,
    /// Token feature file (relative to the dataset's `tokens/` directory).
    /// The query text is embedded when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_file: Option<String>,
}

impl AnnotationRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let ok = self.start_sec >= 0.0
            && self.start_sec < self.end_sec
            && self.end_sec <= self.duration_sec
            && self.duration_sec.is_finite();
        if !ok {
            return Err(format!(
                "need 0 <= start < end <= duration, got start {} end {} duration {}",
                self.start_sec, self.end_sec, self.duration_sec
            ));
        }
        if let Some(p) = self.point_sec {
            if !(self.start_sec..=self.end_sec).contains(&p) {
                return Err(format!("point {p} lies outside [{}, {}]", self.start_sec, self.end_sec));
            }
        }
        Ok(())
    }
}

/// Video durations for the Charades-style text format, which omits them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DurationTable(pub HashMap<String, f64>);

impl DurationTable {
    /// Reads `video_id duration` pairs, one per line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut map = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |reason: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                reason,
            };
            let mut parts = line.split_whitespace();
            let (Some(id), Some(dur), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(parse_err("expected `video_id duration`".into()));
            };
            let dur: f64 = dur.parse().map_err(|_| parse_err(format!("bad duration `{dur}`")))?;
            map.insert(id.to_string(), dur);
        }
        Ok(Self(map))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnnotationFormat {
    /// `vid start end##sentence`, durations from a sidecar table.
    CharadesSta(DurationTable),
    /// One JSON object per line with the fields of [`AnnotationRecord`].
    JsonLines,
}

pub fn parse_charades_line(line: &str, durations: &DurationTable) -> std::result::Result<AnnotationRecord, String> {
    let (head, query) = line
        .split_once("##")
        .ok_or_else(|| "missing `##` separator".to_string())?;
    let mut parts = head.split_whitespace();
    let (Some(vid), Some(s), Some(e), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
        return Err("expected `video_id start end##sentence`".into());
    };
    let start_sec: f64 = s.parse().map_err(|_| format!("bad start `{s}`"))?;
    let end_sec: f64 = e.parse().map_err(|_| format!("bad end `{e}`"))?;
    let duration_sec = *durations
        .0
        .get(vid)
        .ok_or_else(|| format!("no duration for video `{vid}`"))?;
    Ok(AnnotationRecord {
        video_id: vid.to_string(),
        query: query.trim().to_string(),
        start_sec,
        end_sec,
        duration_sec,
        point_sec: None,
        token_file: None,
    })
}

/// Reads every record in file order; the first bad line aborts with its
/// line number.
pub fn load_annotations(path: &Path, format: &AnnotationFormat) -> Result<Vec<AnnotationRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = match format {
            AnnotationFormat::CharadesSta(d) => parse_charades_line(line, d),
            AnnotationFormat::JsonLines => {
                serde_json::from_str::<AnnotationRecord>(line).map_err(|e| e.to_string())
            }
        }
        .and_then(|r| r.validate().map(|_| r))
        .map_err(|reason| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        })?;
        out.push(rec);
    }
    log::info!("loaded {} annotations from {}", out.len(), path.display());
    Ok(out)
}

pub fn write_annotations_jsonl(path: &Path, records: &[AnnotationRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Values this close to an integer are treated as that integer, so exact
/// frame positions survive a trip through seconds.
const SNAP: f64 = 1e-9;

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < SNAP {
        r
    } else {
        x
    }
}

/// Maps a seconds interval onto the `num_frames` grid, widening with
/// floor/ceil.
pub fn seconds_to_frames(rec: &AnnotationRecord, num_frames: usize) -> FrameSpan {
    let last = num_frames.saturating_sub(1) as f64;
    let s = snap(rec.start_sec / rec.duration_sec * last).floor().clamp(0.0, last) as usize;
    let e = snap(rec.end_sec / rec.duration_sec * last).ceil().clamp(0.0, last) as usize;
    FrameSpan { start: s, end: e.max(s) }
}

/// Nearest grid frame to a time in seconds.
pub fn second_to_frame(sec: f64, duration_sec: f64, num_frames: usize) -> usize {
    let last = num_frames.saturating_sub(1) as f64;
    (sec / duration_sec * last).round().clamp(0.0, last) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(start: f64, end: f64, duration: f64) -> AnnotationRecord {
        AnnotationRecord {
            video_id: "v".into(),
            query: "q".into(),
            start_sec: start,
            end_sec: end,
            duration_sec: duration,
            point_sec: None,
            token_file: None,
        }
    }

    fn durations() -> DurationTable {
        DurationTable([("AO8RW".to_string(), 30.0)].into_iter().collect())
    }

    #[test]
    fn charades_line() {
        let r = parse_charades_line("AO8RW 2.4 7.6##a person puts a book away", &durations()).unwrap();
        assert_eq!(r.video_id, "AO8RW");
        assert_eq!((r.start_sec, r.end_sec, r.duration_sec), (2.4, 7.6, 30.0));
        assert_eq!(r.query, "a person puts a book away");
    }

    #[test]
    fn bad_lines_report_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.txt");
        std::fs::write(&path, "AO8RW 1.0 2.0##ok\nAO8RW 8.0 3.0##backwards\n").unwrap();
        let err = load_annotations(&path, &AnnotationFormat::CharadesSta(durations())).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn order_preserved() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        let recs = vec![rec(0.0, 1.0, 5.0), rec(1.0, 2.0, 5.0), rec(3.0, 4.0, 5.0)];
        write_annotations_jsonl(&path, &recs).unwrap();
        assert_eq!(load_annotations(&path, &AnnotationFormat::JsonLines).unwrap(), recs);
    }

    #[test]
    fn frame_mapping_examples() {
        assert_eq!(seconds_to_frames(&rec(0.0, 30.0, 30.0), 64), FrameSpan { start: 0, end: 63 });
        assert_eq!(seconds_to_frames(&rec(15.0, 15.001, 30.0), 61), FrameSpan { start: 30, end: 31 });
        assert_eq!(seconds_to_frames(&rec(2.4, 7.6, 30.0), 31), FrameSpan { start: 2, end: 8 });
    }

    proptest! {
        #[test]
        fn widening_never_shrinks(a in 0.0f64..10.0, b in 0.0f64..10.0, grow_l in 0.0f64..5.0, grow_r in 0.0f64..5.0, lv in 2usize..100) {
            let (s, e) = if a < b { (a, b) } else { (b, a + 0.01) };
            let dur = 25.0;
            let inner = seconds_to_frames(&rec(s + grow_l, e + grow_l, dur), lv);
            let outer = seconds_to_frames(&rec(s, e + grow_l + grow_r, dur), lv);
            prop_assert!(outer.start <= inner.start && outer.end >= inner.end);
        }
    }
}
