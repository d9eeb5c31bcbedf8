//! GDELT Global Knowledge Graph 2.1 ingestion: tab-delimited record
//! parsing, theme/state filtering, and the per-source salience series.
//!
//! Real GKG feeds contain malformed rows, so parsing never aborts a file:
//! bad rows are skipped and counted, bad subfields are dropped and counted,
//! and the caller gets a report alongside the records.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::month::{MonthRange, YearMonth};
use crate::par;

/// Number of tab-separated fields in a GKG 2.1 row.
const GKG_FIELD_COUNT: usize = 27;

const IDX_RECORD_ID: usize = 0;
const IDX_DATE: usize = 1;
const IDX_SOURCE_NAME: usize = 3;
const IDX_ENHANCED_THEMES: usize = 8;
const IDX_ENHANCED_LOCATIONS: usize = 10;
const IDX_TONE: usize = 15;

/// Tolerance for the tone ~ positive - negative consistency warning; GKG
/// rounds each component independently.
const TONE_MISMATCH_SLACK: f64 = 0.05;

#[derive(Debug, Error)]
pub enum GkgError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Two-letter US state code, e.g. `CA`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StateCode(String);

impl StateCode {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// ADM1 code GDELT uses for this state, e.g. `USCA`.
    pub fn adm1(&self) -> String {
        format!("US{}", self.0)
    }
}

impl FromStr for StateCode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.trim().to_ascii_uppercase();
        if up.len() == 2 && up.bytes().all(|b| b.is_ascii_uppercase()) {
            Ok(StateCode(up))
        } else {
            Err(format!("invalid state code {s:?}"))
        }
    }
}

impl TryFrom<String> for StateCode {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<StateCode> for String {
    fn from(s: StateCode) -> String {
        s.0
    }
}

impl fmt::Display for StateCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub loc_type: i32,
    pub full_name: String,
    pub country_code: String,
    /// For US locations: `US` followed by the state code, e.g. `USCA`.
    pub adm1_code: String,
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ToneBlock {
    pub tone: f64,
    pub positive_score: f64,
    pub negative_score: f64,
    pub polarity: f64,
    pub word_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GkgRecord {
    pub record_id: String,
    pub date: NaiveDateTime,
    pub source_name: String,
    /// Theme codes with character offsets, in input order.
    pub themes: Vec<(String, u32)>,
    pub locations: Vec<Location>,
    pub tone: ToneBlock,
}

impl GkgRecord {
    pub fn month(&self) -> YearMonth {
        YearMonth::new(self.date.year(), self.date.month() as u8).expect("chrono month is valid")
    }

    pub fn has_theme(&self, theme: &str) -> bool {
        self.themes.iter().any(|(code, _)| code == theme)
    }

    pub fn mentions_state(&self, state: &StateCode) -> bool {
        let adm1 = state.adm1();
        self.locations.iter().any(|loc| loc.adm1_code == adm1)
    }

    /// Re-serializes the retained fields into a 27-field GKG row. Fields the
    /// pipeline ignores are left empty; parsing the output reproduces the
    /// record exactly.
    pub fn to_line(&self) -> String {
        let mut fields = vec![String::new(); GKG_FIELD_COUNT];
        fields[IDX_RECORD_ID] = self.record_id.clone();
        fields[IDX_DATE] = self.date.format("%Y%m%d%H%M%S").to_string();
        fields[IDX_SOURCE_NAME] = self.source_name.clone();
        fields[IDX_ENHANCED_THEMES] = self
            .themes
            .iter()
            .map(|(code, off)| format!("{code},{off}"))
            .collect::<Vec<_>>()
            .join(";");
        fields[IDX_ENHANCED_LOCATIONS] = self
            .locations
            .iter()
            .map(|loc| {
                format!(
                    "{}#{}#{}#{}##{}#{}##",
                    loc.loc_type,
                    loc.full_name,
                    loc.country_code,
                    loc.adm1_code,
                    loc.latitude,
                    loc.longitude
                )
            })
            .collect::<Vec<_>>()
            .join(";");
        fields[IDX_TONE] = format!(
            "{},{},{},{},0,0,{}",
            self.tone.tone,
            self.tone.positive_score,
            self.tone.negative_score,
            self.tone.polarity,
            self.tone.word_count
        );
        fields.join("\t")
    }
}

/// One successfully parsed line plus its per-line quality counters.
#[derive(Debug, Clone)]
pub struct ParsedLine {
    pub record: GkgRecord,
    /// Theme/location/tone elements dropped as malformed.
    pub dropped_subfields: u32,
    /// Tone differed from positive - negative beyond format rounding.
    pub tone_mismatch: bool,
}

fn parse_themes(block: &str) -> (Vec<(String, u32)>, u32) {
    let mut themes = Vec::new();
    let mut dropped = 0;
    for part in block.split(';') {
        if part.is_empty() {
            continue;
        }
        match part.rsplit_once(',') {
            Some((code, offset)) if !code.is_empty() => match offset.trim().parse::<u32>() {
                Ok(off) => themes.push((code.to_string(), off)),
                Err(_) => dropped += 1,
            },
            _ => dropped += 1,
        }
    }
    (themes, dropped)
}

fn parse_locations(block: &str) -> (Vec<Location>, u32) {
    let mut locations = Vec::new();
    let mut dropped = 0;
    for part in block.split(';') {
        if part.is_empty() {
            continue;
        }
        let sub: Vec<&str> = part.split('#').collect();
        // V2 enhanced blocks carry 9 subfields (lat/long at 5/6); V1-style
        // blocks carry 7 (lat/long at 4/5).
        let (lat_idx, lon_idx) = match sub.len() {
            8.. => (5, 6),
            7 => (4, 5),
            _ => {
                dropped += 1;
                continue;
            }
        };
        let parsed = (|| {
            let loc_type: i32 = sub[0].trim().parse().ok()?;
            let latitude: f64 = sub[lat_idx].trim().parse().ok()?;
            let longitude: f64 = sub[lon_idx].trim().parse().ok()?;
            Some(Location {
                loc_type,
                full_name: sub[1].to_string(),
                country_code: sub[2].to_string(),
                adm1_code: sub[3].to_string(),
                latitude,
                longitude,
            })
        })();
        match parsed {
            Some(loc) => locations.push(loc),
            None => dropped += 1,
        }
    }
    (locations, dropped)
}

fn parse_tone(block: &str) -> Option<(ToneBlock, u32)> {
    if block.is_empty() {
        return None;
    }
    let parts: Vec<&str> = block.split(',').collect();
    if parts.len() < 7 {
        return None;
    }
    let num = |i: usize| {
        parts[i]
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
    };
    let tone = num(0)?;
    let positive_score = num(1)?;
    let negative_score = num(2)?;
    let polarity = num(3)?;
    let word_count = parts[6].trim().parse::<u32>().ok()?;
    if positive_score < 0.0 || negative_score < 0.0 {
        return None;
    }
    Some((
        ToneBlock {
            tone,
            positive_score,
            negative_score,
            polarity,
            word_count,
        },
        0,
    ))
}

/// Parses one GKG 2.1 row.
///
/// A wrong field count or unparseable date fails the whole record; bad
/// theme/location/tone elements are dropped and counted instead.
pub fn parse_gkg_record(line: &str) -> Result<ParsedLine, GkgError> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    if line.is_empty() {
        return Err(GkgError::MalformedRecord("empty line".into()));
    }
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != GKG_FIELD_COUNT {
        return Err(GkgError::MalformedRecord(format!(
            "expected {GKG_FIELD_COUNT} fields, got {}",
            fields.len()
        )));
    }

    let date = NaiveDateTime::parse_from_str(fields[IDX_DATE], "%Y%m%d%H%M%S").map_err(|_| {
        GkgError::MalformedRecord(format!("unparseable date {:?}", fields[IDX_DATE]))
    })?;

    let (themes, dropped_themes) = parse_themes(fields[IDX_ENHANCED_THEMES]);
    let (locations, dropped_locations) = parse_locations(fields[IDX_ENHANCED_LOCATIONS]);
    // A missing or bad tone block falls back to a zero block (classified as
    // a polarity tie downstream) and counts as a dropped subfield.
    let (tone, tone_dropped) = match parse_tone(fields[IDX_TONE]) {
        Some((tone, _)) => (tone, 0),
        None => (ToneBlock::default(), 1),
    };
    let tone_mismatch = tone_dropped == 0
        && (tone.tone - (tone.positive_score - tone.negative_score)).abs() > TONE_MISMATCH_SLACK;

    Ok(ParsedLine {
        record: GkgRecord {
            record_id: fields[IDX_RECORD_ID].to_string(),
            date,
            source_name: fields[IDX_SOURCE_NAME].to_string(),
            themes,
            locations,
            tone,
        },
        dropped_subfields: dropped_themes + dropped_locations + tone_dropped,
        tone_mismatch,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SkipEntry {
    pub line: usize,
    pub reason: String,
}

/// Per-file parse accounting; `lines == parsed + skips.len()` always.
#[derive(Debug, Clone, Serialize)]
pub struct ParseReport {
    pub file: String,
    pub lines: usize,
    pub parsed: usize,
    pub skips: Vec<SkipEntry>,
    pub dropped_subfields: u64,
    pub tone_mismatches: u64,
}

impl ParseReport {
    /// Plain-text skip report: one line per skipped row.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{}: {} lines, {} parsed, {} skipped, {} subfields dropped, {} tone mismatches\n",
            self.file,
            self.lines,
            self.parsed,
            self.skips.len(),
            self.dropped_subfields,
            self.tone_mismatches
        );
        for skip in &self.skips {
            out.push_str(&format!("{}:{}: {}\n", self.file, skip.line, skip.reason));
        }
        out
    }
}

/// Parses a batch of lines (parallel across lines, order preserved).
pub fn parse_lines(name: &str, lines: &[&str]) -> (Vec<GkgRecord>, ParseReport) {
    let outcomes = par::map_slice(lines, |line| parse_gkg_record(line));
    let mut records = Vec::with_capacity(outcomes.len());
    let mut report = ParseReport {
        file: name.to_string(),
        lines: lines.len(),
        parsed: 0,
        skips: Vec::new(),
        dropped_subfields: 0,
        tone_mismatches: 0,
    };
    for (idx, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(parsed) => {
                report.parsed += 1;
                report.dropped_subfields += parsed.dropped_subfields as u64;
                report.tone_mismatches += parsed.tone_mismatch as u64;
                records.push(parsed.record);
            }
            Err(err) => report.skips.push(SkipEntry {
                line: idx + 1,
                reason: err.to_string(),
            }),
        }
    }
    (records, report)
}

/// Reads one GKG TSV file. Input is plain text; decompress upstream.
pub fn parse_file(path: &Path) -> Result<(Vec<GkgRecord>, ParseReport), GkgError> {
    let content = fs::read_to_string(path).map_err(|source| GkgError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let lines: Vec<&str> = content.lines().collect();
    Ok(parse_lines(&path.display().to_string(), &lines))
}

/// Keeps records that mention at least one filter theme and carry a
/// location in the given state. A record tagged with several states passes
/// each state's filter.
pub fn filter_articles(
    records: &[GkgRecord],
    theme_filter: &BTreeSet<String>,
    state: &StateCode,
) -> Vec<GkgRecord> {
    records
        .iter()
        .filter(|r| {
            r.themes.iter().any(|(code, _)| theme_filter.contains(code)) && r.mentions_state(state)
        })
        .cloned()
        .collect()
}

/// Average articles per distinct source, by month. Months without records
/// are missing, not zero.
pub fn articles_per_source(
    records: &[GkgRecord],
    range: &MonthRange,
) -> Vec<(YearMonth, Option<f64>)> {
    let mut counts: Vec<usize> = vec![0; range.len()];
    let mut sources: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); range.len()];
    for record in records {
        if let Some(idx) = range.index_of(record.month()) {
            counts[idx] += 1;
            sources[idx].insert(record.source_name.as_str());
        }
    }
    range
        .iter()
        .enumerate()
        .map(|(idx, month)| {
            let value = if sources[idx].is_empty() {
                None
            } else {
                Some(counts[idx] as f64 / sources[idx].len() as f64)
            };
            (month, value)
        })
        .collect()
}
