//! Parse, validate, normalize, deduplicate, and order tweet records from
//! line-delimited input.
//!
//! Field names in heterogeneous dumps are adapted through a
//! [`SchemaMapping`]; timestamps are accepted as epoch seconds or RFC 3339
//! and normalized to epoch seconds. Text is NFC-normalized once here, with
//! no lowercasing, whitespace collapsing, or URL stripping: downstream
//! similarity compares the text as posted.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::{is_nfc_quick, IsNormalized, UnicodeNormalization};

/// Post type. Only retweets are excluded from text-similarity analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TweetKind {
    Original,
    Reply,
    Quote,
    Retweet,
}

impl TweetKind {
    fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "original" => Some(TweetKind::Original),
            "reply" => Some(TweetKind::Reply),
            "quote" => Some(TweetKind::Quote),
            "retweet" => Some(TweetKind::Retweet),
            _ => None,
        }
    }
}

/// One post event. Timestamps are whole epoch seconds (platform granularity).
///
/// Invariant: the three `retweeted_*` fields are present iff
/// `kind == Retweet`, and they resolve to the ROOT original tweet, never an
/// intermediate retweet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub tweet_id: String,
    pub author_id: String,
    pub created_at: i64,
    pub text: String,
    pub kind: TweetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retweeted_tweet_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retweeted_author_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retweeted_created_at: Option<i64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub urls: Vec<String>,
}

/// Chronologically sorted records, strictly ordered by
/// `(created_at, tweet_id)` with no duplicate ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TweetStream {
    records: Vec<TweetRecord>,
}

impl TweetStream {
    /// Builds a stream from records in input order. Duplicate tweet ids keep
    /// the first occurrence; the count of dropped records is returned.
    pub fn from_records(records: Vec<TweetRecord>) -> (Self, usize) {
        let mut seen = HashSet::with_capacity(records.len());
        let mut kept = Vec::with_capacity(records.len());
        let mut dropped = 0usize;
        for rec in records {
            if seen.insert(rec.tweet_id.clone()) {
                kept.push(rec);
            } else {
                dropped += 1;
            }
        }
        kept.sort_by(|a, b| {
            (a.created_at, a.tweet_id.as_str()).cmp(&(b.created_at, b.tweet_id.as_str()))
        });
        (TweetStream { records: kept }, dropped)
    }

    pub fn records(&self) -> &[TweetRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TweetRecord> {
        self.records.iter()
    }
}

impl<'a> IntoIterator for &'a TweetStream {
    type Item = &'a TweetRecord;
    type IntoIter = std::slice::Iter<'a, TweetRecord>;
    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// True for the kinds whose text enters similarity analysis: originals,
/// replies, and quotes. Retweets are ignored.
pub fn eligible_for_similarity(record: &TweetRecord) -> bool {
    !matches!(record.kind, TweetKind::Retweet)
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        source: std::io::Error,
    },
    #[error("schema mapping: {0}")]
    SchemaMapping(String),
    #[error(
        "{rejected} of {total} lines rejected (>50%); the schema mapping \
         likely does not match this input"
    )]
    TooManyRejected { rejected: usize, total: usize },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Why a line was not turned into a stream record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    Malformed(String),
    DuplicateTweetId(String),
}

/// One rejected-line report; `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub reason: RejectReason,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.reason {
            RejectReason::Malformed(msg) => write!(f, "line {}: {msg}", self.line),
            RejectReason::DuplicateTweetId(id) => {
                write!(f, "line {}: duplicate tweet_id {id:?}, keeping first", self.line)
            }
        }
    }
}

/// Result of parsing one input: the normalized stream plus per-line
/// diagnostics and counters.
#[derive(Debug)]
pub struct ParseOutcome {
    pub stream: TweetStream,
    pub diagnostics: Vec<Diagnostic>,
    /// Non-blank lines seen.
    pub total_lines: usize,
    pub accepted: usize,
    pub malformed: usize,
    pub duplicates: usize,
}

const CANONICAL_FIELDS: [&str; 9] = [
    "tweet_id",
    "author_id",
    "created_at",
    "text",
    "kind",
    "retweeted_tweet_id",
    "retweeted_author_id",
    "retweeted_created_at",
    "urls",
];

/// Maps canonical field names to dot-separated paths in the source objects.
#[derive(Debug, Clone)]
pub struct SchemaMapping {
    paths: BTreeMap<String, String>,
}

impl Default for SchemaMapping {
    fn default() -> Self {
        Self::identity()
    }
}

impl SchemaMapping {
    /// Canonical field names map to themselves.
    pub fn identity() -> Self {
        SchemaMapping {
            paths: CANONICAL_FIELDS
                .iter()
                .map(|f| (f.to_string(), f.to_string()))
                .collect(),
        }
    }

    /// Loads a TOML table of `canonical_field = "source.path"` overrides.
    /// Unmapped fields keep their canonical names.
    pub fn from_toml_str(s: &str) -> Result<Self, IngestError> {
        let table: BTreeMap<String, String> = toml::from_str(s)
            .map_err(|e| IngestError::SchemaMapping(e.to_string()))?;
        let mut mapping = Self::identity();
        for (key, path) in table {
            if !CANONICAL_FIELDS.contains(&key.as_str()) {
                return Err(IngestError::SchemaMapping(format!(
                    "unknown field {key:?}; expected one of {CANONICAL_FIELDS:?}"
                )));
            }
            mapping.paths.insert(key, path);
        }
        Ok(mapping)
    }

    pub fn from_path(path: &Path) -> Result<Self, IngestError> {
        let mut s = String::new();
        File::open(path)
            .map_err(|e| IngestError::Unreadable {
                path: path.display().to_string(),
                source: e,
            })?
            .read_to_string(&mut s)?;
        Self::from_toml_str(&s)
    }

    fn lookup<'v>(&self, root: &'v serde_json::Value, field: &str) -> Option<&'v serde_json::Value> {
        let path = self.paths.get(field)?;
        let mut cur = root;
        for seg in path.split('.') {
            cur = cur.get(seg)?;
        }
        Some(cur)
    }
}

/// Parses line-delimited records from a file.
///
/// Fatal only when the file is unreadable or more than half of the non-blank
/// lines are malformed (which signals a wrong schema mapping); individual bad
/// lines become diagnostics instead.
pub fn parse_stream_path(path: &Path, schema: &SchemaMapping) -> Result<ParseOutcome, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::Unreadable {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_stream(BufReader::new(file), schema)
}

/// Parses line-delimited records from any reader. See [`parse_stream_path`].
pub fn parse_stream(
    reader: impl BufRead,
    schema: &SchemaMapping,
) -> Result<ParseOutcome, IngestError> {
    let lines: Vec<(usize, String)> = reader
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|s| (i + 1, s)))
        .collect::<Result<_, _>>()?;

    // Lines parse independently, so chunks can go wide; everything after
    // this map is a deterministic sequential pass in line order.
    let parsed: Vec<(usize, Result<TweetRecord, String>)> = lines
        .par_iter()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(no, line)| (*no, parse_line(line, schema)))
        .collect();

    let total_lines = parsed.len();
    let mut diagnostics = Vec::new();
    let mut records = Vec::with_capacity(total_lines);
    let mut seen: HashSet<String> = HashSet::with_capacity(total_lines);
    let mut malformed = 0usize;
    let mut duplicates = 0usize;
    for (line, result) in parsed {
        match result {
            Ok(rec) => {
                if seen.insert(rec.tweet_id.clone()) {
                    records.push(rec);
                } else {
                    duplicates += 1;
                    diagnostics.push(Diagnostic {
                        line,
                        reason: RejectReason::DuplicateTweetId(rec.tweet_id),
                    });
                }
            }
            Err(msg) => {
                malformed += 1;
                diagnostics.push(Diagnostic {
                    line,
                    reason: RejectReason::Malformed(msg),
                });
            }
        }
    }

    if malformed * 2 > total_lines {
        return Err(IngestError::TooManyRejected {
            rejected: malformed,
            total: total_lines,
        });
    }

    let accepted = records.len();
    let (stream, dropped) = TweetStream::from_records(records);
    debug_assert_eq!(dropped, 0);
    Ok(ParseOutcome {
        stream,
        diagnostics,
        total_lines,
        accepted,
        malformed,
        duplicates,
    })
}

fn parse_line(line: &str, schema: &SchemaMapping) -> Result<TweetRecord, String> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    if !value.is_object() {
        return Err("line is not a JSON object".into());
    }

    let tweet_id = require_id(schema, &value, "tweet_id")?;
    let author_id = require_id(schema, &value, "author_id")?;
    let created_at = parse_timestamp(
        schema
            .lookup(&value, "created_at")
            .ok_or("missing created_at")?,
    )
    .ok_or("created_at is neither epoch seconds nor RFC 3339")?;
    let raw_text = schema
        .lookup(&value, "text")
        .and_then(|v| v.as_str())
        .ok_or("missing or non-string text")?;
    let kind_str = schema
        .lookup(&value, "kind")
        .and_then(|v| v.as_str())
        .ok_or("missing or non-string kind")?;
    let kind = TweetKind::parse(kind_str)
        .ok_or_else(|| format!("unknown kind {kind_str:?}"))?;

    let (retweeted_tweet_id, retweeted_author_id, retweeted_created_at) =
        if kind == TweetKind::Retweet {
            let rt_id = optional_id(schema, &value, "retweeted_tweet_id")
                .ok_or("retweet without retweeted_tweet_id")?;
            let rt_author = optional_id(schema, &value, "retweeted_author_id")
                .ok_or("retweet without retweeted_author_id")?;
            let rt_created = schema
                .lookup(&value, "retweeted_created_at")
                .and_then(parse_timestamp)
                .ok_or("retweet without retweeted_created_at")?;
            if created_at < rt_created {
                return Err(format!(
                    "retweet created_at {created_at} precedes original {rt_created}"
                ));
            }
            (Some(rt_id), Some(rt_author), Some(rt_created))
        } else {
            // Non-retweets never carry retweet provenance; mapped fields that
            // happen to exist (e.g. quoted-status refs) are ignored.
            (None, None, None)
        };

    let urls = schema
        .lookup(&value, "urls")
        .map(parse_urls)
        .unwrap_or_default();

    Ok(TweetRecord {
        tweet_id,
        author_id,
        created_at,
        text: nfc_normalize(raw_text),
        kind,
        retweeted_tweet_id,
        retweeted_author_id,
        retweeted_created_at,
        urls,
    })
}

fn require_id(
    schema: &SchemaMapping,
    value: &serde_json::Value,
    field: &str,
) -> Result<String, String> {
    optional_id(schema, value, field).ok_or(format!("missing or non-scalar {field}"))
}

// Ids arrive as strings or bare integers depending on the dump.
fn optional_id(schema: &SchemaMapping, value: &serde_json::Value, field: &str) -> Option<String> {
    match schema.lookup(value, field)? {
        serde_json::Value::String(s) if !s.is_empty() => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_timestamp(value: &serde_json::Value) -> Option<i64> {
    match value {
        serde_json::Value::Number(n) => n.as_i64(),
        serde_json::Value::String(s) => {
            if let Ok(secs) = s.parse::<i64>() {
                Some(secs)
            } else {
                chrono::DateTime::parse_from_rfc3339(s)
                    .ok()
                    .map(|dt| dt.timestamp())
            }
        }
        _ => None,
    }
}

fn parse_urls(value: &serde_json::Value) -> Vec<String> {
    let Some(items) = value.as_array() else {
        return Vec::new();
    };
    items
        .iter()
        .filter_map(|item| match item {
            serde_json::Value::String(s) => Some(s.clone()),
            // Entity objects from platform dumps: prefer the expanded form.
            serde_json::Value::Object(obj) => obj
                .get("expanded_url")
                .or_else(|| obj.get("url"))
                .and_then(|v| v.as_str())
                .map(str::to_string),
            _ => None,
        })
        .collect()
}

fn nfc_normalize(s: &str) -> String {
    match is_nfc_quick(s.chars()) {
        IsNormalized::Yes => s.to_string(),
        _ => s.nfc().collect(),
    }
}

/// Writes the canonical line-delimited form; `parse_stream` with the identity
/// mapping reads it back to an equal stream.
pub fn write_stream(stream: &TweetStream, mut writer: impl Write) -> std::io::Result<()> {
    for rec in stream.iter() {
        serde_json::to_writer(&mut writer, rec)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn line(id: &str, author: &str, at: i64, text: &str) -> String {
        format!(
            r#"{{"tweet_id":"{id}","author_id":"{author}","created_at":{at},"text":"{text}","kind":"original"}}"#
        )
    }

    fn parse(input: &str) -> ParseOutcome {
        parse_stream(Cursor::new(input), &SchemaMapping::identity()).unwrap()
    }

    #[test]
    fn duplicate_keeps_first() {
        let input = format!("{}\n{}\n", line("t1", "a", 5, "first"), line("t1", "b", 9, "second"));
        let out = parse(&input);
        assert_eq!(out.stream.len(), 1);
        assert_eq!(out.stream.records()[0].text, "first");
        assert_eq!(out.duplicates, 1);
        assert_eq!(out.diagnostics.len(), 1);
        assert!(matches!(
            out.diagnostics[0].reason,
            RejectReason::DuplicateTweetId(ref id) if id == "t1"
        ));
    }

    #[test]
    fn empty_file() {
        let out = parse("");
        assert!(out.stream.is_empty());
        assert!(out.diagnostics.is_empty());
    }

    #[test]
    fn sorts_by_time_then_id() {
        let input = format!(
            "{}\n{}\n{}\n",
            line("b", "x", 5, "late"),
            line("c", "x", 3, "tied-c"),
            line("a", "x", 3, "tied-a"),
        );
        let out = parse(&input);
        let ids: Vec<&str> = out.stream.iter().map(|r| r.tweet_id.as_str()).collect();
        assert_eq!(ids, ["a", "c", "b"]);
    }

    #[test]
    fn malformed_lines_are_diagnosed_not_fatal() {
        let input = format!("not json\n{}\n{}\n", line("t1", "a", 1, "x"), line("t2", "a", 2, "y"));
        let out = parse(&input);
        assert_eq!(out.stream.len(), 2);
        assert_eq!(out.malformed, 1);
        assert_eq!(out.diagnostics[0].line, 1);
    }

    #[test]
    fn majority_malformed_is_fatal() {
        let input = format!("junk\nmore junk\n{}\n", line("t1", "a", 1, "x"));
        let err = parse_stream(Cursor::new(input), &SchemaMapping::identity()).unwrap_err();
        assert!(matches!(
            err,
            IngestError::TooManyRejected { rejected: 2, total: 3 }
        ));
    }

    #[test]
    fn retweet_requires_all_provenance_fields() {
        let missing = r#"{"tweet_id":"t1","author_id":"a","created_at":9,"text":"rt","kind":"retweet","retweeted_tweet_id":"t0"}"#;
        let out = parse(&format!("{missing}\n{}\n", line("t2", "a", 1, "x")));
        assert_eq!(out.malformed, 1);
        assert_eq!(out.stream.len(), 1);
    }

    #[test]
    fn retweet_before_original_rejected() {
        let bad = r#"{"tweet_id":"t1","author_id":"a","created_at":5,"text":"rt","kind":"retweet","retweeted_tweet_id":"t0","retweeted_author_id":"b","retweeted_created_at":9}"#;
        let out = parse(&format!("{bad}\n{}\n", line("t2", "a", 1, "x")));
        assert_eq!(out.malformed, 1);
    }

    #[test]
    fn non_retweet_drops_stray_provenance() {
        let quote = r#"{"tweet_id":"t1","author_id":"a","created_at":5,"text":"q","kind":"quote","retweeted_tweet_id":"t0"}"#;
        let out = parse(&format!("{quote}\n"));
        assert_eq!(out.stream.len(), 1);
        assert_eq!(out.stream.records()[0].retweeted_tweet_id, None);
    }

    #[test]
    fn eligibility_is_by_kind_only() {
        let mk = |kind| TweetRecord {
            tweet_id: "t".into(),
            author_id: "a".into(),
            created_at: 0,
            text: String::new(),
            kind,
            retweeted_tweet_id: None,
            retweeted_author_id: None,
            retweeted_created_at: None,
            urls: vec![],
        };
        assert!(eligible_for_similarity(&mk(TweetKind::Original)));
        assert!(eligible_for_similarity(&mk(TweetKind::Reply)));
        assert!(eligible_for_similarity(&mk(TweetKind::Quote)));
        assert!(!eligible_for_similarity(&mk(TweetKind::Retweet)));
    }

    #[test]
    fn timestamps_accept_rfc3339() {
        let input = r#"{"tweet_id":"t1","author_id":"a","created_at":"1970-01-01T00:02:00+00:00","text":"x","kind":"original"}"#;
        let out = parse(&format!("{input}\n"));
        assert_eq!(out.stream.records()[0].created_at, 120);
    }

    #[test]
    fn text_is_nfc_normalized() {
        // "e" + combining acute accent composes to U+00E9.
        let input = r#"{"tweet_id":"t1","author_id":"a","created_at":1,"text":"café","kind":"original"}"#;
        let out = parse(&format!("{input}\n"));
        assert_eq!(out.stream.records()[0].text, "caf\u{00e9}");
    }

    #[test]
    fn schema_mapping_walks_nested_paths() {
        let mapping = SchemaMapping::from_toml_str(
            r#"
tweet_id = "id_str"
author_id = "user.id"
created_at = "ts"
text = "full_text"
kind = "meta.kind"
"#,
        )
        .unwrap();
        let input = r#"{"id_str":991,"user":{"id":"u7"},"ts":42,"full_text":"hi","meta":{"kind":"Reply"}}"#;
        let out = parse_stream(Cursor::new(format!("{input}\n")), &mapping).unwrap();
        let rec = &out.stream.records()[0];
        assert_eq!(rec.tweet_id, "991");
        assert_eq!(rec.author_id, "u7");
        assert_eq!(rec.created_at, 42);
        assert_eq!(rec.kind, TweetKind::Reply);
    }

    #[test]
    fn schema_mapping_rejects_unknown_field() {
        assert!(SchemaMapping::from_toml_str("tweet_identifier = \"x\"").is_err());
    }

    #[test]
    fn url_entities_prefer_expanded() {
        let input = r#"{"tweet_id":"t1","author_id":"a","created_at":1,"text":"x","kind":"original","urls":[{"url":"https://t.co/x","expanded_url":"https://example.org/full"},"https://plain.example/"]}"#;
        let out = parse(&format!("{input}\n"));
        assert_eq!(
            out.stream.records()[0].urls,
            vec!["https://example.org/full", "https://plain.example/"]
        );
    }

    fn arb_record() -> impl Strategy<Value = TweetRecord> {
        (
            "[a-z0-9]{1,8}",
            "[a-z]{1,6}",
            0i64..100_000,
            "\\PC{0,40}",
            prop_oneof![
                Just(TweetKind::Original),
                Just(TweetKind::Reply),
                Just(TweetKind::Quote)
            ],
            proptest::collection::vec("https://[a-z]{3,8}\\.example/[a-z0-9]{1,6}", 0..3),
        )
            .prop_map(|(tweet_id, author_id, created_at, text, kind, urls)| TweetRecord {
                tweet_id,
                author_id,
                created_at,
                text: nfc_normalize(&text),
                kind,
                retweeted_tweet_id: None,
                retweeted_author_id: None,
                retweeted_created_at: None,
                urls,
            })
    }

    proptest! {
        // parse ∘ serialize is identity on valid streams.
        #[test]
        fn round_trip(records in proptest::collection::vec(arb_record(), 0..20)) {
            let (stream, _) = TweetStream::from_records(records);
            let mut buf = Vec::new();
            write_stream(&stream, &mut buf).unwrap();
            let out = parse_stream(Cursor::new(buf), &SchemaMapping::identity()).unwrap();
            prop_assert_eq!(out.stream, stream);
        }

        // Any permutation of the same records yields the identical stream.
        #[test]
        fn ordering_is_total(
            records in proptest::collection::vec(arb_record(), 0..20),
            seed in 0u64..1000,
        ) {
            let (stream, _) = TweetStream::from_records(records.clone());
            let mut shuffled = records;
            // Fisher-Yates with a tiny deterministic LCG.
            let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            for i in (1..shuffled.len()).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (state >> 33) as usize % (i + 1);
                shuffled.swap(i, j);
            }
            let unique_ids: HashSet<_> = shuffled.iter().map(|r| r.tweet_id.clone()).collect();
            prop_assume!(unique_ids.len() == shuffled.len());
            let (reshuffled, _) = TweetStream::from_records(shuffled);
            prop_assert_eq!(reshuffled, stream);
        }
    }
}
