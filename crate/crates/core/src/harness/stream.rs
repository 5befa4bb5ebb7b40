//! Stream items, JSONL loading, and stratified stream construction.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::derive_seed;
use crate::sampler::uniform_sample_without_replacement;
use rand::SeedableRng as _;
use rand_chacha::ChaCha8Rng;

/// One labelled text in a stream.
///
/// `timestamp` is only an ordering key. Integer timestamps are used
/// verbatim; ISO-8601 timestamps are converted to epoch milliseconds on
/// load (mixing both styles in one dataset is allowed but ordering across
/// styles is then the dataset author's responsibility).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StreamItem {
    pub id: String,
    pub text: String,
    pub class: u32,
    pub timestamp: i64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawTimestamp {
    Integer(i64),
    Text(String),
}

#[derive(Deserialize)]
struct RawItem {
    id: String,
    text: String,
    class: u32,
    timestamp: RawTimestamp,
}

fn parse_timestamp(raw: RawTimestamp) -> std::result::Result<i64, String> {
    match raw {
        RawTimestamp::Integer(t) => Ok(t),
        RawTimestamp::Text(s) => {
            if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(&s) {
                return Ok(dt.timestamp_millis());
            }
            // Tolerate a missing zone: treat the naive form as UTC.
            if let Ok(dt) = chrono::NaiveDateTime::parse_from_str(&s, "%Y-%m-%dT%H:%M:%S%.f") {
                return Ok(dt.and_utc().timestamp_millis());
            }
            Err(format!("unparseable timestamp {s:?}"))
        }
    }
}

/// Parses JSON-lines text into stream items; blank lines are skipped.
///
/// `source` labels error messages (usually the file path). Item ids must be
/// unique within the dataset.
pub fn parse_jsonl(text: &str, source: &str) -> Result<Vec<StreamItem>> {
    let mut items = Vec::new();
    let mut seen_ids = HashSet::new();
    for (line_no, line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let format_err = |message: String| Error::Format {
            path: source.to_owned(),
            line: line_no,
            message,
        };
        let raw: RawItem = serde_json::from_str(line).map_err(|e| format_err(e.to_string()))?;
        let timestamp = parse_timestamp(raw.timestamp).map_err(&format_err)?;
        if !seen_ids.insert(raw.id.clone()) {
            return Err(format_err(format!("duplicate id {:?}", raw.id)));
        }
        items.push(StreamItem {
            id: raw.id,
            text: raw.text,
            class: raw.class,
            timestamp,
        });
    }
    Ok(items)
}

/// Loads a JSONL dataset from disk.
pub fn load_jsonl(path: &Path) -> Result<Vec<StreamItem>> {
    let text = fs::read_to_string(path)?;
    parse_jsonl(&text, &path.display().to_string())
}

/// Serializes items back to JSONL (inverse of [`parse_jsonl`] for integer
/// timestamps).
pub fn to_jsonl(items: &[StreamItem]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("plain struct serializes"));
        out.push('\n');
    }
    out
}

/// Draws a `length`-sized replay stream whose class mix matches the
/// dataset's.
///
/// Per-class quotas come from largest-remainder allocation (exact integer
/// arithmetic; remainder ties resolved toward the lower class id), members
/// are drawn uniformly without replacement per class with a seed derived
/// per stratum, and the result is ordered by `(timestamp, original index)`.
pub fn stratified_stream(
    dataset: &[StreamItem],
    length: usize,
    seed: u64,
) -> Result<Vec<StreamItem>> {
    if dataset.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    if length > dataset.len() {
        return Err(Error::SampleSizeTooLarge {
            requested: length,
            available: dataset.len(),
        });
    }
    // Class membership lists in dataset order.
    let mut classes: Vec<u32> = dataset.iter().map(|i| i.class).collect();
    classes.sort_unstable();
    classes.dedup();
    let members: Vec<(u32, Vec<usize>)> = classes
        .iter()
        .map(|&c| {
            let idx: Vec<usize> = dataset
                .iter()
                .enumerate()
                .filter(|(_, item)| item.class == c)
                .map(|(i, _)| i)
                .collect();
            (c, idx)
        })
        .collect();

    // Largest-remainder quotas.
    let total = dataset.len();
    let mut quotas: Vec<usize> = Vec::with_capacity(members.len());
    let mut remainders: Vec<(usize, usize)> = Vec::with_capacity(members.len()); // (remainder, position)
    for (pos, (_, idx)) in members.iter().enumerate() {
        quotas.push(length * idx.len() / total);
        remainders.push((length * idx.len() % total, pos));
    }
    let mut remaining = length - quotas.iter().sum::<usize>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, pos) in &remainders {
        if remaining == 0 {
            break;
        }
        quotas[pos] += 1;
        remaining -= 1;
    }

    let mut selected: Vec<usize> = Vec::with_capacity(length);
    for ((class, idx), &quota) in members.iter().zip(&quotas) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "stratum", u64::from(*class)));
        let within = uniform_sample_without_replacement(idx.len(), quota, &mut rng)?;
        selected.extend(within.into_iter().map(|w| idx[w]));
    }
    selected.sort_by_key(|&i| (dataset[i].timestamp, i));
    Ok(selected.into_iter().map(|i| dataset[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(id: &str, class: u32, timestamp: i64) -> StreamItem {
        StreamItem {
            id: id.to_owned(),
            text: format!("text {id}"),
            class,
            timestamp,
        }
    }

    #[test]
    fn parses_integer_and_iso_timestamps() {
        let text = concat!(
            "{\"id\":\"a\",\"text\":\"hi\",\"class\":0,\"timestamp\":5}\n",
            "{\"id\":\"b\",\"text\":\"yo\",\"class\":1,\"timestamp\":\"2021-01-02T03:04:05Z\"}\n",
            "\n",
            "{\"id\":\"c\",\"text\":\"ho\",\"class\":1,\"timestamp\":\"2021-01-02T03:04:05\"}\n",
        );
        let items = parse_jsonl(text, "test").unwrap();
        assert_eq!(items.len(), 3);
        assert_eq!(items[0].timestamp, 5);
        // Offsetless ISO is read as UTC, so b and c coincide.
        assert_eq!(items[1].timestamp, items[2].timestamp);
        assert!(items[1].timestamp > 1_600_000_000_000); // epoch millis scale
    }

    #[test]
    fn iso_ordering_is_preserved() {
        let text = concat!(
            "{\"id\":\"a\",\"text\":\"\",\"class\":0,\"timestamp\":\"2021-01-02T03:04:06Z\"}\n",
            "{\"id\":\"b\",\"text\":\"\",\"class\":0,\"timestamp\":\"2021-01-02T03:04:05+00:00\"}\n",
        );
        let items = parse_jsonl(text, "test").unwrap();
        assert!(items[0].timestamp > items[1].timestamp);
    }

    #[test]
    fn rejects_malformed_lines() {
        let err = parse_jsonl("{\"id\":\"a\"}\n", "data.jsonl").unwrap_err();
        assert!(matches!(err, Error::Format { line: 1, .. }), "{err}");

        let dup = concat!(
            "{\"id\":\"a\",\"text\":\"\",\"class\":0,\"timestamp\":1}\n",
            "{\"id\":\"a\",\"text\":\"\",\"class\":0,\"timestamp\":2}\n",
        );
        let err = parse_jsonl(dup, "data.jsonl").unwrap_err();
        assert!(matches!(err, Error::Format { line: 2, .. }), "{err}");

        let bad_ts = "{\"id\":\"a\",\"text\":\"\",\"class\":0,\"timestamp\":\"whenever\"}\n";
        assert!(parse_jsonl(bad_ts, "data.jsonl").is_err());

        let bad_class = "{\"id\":\"a\",\"text\":\"\",\"class\":-1,\"timestamp\":1}\n";
        assert!(parse_jsonl(bad_class, "data.jsonl").is_err());
    }

    #[test]
    fn jsonl_roundtrips() {
        let items = vec![item("a", 0, 5), item("b", 2, 1)];
        let parsed = parse_jsonl(&to_jsonl(&items), "mem").unwrap();
        assert_eq!(parsed, items);
    }

    fn mixed_dataset() -> Vec<StreamItem> {
        // 6 of class 0, 4 of class 1, timestamps descending to exercise the
        // final ordering.
        let mut items = Vec::new();
        for i in 0..6 {
            items.push(item(&format!("a{i}"), 0, 100 - i as i64));
        }
        for i in 0..4 {
            items.push(item(&format!("b{i}"), 1, 50 - i as i64));
        }
        items
    }

    #[test]
    fn stratified_quota_matches_proportions() {
        let data = mixed_dataset();
        let stream = stratified_stream(&data, 5, 1).unwrap();
        let zeros = stream.iter().filter(|i| i.class == 0).count();
        assert_eq!(zeros, 3); // 60% of 5 via largest remainder
        assert_eq!(stream.len() - zeros, 2);
    }

    #[test]
    fn stratified_sixty_forty_example() {
        let data = mixed_dataset();
        let stream = stratified_stream(&data, 10, 1).unwrap();
        assert_eq!(stream.iter().filter(|i| i.class == 0).count(), 6);
        assert_eq!(stream.iter().filter(|i| i.class == 1).count(), 4);
        // Full-length selection replays the dataset in timestamp order.
        let timestamps: Vec<i64> = stream.iter().map(|i| i.timestamp).collect();
        let mut sorted = timestamps.clone();
        sorted.sort_unstable();
        assert_eq!(timestamps, sorted);
    }

    #[test]
    fn stratified_largest_remainder_rounding() {
        // 1 vs 9 items, draw 9: exact quotas 0.9 and 8.1; the singleton
        // class wins the leftover slot.
        let mut data = vec![item("x", 0, 0)];
        for i in 0..9 {
            data.push(item(&format!("y{i}"), 1, i as i64 + 1));
        }
        let stream = stratified_stream(&data, 9, 3).unwrap();
        assert_eq!(stream.iter().filter(|i| i.class == 0).count(), 1);
        assert_eq!(stream.iter().filter(|i| i.class == 1).count(), 8);
    }

    #[test]
    fn stratified_rejects_oversized_length() {
        let data = mixed_dataset();
        assert!(matches!(
            stratified_stream(&data, 11, 1),
            Err(Error::SampleSizeTooLarge {
                requested: 11,
                available: 10
            })
        ));
    }

    #[test]
    fn stratified_seeds_vary_membership_not_counts() {
        let data = mixed_dataset();
        let a = stratified_stream(&data, 5, 1).unwrap();
        let b = stratified_stream(&data, 5, 2).unwrap();
        let ids = |s: &[StreamItem]| -> Vec<String> { s.iter().map(|i| i.id.clone()).collect() };
        assert_eq!(
            a.iter().filter(|i| i.class == 0).count(),
            b.iter().filter(|i| i.class == 0).count()
        );
        assert_ne!(ids(&a), ids(&b), "different seeds pick different members");
        let a2 = stratified_stream(&data, 5, 1).unwrap();
        assert_eq!(ids(&a), ids(&a2), "same seed reproduces the stream");
    }
}
