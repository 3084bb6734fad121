//! Station observation documents.
//!
//! Fixture schema:
//!
//! ```json
//! {"stations": [{"id": "98210", "latitude": 59.34, "longitude": 18.05,
//!                "observations": [{"timestamp": 1467331200, "value": 15.2}]}]}
//! ```
//!
//! Timestamps are seconds since the epoch.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationRecord {
    pub id: String,
    pub latitude: f64,
    pub longitude: f64,
    /// `(timestamp, value)`, strictly increasing in time.
    pub observations: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationError {
    pub index: usize,
    pub id: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StationParse {
    pub records: Vec<StationRecord>,
    pub errors: Vec<StationError>,
    /// Stations whose observations had to be reordered.
    pub reordered: usize,
    /// Observations dropped as duplicate timestamps.
    pub duplicates: usize,
}

fn number(v: &Value, key: &str) -> std::result::Result<f64, String> {
    let x = v.get(key).ok_or_else(|| format!("missing field {key:?}"))?;
    let n = match x {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
    .ok_or_else(|| format!("field {key:?} is not a number"))?;
    if !n.is_finite() {
        return Err(format!("field {key:?} is not finite"));
    }
    Ok(n)
}

/// Sorts by time and keeps the last of any duplicated timestamps.
/// Returns (reordered, duplicates dropped).
fn normalize(obs: &mut Vec<(f64, f64)>) -> (bool, usize) {
    let reordered = obs.windows(2).any(|w| w[1].0 < w[0].0);
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let before = obs.len();
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(before);
    for &(t, v) in obs.iter() {
        match out.last_mut() {
            Some(last) if last.0 == t => last.1 = v,
            _ => out.push((t, v)),
        }
    }
    *obs = out;
    (reordered, before - obs.len())
}

fn parse_station(v: &Value) -> std::result::Result<(StationRecord, bool, usize), String> {
    let id = match v.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => return Err("missing field \"id\"".into()),
    };
    let latitude = number(v, "latitude")?;
    let longitude = number(v, "longitude")?;
    let list = v
        .get("observations")
        .and_then(Value::as_array)
        .ok_or("missing field \"observations\"")?;
    let mut observations = Vec::with_capacity(list.len());
    for (k, o) in list.iter().enumerate() {
        let t = number(o, "timestamp").map_err(|e| format!("observation {k}: {e}"))?;
        let x = number(o, "value").map_err(|e| format!("observation {k}: {e}"))?;
        observations.push((t, x));
    }
    let (reordered, dups) = normalize(&mut observations);
    Ok((
        StationRecord {
            id,
            latitude,
            longitude,
            observations,
        },
        reordered,
        dups,
    ))
}

/// Parses a fixture document. Malformed stations are reported individually
/// and skipped; out-of-order observations are sorted and duplicate timestamps
/// keep the last value.
pub fn parse_station_json(document: &str) -> Result<StationParse> {
    let doc: Value = serde_json::from_str(document)?;
    let stations = doc
        .get("stations")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Document("expected a top-level \"stations\" array".into()))?;
    let mut out = StationParse::default();
    for (index, s) in stations.iter().enumerate() {
        match parse_station(s) {
            Ok((rec, reordered, dups)) => {
                if reordered {
                    log::warn!("station {}: observations out of order, sorted", rec.id);
                    out.reordered += 1;
                }
                if dups > 0 {
                    log::warn!("station {}: {dups} duplicate timestamps, kept the last value", rec.id);
                    out.duplicates += dups;
                }
                out.records.push(rec);
            }
            Err(message) => {
                let id = s.get("id").map(|v| v.to_string().trim_matches('"').to_string());
                log::warn!("station #{index}: {message}");
                out.errors.push(StationError { index, id, message });
            }
        }
    }
    Ok(out)
}

/// Maps an SMHI metobs `data.json` document to a record: the station key is
/// the id, the latest position gives the coordinates, and millisecond dates
/// become seconds.
pub fn smhi_to_record(document: &str) -> Result<StationRecord> {
    let doc: Value = serde_json::from_str(document)?;
    let bad = |m: &str| Error::Document(format!("SMHI document: {m}"));
    let id = doc
        .pointer("/station/key")
        .and_then(|v| v.as_str().map(str::to_string).or_else(|| v.as_i64().map(|n| n.to_string())))
        .ok_or_else(|| bad("missing station key"))?;
    let pos = doc
        .get("position")
        .and_then(Value::as_array)
        .and_then(|a| a.last())
        .ok_or_else(|| bad("missing position"))?;
    let latitude = number(pos, "latitude").map_err(|e| bad(&e))?;
    let longitude = number(pos, "longitude").map_err(|e| bad(&e))?;
    let values = doc.get("value").and_then(Value::as_array).ok_or_else(|| bad("missing value array"))?;
    let mut observations = Vec::with_capacity(values.len());
    for v in values {
        let date = number(v, "date").map_err(|e| bad(&e))?;
        let x = number(v, "value").map_err(|e| bad(&e))?;
        observations.push((date / 1000.0, x));
    }
    normalize(&mut observations);
    Ok(StationRecord {
        id,
        latitude,
        longitude,
        observations,
    })
}

/// Wraps records back into the fixture schema.
pub fn stations_to_json(records: &[StationRecord]) -> Result<String> {
    let stations: Vec<Value> = records
        .iter()
        .map(|r| {
            serde_json::json!({
                "id": r.id,
                "latitude": r.latitude,
                "longitude": r.longitude,
                "observations": r.observations.iter()
                    .map(|(t, v)| serde_json::json!({"timestamp": t, "value": v}))
                    .collect::<Vec<_>>(),
            })
        })
        .collect();
    Ok(serde_json::to_string_pretty(&serde_json::json!({ "stations": stations }))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_list() {
        let p = parse_station_json(r#"{"stations": []}"#).unwrap();
        assert!(p.records.is_empty() && p.errors.is_empty());
    }

    #[test]
    fn missing_fields_are_per_station() {
        let doc = r#"{"stations": [
            {"id": "a", "latitude": 1, "longitude": 2, "observations": [{"timestamp": 0, "value": 1}]},
            {"id": "b", "longitude": 2, "observations": []},
            {"id": "c", "latitude": 1, "longitude": 2, "observations": [{"timestamp": 0}]}
        ]}"#;
        let p = parse_station_json(doc).unwrap();
        assert_eq!(p.records.len(), 1);
        assert_eq!(p.errors.len(), 2);
        assert_eq!(p.errors[0].id.as_deref(), Some("b"));
    }

    #[test]
    fn duplicates_keep_last_and_order_is_fixed() {
        let doc = r#"{"stations": [{"id": "a", "latitude": 1, "longitude": 2, "observations": [
            {"timestamp": 7200, "value": 3}, {"timestamp": 0, "value": 1},
            {"timestamp": 3600, "value": 2}, {"timestamp": 3600, "value": 5}]}]}"#;
        let p = parse_station_json(doc).unwrap();
        assert_eq!(p.records[0].observations, vec![(0.0, 1.0), (3600.0, 5.0), (7200.0, 3.0)]);
        assert_eq!((p.reordered, p.duplicates), (1, 1));
    }

    #[test]
    fn smhi_mapping() {
        let doc = r#"{"value": [{"date": 1467334800000, "value": "15.5", "quality": "G"},
                                {"date": 1467331200000, "value": "15.2", "quality": "G"}],
                      "station": {"key": "98210", "name": "Stockholm"},
                      "position": [{"from": 0, "to": 1, "height": 44.0, "latitude": 59.3417, "longitude": 18.0549}]}"#;
        let r = smhi_to_record(doc).unwrap();
        assert_eq!(r.id, "98210");
        assert_eq!(r.observations, vec![(1467331200.0, 15.2), (1467334800.0, 15.5)]);
    }
}
