use std::io::{Read, Write};

use chrono::{DateTime, FixedOffset};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTelemetryRecord {
    pub time_tx: DateTime<FixedOffset>,
    pub vehicle_id: String,
    pub variable_id: String,
    pub value: RawValue,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedRaw {
    pub records: Vec<RawTelemetryRecord>,
    pub malformed: usize,
}

const HEADER: [&str; 4] = ["time_tx", "vehicle_id", "variable_id", "variable_value"];

fn parse_time(s: &str) -> Option<DateTime<FixedOffset>> {
    DateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f%:z")
        .or_else(|_| DateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f%:z"))
        .or_else(|_| DateTime::parse_from_rfc3339(s))
        .ok()
}

/// Writes records in the format read by [`parse_raw`].
pub fn write_raw<W: Write>(records: &[RawTelemetryRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for r in records {
        let value = match &r.value {
            RawValue::Number(v) => v.to_string(),
            RawValue::Text(t) => t.clone(),
        };
        w.write_record([
            r.time_tx.format("%Y-%m-%d %H:%M:%S%:z").to_string(),
            r.vehicle_id.clone(),
            r.variable_id.clone(),
            value,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parses `time_tx,vehicle_id,variable_id,variable_value` records.
///
/// Lines with the wrong column count, an unparseable timestamp or an empty
/// vehicle/variable id are counted in `malformed` and skipped.
pub fn parse_raw<R: Read>(reader: R) -> Result<ParsedRaw> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 4 || headers.iter().zip(HEADER).any(|(h, e)| h != e) {
        return Err(Error::MissingHeader("raw telemetry file"));
    }
    let mut out = ParsedRaw::default();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                out.malformed += 1;
                continue;
            }
        };
        if rec.len() != 4 || rec[1].is_empty() || rec[2].is_empty() {
            out.malformed += 1;
            continue;
        }
        let Some(time_tx) = parse_time(&rec[0]) else {
            out.malformed += 1;
            continue;
        };
        let raw = &rec[3];
        let value = match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => RawValue::Number(v),
            _ => RawValue::Text(raw.to_string()),
        };
        out.records.push(RawTelemetryRecord {
            time_tx,
            vehicle_id: rec[1].to_string(),
            variable_id: rec[2].to_string(),
            value,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sample_line() {
        let txt = "time_tx,vehicle_id,variable_id,variable_value\n\
                   2020-10-31 00:02:34.073000+00:00,b123,EngineSpeed,1200\n";
        let p = parse_raw(txt.as_bytes()).unwrap();
        assert_eq!(p.malformed, 0);
        assert_eq!(p.records.len(), 1);
        let r = &p.records[0];
        assert_eq!(r.vehicle_id, "b123");
        assert_eq!(r.variable_id, "EngineSpeed");
        assert_eq!(r.value, RawValue::Number(1200.0));
    }

    #[test]
    fn empty_body_is_empty() {
        let p = parse_raw("time_tx,vehicle_id,variable_id,variable_value\n".as_bytes()).unwrap();
        assert!(p.records.is_empty());
        assert_eq!(p.malformed, 0);
    }

    #[test]
    fn short_line_counted_malformed() {
        let txt = "time_tx,vehicle_id,variable_id,variable_value\n\
                   2020-10-31 00:02:34+00:00,b123,EngineSpeed\n\
                   2020-10-31T01:00:00Z,b123,vin,WVWZZZ1KZ8W000001\n";
        let p = parse_raw(txt.as_bytes()).unwrap();
        assert_eq!(p.malformed, 1);
        assert_eq!(p.records.len(), 1);
        assert_eq!(p.records[0].value, RawValue::Text("WVWZZZ1KZ8W000001".into()));
    }

    #[test]
    fn missing_header_is_error() {
        assert!(matches!(
            parse_raw("a,b,c,d\n".as_bytes()),
            Err(Error::MissingHeader(_))
        ));
    }
}
