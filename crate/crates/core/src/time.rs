//! UTC instants (whole seconds) and calendar-day helpers.

use chrono::{DateTime, NaiveDate, NaiveTime, SecondsFormat, TimeZone, Utc};

use crate::error::{Error, Result};

/// Seconds since the Unix epoch, UTC.
pub type Timestamp = i64;

pub const SECONDS_PER_DAY: i64 = 86_400;

pub fn parse_timestamp(s: &str) -> Result<Timestamp> {
    let s = s.trim();
    DateTime::parse_from_rfc3339(s)
        .map(|dt| dt.with_timezone(&Utc).timestamp())
        .map_err(|e| Error::InvalidInput(format!("bad timestamp `{s}`: {e}")))
}

/// Accepts either an RFC 3339 instant or integer epoch seconds.
pub fn parse_instant_lenient(s: &str) -> Result<Timestamp> {
    match s.trim().parse::<i64>() {
        Ok(v) => Ok(v),
        Err(_) => parse_timestamp(s),
    }
}

pub fn format_timestamp(ts: Timestamp) -> String {
    Utc.timestamp_opt(ts, 0)
        .single()
        .map(|dt| dt.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| ts.to_string())
}

pub fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| Error::InvalidInput(format!("bad date `{s}`: {e}")))
}

/// Midnight UTC at the start of `date`.
pub fn day_start(date: NaiveDate) -> Timestamp {
    date.and_time(NaiveTime::MIN).and_utc().timestamp()
}

/// Last second of `date`.
pub fn day_end(date: NaiveDate) -> Timestamp {
    day_start(date) + SECONDS_PER_DAY - 1
}

pub fn date_of(ts: Timestamp) -> NaiveDate {
    Utc.timestamp_opt(ts, 0)
        .single()
        .map(|dt| dt.date_naive())
        .unwrap_or(NaiveDate::MIN)
}

/// Serde adapter writing instants as RFC 3339 strings.
pub mod rfc3339 {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::Timestamp;

    pub fn serialize<S: Serializer>(ts: &Timestamp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_timestamp(*ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Timestamp, D::Error> {
        let raw = String::deserialize(d)?;
        super::parse_timestamp(&raw).map_err(serde::de::Error::custom)
    }

    pub mod vec {
        use serde::ser::SerializeSeq;
        use serde::{Deserialize, Deserializer, Serializer};

        use super::super::Timestamp;

        pub fn serialize<S: Serializer>(v: &[Timestamp], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for ts in v {
                seq.serialize_element(&super::super::format_timestamp(*ts))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Timestamp>, D::Error> {
            let raw = Vec::<String>::deserialize(d)?;
            raw.iter()
                .map(|r| super::super::parse_timestamp(r).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}

/// Closed interval of instants; both endpoints inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct TimeWindow {
    #[serde(with = "rfc3339")]
    pub start: Timestamp,
    #[serde(with = "rfc3339")]
    pub end: Timestamp,
}

impl TimeWindow {
    pub fn new(start: Timestamp, end: Timestamp) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidInput(format!(
                "window start {} after end {}",
                format_timestamp(start),
                format_timestamp(end)
            )));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, ts: Timestamp) -> bool {
        self.start <= ts && ts <= self.end
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamp_round_trip() {
        let ts = parse_timestamp("2021-01-01T00:00:01Z").unwrap();
        assert_eq!(format_timestamp(ts), "2021-01-01T00:00:01Z");
        assert_eq!(parse_instant_lenient("5").unwrap(), 5);
        assert_eq!(parse_instant_lenient("1970-01-01T00:00:05Z").unwrap(), 5);
    }

    #[test]
    fn offsets_normalize_to_utc() {
        let a = parse_timestamp("2021-01-01T02:00:00+02:00").unwrap();
        let b = parse_timestamp("2021-01-01T00:00:00Z").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn day_bounds() {
        let d = parse_date("1970-01-02").unwrap();
        assert_eq!(day_start(d), SECONDS_PER_DAY);
        assert_eq!(day_end(d), 2 * SECONDS_PER_DAY - 1);
        assert_eq!(date_of(day_end(d)), d);
    }
}

