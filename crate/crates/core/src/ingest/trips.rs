use std::fmt;
use std::io::Read;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime, TimeDelta};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::LonLat;

pub const TRIP_HEADER: [&str; 9] = [
    "mode",
    "user_id",
    "date",
    "origin_time",
    "origin_lon",
    "origin_lat",
    "dest_time",
    "dest_lon",
    "dest_lat",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "FFBS")]
    Ffbs,
    PublicBike,
    Metro,
    Bus,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Ffbs, Mode::PublicBike, Mode::Metro, Mode::Bus];

    pub fn is_bike(self) -> bool {
        matches!(self, Mode::Ffbs | Mode::PublicBike)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Ffbs => "FFBS",
            Mode::PublicBike => "PublicBike",
            Mode::Metro => "Metro",
            Mode::Bus => "Bus",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| !c.is_whitespace() && *c != '_' && *c != '-').collect();
        match key.to_ascii_lowercase().as_str() {
            "ffbs" => Ok(Mode::Ffbs),
            "publicbike" => Ok(Mode::PublicBike),
            "metro" => Ok(Mode::Metro),
            "bus" => Ok(Mode::Bus),
            _ => Err(format!("unknown mode `{s}`")),
        }
    }
}

/// One trip with both endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct TripRecord {
    pub mode: Mode,
    pub user_id: String,
    pub date: NaiveDate,
    pub origin_time: NaiveDateTime,
    pub dest_time: NaiveDateTime,
    pub origin: LonLat,
    pub dest: LonLat,
}

impl TripRecord {
    pub fn duration(&self) -> TimeDelta {
        self.dest_time - self.origin_time
    }
}

/// A row that could not be turned into a [`TripRecord`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MalformedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedTrips {
    pub records: Vec<TripRecord>,
    pub malformed: Vec<MalformedRow>,
}

impl ParsedTrips {
    pub fn rows(&self) -> usize {
        self.records.len() + self.malformed.len()
    }
}

pub(crate) fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").or_else(|_| NaiveDate::parse_from_str(s, "%Y/%m/%d")).ok()
}

fn parse_timestamp(s: &str, date: NaiveDate) -> Option<NaiveDateTime> {
    if let Ok(t) = NaiveTime::parse_from_str(s, "%H:%M:%S") {
        return Some(date.and_time(t));
    }
    ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y/%m/%d %H:%M:%S"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

fn field<'a>(rec: &'a csv::StringRecord, i: usize) -> std::result::Result<&'a str, String> {
    match rec.get(i).map(str::trim) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(format!("missing `{}`", TRIP_HEADER[i])),
    }
}

fn coord(rec: &csv::StringRecord, i: usize) -> std::result::Result<f64, String> {
    let v = field(rec, i)?;
    v.parse::<f64>().map_err(|_| format!("`{}` is not a number: {v}", TRIP_HEADER[i]))
}

fn parse_row(rec: &csv::StringRecord, default_mode: Option<Mode>) -> std::result::Result<TripRecord, String> {
    let mode = match rec.get(0).map(str::trim).filter(|s| !s.is_empty()) {
        Some(m) => m.parse::<Mode>()?,
        None => default_mode.ok_or("missing `mode`")?,
    };
    let user_id = rec.get(1).unwrap_or("").trim().to_string();
    let date_s = field(rec, 2)?;
    let date = parse_date(date_s).ok_or_else(|| format!("bad date `{date_s}`"))?;
    let ot = field(rec, 3)?;
    let origin_time = parse_timestamp(ot, date).ok_or_else(|| format!("bad origin_time `{ot}`"))?;
    let origin = LonLat::new(coord(rec, 4)?, coord(rec, 5)?);
    let dt = field(rec, 6)?;
    let dest_time = parse_timestamp(dt, date).ok_or_else(|| format!("bad dest_time `{dt}`"))?;
    let dest = LonLat::new(coord(rec, 7)?, coord(rec, 8)?);
    Ok(TripRecord { mode, user_id, date, origin_time, dest_time, origin, dest })
}

/// Parses a trip CSV with the standard header. Rows that cannot be parsed
/// are collected in `malformed`; only an unreadable stream or a wrong header
/// is fatal. `default_mode` fills an empty `mode` cell.
pub fn parse_trips<R: Read>(reader: R, default_mode: Option<Mode>) -> Result<ParsedTrips> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let found: Vec<&str> = headers.iter().map(str::trim).collect();
    if found != TRIP_HEADER {
        return Err(Error::HeaderMismatch { expected: TRIP_HEADER.join(","), found: found.join(",") });
    }
    let mut out = ParsedTrips::default();
    let mut rec = csv::StringRecord::new();
    let mut line = 1u64;
    loop {
        line += 1;
        match rdr.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => match parse_row(&rec, default_mode) {
                Ok(r) => out.records.push(r),
                Err(reason) => out.malformed.push(MalformedRow { line, reason }),
            },
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => out.malformed.push(MalformedRow { line, reason: e.to_string() }),
        }
    }
    Ok(out)
}

/// Writes trips in the standard CSV layout with full timestamps.
pub fn write_trips<W: std::io::Write>(trips: &[TripRecord], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(TRIP_HEADER)?;
    for t in trips {
        wtr.write_record([
            t.mode.as_str().to_string(),
            t.user_id.clone(),
            t.date.format("%Y-%m-%d").to_string(),
            t.origin_time.format("%Y-%m-%d %H:%M:%S").to_string(),
            format!("{:.6}", t.origin.lon),
            format!("{:.6}", t.origin.lat),
            t.dest_time.format("%Y-%m-%d %H:%M:%S").to_string(),
            format!("{:.6}", t.dest.lon),
            format!("{:.6}", t.dest.lat),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "mode,user_id,date,origin_time,origin_lon,origin_lat,dest_time,dest_lon,dest_lat\n";

    #[test]
    fn ffbs_row_from_dataset_table() {
        let csv = format!("{HEADER}FFBS,Mobike864****,2020-11-10,20:33:23,118.88459,32.08721,20:43:20,118.87801,32.08519\n");
        let p = parse_trips(csv.as_bytes(), None).unwrap();
        assert!(p.malformed.is_empty());
        let t = &p.records[0];
        assert_eq!(t.mode, Mode::Ffbs);
        assert_eq!(t.duration(), TimeDelta::seconds(9 * 60 + 57));
        assert_eq!(t.origin, LonLat::new(118.88459, 32.08721));
    }

    #[test]
    fn unpadded_dates_parse() {
        let csv = format!("{HEADER}Metro,0D401B****,2019-3-10,16:41:01,118.72796,31.98994,15:27:37,118.75692,31.99289\n");
        let p = parse_trips(csv.as_bytes(), None).unwrap();
        assert_eq!(p.records.len(), 1);
        assert!(p.records[0].duration() < TimeDelta::zero());
    }

    #[test]
    fn empty_file_with_header() {
        let p = parse_trips(HEADER.as_bytes(), None).unwrap();
        assert_eq!(p.rows(), 0);
    }

    #[test]
    fn missing_destination_is_malformed() {
        let csv = format!("{HEADER}Bus,17,2020-07-10,09:19:12,118.75365,31.95445,09:31:24,,\n");
        let p = parse_trips(csv.as_bytes(), None).unwrap();
        assert!(p.records.is_empty());
        assert_eq!(p.malformed.len(), 1);
        assert_eq!(p.malformed[0].line, 2);
    }

    #[test]
    fn short_row_is_malformed_not_fatal() {
        let csv = format!("{HEADER}Bus,17,2020-07-10\nMetro,1,2019-03-11,08:36:14,118.79290,32.05934,08:49:27,118.73489,32.23092\n");
        let p = parse_trips(csv.as_bytes(), None).unwrap();
        assert_eq!(p.records.len(), 1);
        assert_eq!(p.malformed.len(), 1);
    }

    #[test]
    fn header_mismatch() {
        assert!(matches!(parse_trips("a,b\n".as_bytes(), None), Err(Error::HeaderMismatch { .. })));
    }

    #[test]
    fn full_timestamps_span_days() {
        let csv = format!("{HEADER}Metro,u,2020-01-01,2020-01-01 08:00:00,118.7,32.0,2020-01-02 10:00:00,118.8,32.1\n");
        let p = parse_trips(csv.as_bytes(), None).unwrap();
        assert_eq!(p.records[0].duration(), TimeDelta::hours(26));
    }

    #[test]
    fn mode_names() {
        assert_eq!("Public Bike".parse::<Mode>().unwrap(), Mode::PublicBike);
        assert_eq!("ffbs".parse::<Mode>().unwrap(), Mode::Ffbs);
        assert!("tram".parse::<Mode>().is_err());
    }

    #[test]
    fn write_then_parse() {
        let csv = format!("{HEADER}FFBS,Mobike864****,2020-11-10,20:33:23,118.88459,32.08721,20:43:20,118.87801,32.08519\n");
        let p = parse_trips(csv.as_bytes(), None).unwrap();
        let mut buf = Vec::new();
        write_trips(&p.records, &mut buf).unwrap();
        assert_eq!(parse_trips(buf.as_slice(), None).unwrap().records, p.records);
    }
}
