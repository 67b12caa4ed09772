//! NMEA 0183 sentence parsing: GGA position fixes and RMC speed/date.
//!
//! Integrity first: the XOR checksum between `$` and `*` is verified
//! against the two hex digits after `*` before any field is trusted.
//! GGA sentences carry time-of-day only; the date comes from the most
//! recent RMC sentence or from configuration.

use chrono::NaiveDate;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NmeaError {
    #[error("checksum mismatch: sentence says {expected:02X}, computed {computed:02X}")]
    ChecksumMismatch { expected: u8, computed: u8 },
    #[error("unsupported sentence type '{0}'")]
    UnsupportedSentence(String),
    #[error("malformed field {index}: {detail}")]
    MalformedField { index: usize, detail: String },
}

/// A parsed position fix. GGA fills altitude/quality/satellites/HDOP; RMC
/// fills speed and contributes the date context.
#[derive(Debug, Clone, PartialEq)]
pub struct NmeaFix {
    /// Decimal degrees, hemisphere-signed.
    pub lat: f64,
    pub lon: f64,
    /// Antenna altitude above mean sea level (geoid), meters. GGA only.
    pub alt: Option<f64>,
    /// GGA fix quality; RMC status maps A→1, V→0.
    pub quality: u8,
    pub num_satellites: Option<u32>,
    pub hdop: Option<f64>,
    /// Ground speed m/s. RMC only.
    pub speed_mps: Option<f64>,
    /// UNIX nanoseconds from sentence time-of-day plus the date context.
    pub t: i64,
}

/// XOR of all bytes between `$` and `*`, exclusive.
pub fn checksum(payload: &str) -> u8 {
    payload.bytes().fold(0, |acc, b| acc ^ b)
}

fn malformed(index: usize, detail: impl Into<String>) -> NmeaError {
    NmeaError::MalformedField {
        index,
        detail: detail.into(),
    }
}

/// Verifies framing and checksum, returning the payload between `$` and `*`.
fn verify(line: &str) -> Result<&str, NmeaError> {
    let line = line.trim();
    let rest = line
        .strip_prefix('$')
        .ok_or_else(|| malformed(0, "sentence must start with '$'"))?;
    let star = rest
        .rfind('*')
        .ok_or_else(|| malformed(0, "sentence lacks a '*' checksum delimiter"))?;
    let (payload, hex) = rest.split_at(star);
    let hex = &hex[1..];
    if hex.len() < 2 {
        return Err(malformed(0, "checksum must be two hex digits"));
    }
    let expected = u8::from_str_radix(&hex[..2], 16)
        .map_err(|_| malformed(0, "checksum must be two hex digits"))?;
    let computed = checksum(payload);
    if expected != computed {
        return Err(NmeaError::ChecksumMismatch { expected, computed });
    }
    Ok(payload)
}

/// ddmm.mmmm (or dddmm.mmmm) plus hemisphere → signed decimal degrees.
fn parse_coordinate(value: &str, hemisphere: &str, index: usize) -> Result<f64, NmeaError> {
    let raw: f64 = value
        .parse()
        .map_err(|_| malformed(index, format!("'{value}' is not a ddmm.mmmm coordinate")))?;
    let degrees = (raw / 100.0).trunc();
    let minutes = raw - degrees * 100.0;
    if minutes >= 60.0 {
        return Err(malformed(index, format!("minutes component {minutes} out of range")));
    }
    let unsigned = degrees + minutes / 60.0;
    match hemisphere {
        "N" | "E" => Ok(unsigned),
        "S" | "W" => Ok(-unsigned),
        other => Err(malformed(
            index + 1,
            format!("hemisphere must be N/S/E/W, got '{other}'"),
        )),
    }
}

/// hhmmss.sss UTC plus a calendar date → UNIX nanoseconds.
fn parse_time(value: &str, date: NaiveDate, index: usize) -> Result<i64, NmeaError> {
    if value.len() < 6 {
        return Err(malformed(index, format!("'{value}' is not hhmmss[.sss]")));
    }
    let hours: u32 = value[0..2]
        .parse()
        .map_err(|_| malformed(index, "bad hours"))?;
    let minutes: u32 = value[2..4]
        .parse()
        .map_err(|_| malformed(index, "bad minutes"))?;
    let seconds: f64 = value[4..]
        .parse()
        .map_err(|_| malformed(index, "bad seconds"))?;
    if hours > 23 || minutes > 59 || !(0.0..60.0).contains(&seconds) {
        return Err(malformed(index, format!("'{value}' is out of range")));
    }
    let whole = seconds.trunc() as u32;
    let nanos = ((seconds - whole as f64) * 1e9).round() as u32;
    let dt = date
        .and_hms_nano_opt(hours, minutes, whole, nanos)
        .ok_or_else(|| malformed(index, "invalid time of day"))?
        .and_utc();
    dt.timestamp_nanos_opt()
        .ok_or_else(|| malformed(index, "time out of representable range"))
}

fn field<'a>(fields: &[&'a str], index: usize) -> Result<&'a str, NmeaError> {
    let value = fields
        .get(index)
        .ok_or_else(|| malformed(index, "field absent"))?;
    if value.is_empty() {
        return Err(malformed(index, "field empty"));
    }
    Ok(value)
}

/// Parses one GGA or RMC sentence with the given date context.
pub fn parse_nmea(line: &str, date: NaiveDate) -> Result<NmeaFix, NmeaError> {
    let payload = verify(line)?;
    let fields: Vec<&str> = payload.split(',').collect();
    let kind = fields
        .first()
        .ok_or_else(|| malformed(0, "empty sentence"))?;
    let sentence_type = if kind.len() >= 5 { &kind[2..] } else { *kind };
    match sentence_type {
        "GGA" => {
            let t = parse_time(field(&fields, 1)?, date, 1)?;
            let lat = parse_coordinate(field(&fields, 2)?, field(&fields, 3)?, 2)?;
            let lon = parse_coordinate(field(&fields, 4)?, field(&fields, 5)?, 4)?;
            let quality: u8 = field(&fields, 6)?
                .parse()
                .map_err(|_| malformed(6, "bad fix quality"))?;
            let num_satellites: u32 = field(&fields, 7)?
                .parse()
                .map_err(|_| malformed(7, "bad satellite count"))?;
            let hdop: f64 = field(&fields, 8)?
                .parse()
                .map_err(|_| malformed(8, "bad HDOP"))?;
            let alt: f64 = field(&fields, 9)?
                .parse()
                .map_err(|_| malformed(9, "bad altitude"))?;
            Ok(NmeaFix {
                lat,
                lon,
                alt: Some(alt),
                quality,
                num_satellites: Some(num_satellites),
                hdop: Some(hdop),
                speed_mps: None,
                t,
            })
        }
        "RMC" => {
            let date = parse_rmc_date(&fields).unwrap_or(date);
            let t = parse_time(field(&fields, 1)?, date, 1)?;
            let status = field(&fields, 2)?;
            let lat = parse_coordinate(field(&fields, 3)?, field(&fields, 4)?, 3)?;
            let lon = parse_coordinate(field(&fields, 5)?, field(&fields, 6)?, 5)?;
            let speed_knots: f64 = field(&fields, 7)?
                .parse()
                .map_err(|_| malformed(7, "bad speed"))?;
            Ok(NmeaFix {
                lat,
                lon,
                alt: None,
                quality: if status == "A" { 1 } else { 0 },
                num_satellites: None,
                hdop: None,
                speed_mps: Some(speed_knots * 0.514444444444444),
                t,
            })
        }
        other => Err(NmeaError::UnsupportedSentence(other.to_string())),
    }
}

/// RMC field 9 is ddmmyy.
fn parse_rmc_date(fields: &[&str]) -> Option<NaiveDate> {
    let value = fields.get(9)?;
    if value.len() != 6 {
        return None;
    }
    let day: u32 = value[0..2].parse().ok()?;
    let month: u32 = value[2..4].parse().ok()?;
    let yy: i32 = value[4..6].parse().ok()?;
    let year = if yy >= 80 { 1900 + yy } else { 2000 + yy };
    NaiveDate::from_ymd_opt(year, month, day)
}

/// Stateful line decoder: remembers the date and ground speed from RMC
/// sentences so GGA fixes get complete timestamps and a speed estimate.
#[derive(Debug, Clone)]
pub struct NmeaDecoder {
    date: NaiveDate,
    last_speed_mps: Option<f64>,
}

impl NmeaDecoder {
    pub fn new(default_date: NaiveDate) -> Self {
        Self {
            date: default_date,
            last_speed_mps: None,
        }
    }

    pub fn last_speed_mps(&self) -> Option<f64> {
        self.last_speed_mps
    }

    pub fn push(&mut self, line: &str) -> Result<NmeaFix, NmeaError> {
        let fix = parse_nmea(line, self.date)?;
        if let Some(speed) = fix.speed_mps {
            self.last_speed_mps = Some(speed);
            // RMC carried a date; adopt it for subsequent GGA sentences.
            if let Some(payload) = line.trim().strip_prefix('$') {
                let without_checksum = payload.split('*').next().unwrap_or(payload);
                let fields: Vec<&str> = without_checksum.split(',').collect();
                if let Some(date) = parse_rmc_date(&fields) {
                    self.date = date;
                }
            }
        }
        Ok(fix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GGA: &str = "$GPGGA,123519,4807.038,N,01131.000,E,1,08,0.9,545.4,M,46.9,M,,*47";
    const RMC: &str = "$GPRMC,123519,A,4807.038,N,01131.000,E,022.4,084.4,230394,003.1,W*6A";

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 1, 15).unwrap()
    }

    #[test]
    fn checksum_is_xor_of_payload() {
        // Oracle: independent XOR fold over the payload characters.
        let payload = "GPGGA,123519,4807.038,N,01131.000,E,1,08,0.9,545.4,M,46.9,M,,";
        let mut acc: u8 = 0;
        for b in payload.bytes() {
            acc ^= b;
        }
        assert_eq!(acc, 0x47);
        assert_eq!(checksum(payload), 0x47);
    }

    #[test]
    fn gga_worked_example() {
        // Oracle: hand conversion 48° + 07.038'/60 and 11° + 31.000'/60.
        let fix = parse_nmea(GGA, date()).unwrap();
        assert!((fix.lat - (48.0 + 7.038 / 60.0)).abs() < 1e-12);
        assert!((fix.lat - 48.1173).abs() < 1e-4);
        assert!((fix.lon - (11.0 + 31.0 / 60.0)).abs() < 1e-12);
        assert_eq!(fix.alt, Some(545.4));
        assert_eq!(fix.num_satellites, Some(8));
        assert_eq!(fix.quality, 1);
        assert_eq!(fix.hdop, Some(0.9));

        // 2024-01-15 12:35:19 UTC
        let expected_t = chrono::NaiveDate::from_ymd_opt(2024, 1, 15)
            .unwrap()
            .and_hms_opt(12, 35, 19)
            .unwrap()
            .and_utc()
            .timestamp_nanos_opt()
            .unwrap();
        assert_eq!(fix.t, expected_t);
    }

    #[test]
    fn corrupted_checksum_rejected() {
        let bad = GGA.replace("*47", "*00");
        assert!(matches!(
            parse_nmea(&bad, date()),
            Err(NmeaError::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn unknown_sentence_type_with_valid_checksum() {
        let payload = "GPXYZ,1,2,3";
        let line = format!("${payload}*{:02X}", checksum(payload));
        assert_eq!(
            parse_nmea(&line, date()),
            Err(NmeaError::UnsupportedSentence("XYZ".into()))
        );
    }

    #[test]
    fn rmc_supplies_speed_and_date() {
        let fix = parse_nmea(RMC, date()).unwrap();
        assert!((fix.speed_mps.unwrap() - 22.4 * 0.514444444444444).abs() < 1e-9);
        assert_eq!(fix.quality, 1);
        // date comes from the sentence itself: 1994-03-23
        let expected_t = chrono::NaiveDate::from_ymd_opt(1994, 3, 23)
            .unwrap()
            .and_hms_opt(12, 35, 19)
            .unwrap()
            .and_utc()
            .timestamp_nanos_opt()
            .unwrap();
        assert_eq!(fix.t, expected_t);
    }

    #[test]
    fn southern_western_hemispheres_are_negative() {
        let payload = "GPGGA,000001,2218.000,S,04312.000,W,1,05,1.1,10.0,M,0.0,M,,";
        let line = format!("${payload}*{:02X}", checksum(payload));
        let fix = parse_nmea(&line, date()).unwrap();
        assert!(fix.lat < 0.0 && fix.lon < 0.0);
        assert!((fix.lat + (22.0 + 18.0 / 60.0)).abs() < 1e-12);
    }

    #[test]
    fn malformed_field_names_the_index() {
        let payload = "GPGGA,123519,notalat,N,01131.000,E,1,08,0.9,545.4,M,46.9,M,,";
        let line = format!("${payload}*{:02X}", checksum(payload));
        match parse_nmea(&line, date()) {
            Err(NmeaError::MalformedField { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn decoder_carries_rmc_date_to_gga() {
        let mut decoder = NmeaDecoder::new(date());
        decoder.push(RMC).unwrap();
        let fix = decoder.push(GGA).unwrap();
        let expected_t = chrono::NaiveDate::from_ymd_opt(1994, 3, 23)
            .unwrap()
            .and_hms_opt(12, 35, 19)
            .unwrap()
            .and_utc()
            .timestamp_nanos_opt()
            .unwrap();
        assert_eq!(fix.t, expected_t);
        assert!(decoder.last_speed_mps().is_some());
    }

    #[test]
    fn single_byte_flips_never_pass_checksum() {
        // Small deterministic corpus here; the large randomized fuzz lives
        // in the acceptance suite.
        let payload = "GPGGA,123519,4807.038,N,01131.000,E,1,08,0.9,545.4,M,46.9,M,,";
        for i in 0..payload.len() {
            let mut corrupted = payload.as_bytes().to_vec();
            corrupted[i] ^= 0x01;
            let Ok(text) = String::from_utf8(corrupted) else {
                continue;
            };
            let line = format!("${text}*47");
            assert!(
                parse_nmea(&line, date()).is_err(),
                "flip at {i} was accepted"
            );
        }
    }
}
