use std::path::Path;

use chrono::{DateTime, Datelike, NaiveDateTime, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HOURS_PER_YEAR: usize = 8760;

/// One year of hourly weather at a location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherSeries {
    /// lon, lat
    pub location: Option<(f64, f64)>,
    /// Height of the wind speed measurement in m.
    pub reference_height: f64,
    /// m/s
    pub wind_speed: Vec<f64>,
    /// W/m²
    pub ghi: Vec<f64>,
    /// °C
    pub air_temp: Vec<f64>,
    /// Degrees clockwise from north.
    pub wind_direction: Option<Vec<f64>>,
}

pub const DEFAULT_REFERENCE_HEIGHT: f64 = 100.0;

impl WeatherSeries {
    pub fn validate(&self) -> Result<()> {
        let n = HOURS_PER_YEAR;
        let lens = [self.wind_speed.len(), self.ghi.len(), self.air_temp.len()];
        if lens.iter().any(|&l| l != n) || self.wind_direction.as_ref().is_some_and(|d| d.len() != n) {
            return Err(Error::Data(format!("weather series must have {n} hourly values")));
        }
        if let Some(i) = self.wind_speed.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Data(format!("hour {i}: wind speed must be finite and >= 0")));
        }
        if let Some(i) = self.ghi.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Data(format!("hour {i}: ghi must be finite and >= 0")));
        }
        if let Some(i) = self.air_temp.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("hour {i}: air temperature must be finite")));
        }
        if !(self.reference_height > 0.0) {
            return Err(Error::Data("reference height must be positive".into()));
        }
        Ok(())
    }
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc).naive_utc());
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s.trim_end_matches('Z'), f).ok())
}

fn parse_num(field: &str, line: usize, name: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Data(format!("weather line {line}: bad {name} value {field:?}")))
}

/// Reads `timestamp,wind_speed,wind_dir,ghi,temp` for one civil year of
/// gap-free hourly UTC timestamps. In leap years 29 February is dropped so
/// every series has 8760 values. An empty `wind_dir` column means no
/// direction data.
pub fn read_weather_csv(path: impl AsRef<Path>, reference_height: f64) -> Result<WeatherSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    parse_weather_csv(file, reference_height)
}

pub fn parse_weather_csv(reader: impl std::io::Read, reference_height: f64) -> Result<WeatherSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let expected = ["timestamp", "wind_speed", "wind_dir", "ghi", "temp"];
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("weather CSV is missing column {name:?}")))
    };
    let idx: Vec<usize> = expected.iter().map(|n| col(n)).collect::<Result<_>>()?;

    let (mut ws, mut wd, mut ghi, mut temp) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut any_dir = false;
    let mut prev: Option<NaiveDateTime> = None;
    let mut year = None;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let ts = parse_timestamp(&rec[idx[0]])
            .ok_or_else(|| Error::Data(format!("weather line {line}: bad timestamp {:?}", &rec[idx[0]])))?;
        match prev {
            None => {
                if ts.month() != 1 || ts.day() != 1 || ts.hour() != 0 || ts.minute() != 0 {
                    return Err(Error::Data("weather series must start at 1 January 00:00 UTC".into()));
                }
                year = Some(ts.year());
            }
            Some(p) if ts - p != chrono::Duration::hours(1) => {
                return Err(Error::Data(format!("weather line {line}: timestamps are not hourly and gap-free")));
            }
            _ => {}
        }
        if Some(ts.year()) != year {
            return Err(Error::Data(format!("weather line {line}: series spans more than one year")));
        }
        prev = Some(ts);
        if ts.month() == 2 && ts.day() == 29 {
            continue;
        }
        ws.push(parse_num(&rec[idx[1]], line, "wind_speed")?);
        let dir = rec[idx[2]].trim();
        if dir.is_empty() {
            wd.push(f64::NAN);
        } else {
            any_dir = true;
            wd.push(parse_num(dir, line, "wind_dir")?);
        }
        ghi.push(parse_num(&rec[idx[3]], line, "ghi")?);
        temp.push(parse_num(&rec[idx[4]], line, "temp")?);
    }
    if ws.len() != HOURS_PER_YEAR {
        return Err(Error::Data(format!(
            "weather series covers {} hours, expected a full year",
            ws.len()
        )));
    }
    let series = WeatherSeries {
        location: None,
        reference_height,
        wind_speed: ws,
        ghi,
        air_temp: temp,
        wind_direction: if any_dir { Some(wd) } else { None },
    };
    series.validate()?;
    Ok(series)
}

/// Writes the series with timestamps for a non-leap `year`.
pub fn format_weather_csv(series: &WeatherSeries, year: i32) -> Result<String> {
    series.validate()?;
    let start = chrono::NaiveDate::from_ymd_opt(year, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .ok_or_else(|| Error::invalid(format!("bad year {year}")))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["timestamp", "wind_speed", "wind_dir", "ghi", "temp"])?;
    let mut t = start;
    for h in 0..HOURS_PER_YEAR {
        if t.month() == 2 && t.day() == 29 {
            t += chrono::Duration::days(1);
        }
        let dir = series
            .wind_direction
            .as_ref()
            .map(|d| d[h].to_string())
            .unwrap_or_default();
        w.write_record([
            t.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            series.wind_speed[h].to_string(),
            dir,
            series.ghi[h].to_string(),
            series.air_temp[h].to_string(),
        ])?;
        t += chrono::Duration::hours(1);
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}
