//! CSV ingestion for catalogs, spot-price traces and load-test exports.

use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDateTime};

use super::{Catalog, DomainError, InstanceTypeSpec, LoadSample, LoadTestSeries, NodeOverhead, PriceSeries};
use crate::scalar::Scalar;

const CATALOG_HEADER: [&str; 6] = ["name", "family", "vcpu", "mem_mib", "on_demand_usd_hr", "zones"];
const PRICE_HEADER: [&str; 4] = ["timestamp", "instance_type", "zone", "usd_per_hour"];
const LOADTEST_HEADER: [&str; 3] = ["rps", "cpu_percent", "failure_rate_percent"];

/// Reads every record of `text`, checking the header first. Yields
/// (1-based line number, trimmed fields).
fn records(text: &str, header: &[&str]) -> Result<Vec<(u64, Vec<String>)>, DomainError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    let mut saw_header = false;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            DomainError::parse(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let fields: Vec<String> = rec.iter().map(str::to_owned).collect();
        if !saw_header {
            if fields.iter().map(String::as_str).ne(header.iter().copied()) {
                return Err(DomainError::parse(
                    line,
                    format!("expected header `{}`", header.join(",")),
                ));
            }
            saw_header = true;
            continue;
        }
        if fields.len() != header.len() {
            return Err(DomainError::parse(
                line,
                format!("expected {} fields, found {}", header.len(), fields.len()),
            ));
        }
        rows.push((line, fields));
    }
    if !saw_header {
        return Err(DomainError::parse(1, "empty input"));
    }
    Ok(rows)
}

fn num<T: Scalar>(line: u64, field: &str, what: &str) -> Result<T, DomainError> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .and_then(T::from_f64)
        .ok_or_else(|| DomainError::parse(line, format!("invalid {what} '{field}'")))
}

fn int<N: std::str::FromStr>(line: u64, field: &str, what: &str) -> Result<N, DomainError> {
    field
        .parse::<N>()
        .map_err(|_| DomainError::parse(line, format!("invalid {what} '{field}'")))
}

/// Parses a catalog file (`name,family,vcpu,mem_mib,on_demand_usd_hr,zones`,
/// zones separated by `;`) with the default node overhead.
pub fn load_catalog<T: Scalar>(text: &str) -> Result<Catalog<T>, DomainError> {
    let rows = records(text, &CATALOG_HEADER)?;
    if rows.is_empty() {
        return Err(DomainError::parse(2, "catalog has no rows"));
    }
    let mut types = Vec::with_capacity(rows.len());
    for (line, f) in rows {
        types.push(InstanceTypeSpec {
            name: f[0].clone(),
            family: f[1].clone(),
            vcpu: int(line, &f[2], "vcpu")?,
            mem_mib: int(line, &f[3], "mem_mib")?,
            on_demand_usd_hr: num(line, &f[4], "on_demand_usd_hr")?,
            zones: f[5]
                .split(';')
                .map(|z| z.trim().to_owned())
                .filter(|z| !z.is_empty())
                .collect(),
        });
    }
    Catalog::new(types, NodeOverhead::default())
}

/// Parses an ISO-8601 UTC timestamp into unix seconds. Accepts RFC 3339
/// (`2024-03-01T12:00:00Z`, offsets allowed) and the naive forms
/// `2024-03-01T12:00:00` / `2024-03-01 12:00:00`, read as UTC.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|dt| dt.and_utc().timestamp())
}

/// Parses a spot-price trace. Rows are grouped by (type, zone); within a
/// group timestamps must strictly increase in file order. Groups are
/// returned sorted by (type, zone).
pub fn load_price_history<T: Scalar>(text: &str) -> Result<Vec<PriceSeries<T>>, DomainError> {
    let rows = records(text, &PRICE_HEADER)?;
    let mut groups: BTreeMap<(String, String), Vec<(i64, T)>> = BTreeMap::new();
    for (line, f) in rows {
        let ts = parse_timestamp(&f[0])
            .ok_or_else(|| DomainError::parse(line, format!("invalid timestamp '{}'", f[0])))?;
        let price: T = num(line, &f[3], "usd_per_hour")?;
        if !(price > T::zero()) {
            return Err(DomainError::validation(format!("line {line}: price must be > 0")));
        }
        let points = groups.entry((f[1].clone(), f[2].clone())).or_default();
        if let Some(&(prev, _)) = points.last() {
            if ts <= prev {
                return Err(DomainError::Ordering {
                    series: format!("{}/{}", f[1], f[2]),
                    timestamp: ts,
                    line,
                });
            }
        }
        points.push((ts, price));
    }
    groups
        .into_iter()
        .map(|((ty, zone), points)| PriceSeries::new(ty, zone, points))
        .collect()
}

/// Parses a load-test export (`rps,cpu_percent,failure_rate_percent`).
pub fn load_loadtest<T: Scalar>(text: &str) -> Result<LoadTestSeries<T>, DomainError> {
    let rows = records(text, &LOADTEST_HEADER)?;
    let samples = rows
        .into_iter()
        .map(|(line, f)| {
            Ok(LoadSample {
                rps: num(line, &f[0], "rps")?,
                cpu_percent: num(line, &f[1], "cpu_percent")?,
                failure_rate_percent: num(line, &f[2], "failure_rate_percent")?,
            })
        })
        .collect::<Result<Vec<_>, DomainError>>()?;
    LoadTestSeries::new(samples)
}
