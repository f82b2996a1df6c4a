//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Every key must be one
//! of [`KEYS`]; values are parsed lazily by the command that uses them.

use crate::CliError;
use hilbert_core::{parse_body_id, ConvexBody, Point, Precision};
use std::collections::BTreeMap;
use std::str::FromStr;

pub const KEYS: &[&str] = &[
    "body", "suite", "seed", "precision", "out", "x", "y", "xplus", "v", "times", "pairs", "germ", "matrix",
    "radii", "samples", "scenario", "angles",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut c = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", i + 1)))?;
            c.set(k.trim(), v.trim())?;
        }
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !KEYS.contains(&key) {
            return Err(CliError::Config(format!("unknown key '{key}'")));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Canonical text: sorted `key = value` lines.
    pub fn canonical(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn parsed<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| CliError::Config(format!("bad value for {key}: '{v}'"))),
        }
    }

    pub fn precision(&self) -> Result<Precision, CliError> {
        match self.get("precision") {
            None => Ok(Precision::Double),
            Some(v) => v.parse().map_err(|_| CliError::Config(format!("bad precision '{v}'"))),
        }
    }

    pub fn body(&self, default: &str) -> Result<ConvexBody, CliError> {
        let id = self.get("body").unwrap_or(default);
        parse_body_id(id).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn point(&self, key: &str) -> Result<Option<Point>, CliError> {
        self.get(key).map(|v| parse_point(key, v)).transpose()
    }

    /// `start:stop:step`, inclusive of `stop` up to rounding.
    pub fn range(&self, key: &str, default: (f64, f64, f64)) -> Result<Vec<f64>, CliError> {
        let (a, b, h) = match self.get(key) {
            None => default,
            Some(v) => {
                let p: Vec<f64> = v
                    .split(':')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| CliError::Config(format!("bad range for {key}: '{v}'")))?;
                if p.len() != 3 || !(p[2] > 0.0) || p[1] < p[0] {
                    return Err(CliError::Config(format!("bad range for {key}: '{v}'")));
                }
                (p[0], p[1], p[2])
            }
        };
        let n = ((b - a) / h + 1e-9).floor() as usize;
        Ok((0..=n).map(|k| a + h * k as f64).collect())
    }

    pub fn list(&self, key: &str) -> Vec<String> {
        self.get(key)
            .map(|v| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
            .unwrap_or_default()
    }
}

fn parse_point(key: &str, v: &str) -> Result<Point, CliError> {
    let xs: Vec<f64> = v
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Config(format!("bad vector for {key}: '{v}'")))?;
    Ok(Point::from_vec(xs))
}

/// Rows separated by `;`, entries by `,`.
pub fn parse_matrix(v: &str) -> Result<nalgebra::DMatrix<f64>, CliError> {
    let bad = || CliError::Config(format!("bad matrix '{v}'"));
    let rows: Vec<Vec<f64>> = v
        .split(';')
        .map(|r| r.split(',').map(|s| s.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(bad());
    }
    Ok(nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_rejected() {
        assert!(matches!(Config::parse("bodyy = disc"), Err(CliError::Config(_))));
    }

    #[test]
    fn comments_and_ranges() {
        let c = Config::parse("# note\nbody = disc\n\ntimes = 0:1:0.25\n").unwrap();
        assert_eq!(c.range("times", (0.0, 0.0, 1.0)).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(c.canonical(), "body = disc\ntimes = 0:1:0.25\n");
    }

    #[test]
    fn matrices() {
        let m = parse_matrix("8,0,0; 0,2,0; 0,0,1").unwrap();
        assert_eq!(m[(0, 0)], 8.0);
        assert!(parse_matrix("1,2;3").is_err());
    }
}
