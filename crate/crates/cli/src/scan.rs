//! Simplex grid scans of ergotropy and metrotropy.

use std::io::{self, Write};

use anyhow::{bail, Result};
use metrotropy::{ergotropy, metrotropy_matching, StationarySystem};
use serde::ser::{Serialize, SerializeMap, Serializer};

/// Rows with `|W − 2M|` below this are flagged as having an involutive
/// ergotropy permutation.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub populations: Vec<f64>,
    pub ergotropy: f64,
    pub metrotropy: f64,
    /// `W/2 − M`.
    pub half_gap: f64,
    pub sigma_w_involutive: bool,
}

impl Serialize for ScanRow {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.populations.len() + 4))?;
        for (k, r) in self.populations.iter().enumerate() {
            map.serialize_entry(&format!("r{k}"), r)?;
        }
        map.serialize_entry("ergotropy", &self.ergotropy)?;
        map.serialize_entry("metrotropy", &self.metrotropy)?;
        map.serialize_entry("half_gap", &self.half_gap)?;
        map.serialize_entry("sigma_w_involutive", &self.sigma_w_involutive)?;
        map.end()
    }
}

/// Number of grid intervals for `step`, which must divide 1 within `1e-12`.
pub fn subdivisions(step: f64) -> Result<usize> {
    if !(step > 0.0 && step <= 1.0) {
        bail!("step {step} must lie in (0, 1]");
    }
    let n = (1.0 / step).round();
    if (n * step - 1.0).abs() > 1e-12 {
        bail!("step {step} does not divide 1");
    }
    Ok(n as usize)
}

/// Grid points `(i_0/n, …, i_{N−1}/n)` with non-negative integer `i_k`
/// summing to `n`, in lexicographic order of `(i_0, i_1, …)`.
pub fn simplex_grid(levels: usize, n: usize) -> Vec<Vec<f64>> {
    fn rec(levels: usize, remaining: usize, n: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if prefix.len() + 1 == levels {
            prefix.push(remaining);
            out.push(prefix.iter().map(|&i| i as f64 / n as f64).collect());
            prefix.pop();
            return;
        }
        for i in 0..=remaining {
            prefix.push(i);
            rec(levels, remaining - i, n, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if levels > 0 {
        rec(levels, n, n, &mut Vec::new(), &mut out);
    }
    out
}

/// One row for the given populations.
pub fn scan_point(energies: &[f64], populations: Vec<f64>) -> Result<ScanRow> {
    let sys = StationarySystem::new(energies.to_vec(), populations)?;
    let erg = ergotropy(&sys);
    let met = metrotropy_matching(&sys);
    let (w, m) = (erg.value, met.value);
    Ok(ScanRow {
        populations: sys.populations().to_vec(),
        ergotropy: w,
        metrotropy: m,
        half_gap: w / 2.0 - m,
        sigma_w_involutive: erg.optimal_permutation.is_involution() || (w - 2.0 * m).abs() < TIE_TOL,
    })
}

/// Evaluates every grid point of the population simplex.
pub fn scan(energies: &[f64], step: f64) -> Result<Vec<ScanRow>> {
    if energies.len() < 2 {
        bail!("a scan needs at least two energy levels");
    }
    let n = subdivisions(step)?;
    simplex_grid(energies.len(), n).into_iter().map(|r| scan_point(energies, r)).collect()
}

pub fn csv_header(levels: usize) -> String {
    let mut cols: Vec<String> = (0..levels).map(|k| format!("r{k}")).collect();
    cols.extend(["ergotropy", "metrotropy", "half_gap", "sigma_w_involutive"].map(String::from));
    cols.join(",")
}

/// 17 significant digits, enough to reproduce every `f64` exactly.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(rows: &[ScanRow], levels: usize, out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "{}", csv_header(levels))?;
    for row in rows {
        let mut fields: Vec<String> = row.populations.iter().map(|&r| format_float(r)).collect();
        fields.push(format_float(row.ergotropy));
        fields.push(format_float(row.metrotropy));
        fields.push(format_float(row.half_gap));
        fields.push(if row.sigma_w_involutive { "1" } else { "0" }.into());
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}
