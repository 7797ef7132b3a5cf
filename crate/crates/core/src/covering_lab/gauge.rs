use crate::error::{Error, Result};
use crate::stats::neumaier_sum;
use crate::variance_model::{phi_gauge, FieldParams};
use serde::Serialize;
use std::io::Write;

/// Identifier of the gauge used in every report.
pub const GAUGE_ID: &str = "phi(r) = r^d (log 1/r)^(1 - gamma d) log log log (1/r)";

/// Radii of one family of covering balls.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaugeFamily {
    pub label: String,
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaugePart {
    pub label: String,
    pub count: usize,
    /// `Σ φ(2r)` over the family.
    pub sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaugeReport {
    pub gauge: &'static str,
    pub parts: Vec<GaugePart>,
    pub total: f64,
    pub ladder: Vec<f64>,
}

/// Radii `r` for which `φ(2r)` is undefined.
pub fn gauge_domain_violations(radii: &[f64], params: &FieldParams) -> Vec<f64> {
    radii.iter().copied().filter(|&r| phi_gauge(2.0 * r, params).is_err()).collect()
}

/// `Σ φ(2 r_A)` per family and in total.
pub fn gauge_sum(families: &[GaugeFamily], params: &FieldParams, ladder: &[f64]) -> Result<GaugeReport> {
    let bad: Vec<f64> = families.iter().flat_map(|f| gauge_domain_violations(&f.radii, params)).collect();
    if !bad.is_empty() {
        return Err(Error::domain(format!("gauge undefined at 2r for radii {bad:?}")));
    }
    let parts: Vec<GaugePart> = families
        .iter()
        .map(|f| GaugePart {
            label: f.label.clone(),
            count: f.radii.len(),
            sum: neumaier_sum(f.radii.iter().map(|&r| phi_gauge(2.0 * r, params).expect("checked above"))),
        })
        .collect();
    let total = neumaier_sum(parts.iter().map(|p| p.sum));
    Ok(GaugeReport { gauge: GAUGE_ID, parts, total, ladder: ladder.to_vec() })
}

/// CSV with header `family,radius,phi_2r`. Radii outside the gauge domain
/// are omitted so every cell is a finite number.
pub fn write_gauge_csv<W: Write>(w: W, families: &[GaugeFamily], params: &FieldParams) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(["family", "radius", "phi_2r"])?;
    for f in families {
        for &r in &f.radii {
            if let Ok(phi) = phi_gauge(2.0 * r, params) {
                out.write_record([f.label.clone(), r.to_string(), phi.to_string()])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
