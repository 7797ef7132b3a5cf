use super::geometry::{covering_radius, dist2, Ball};
use crate::error::{Error, Result};
use crate::spectral_field::{FieldSample, Lattice};
use serde::Serialize;
use std::collections::{BTreeMap, HashSet};

/// Dyadic cubes `∏[k_j 2^{−q}, (k_j + 1) 2^{−q}]` of one order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubeFamily {
    pub order: u32,
    pub indices: Vec<Vec<i64>>,
    pub region_lo: Vec<f64>,
    pub region_hi: Vec<f64>,
    /// Whether the family claims to cover the region.
    pub is_cover: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CubeCheck {
    pub distinct: bool,
    pub covers_region: bool,
}

fn index_range(lo: f64, hi: f64, order: u32) -> (i64, i64) {
    let scale = (order as f64).exp2();
    ((lo * scale).floor() as i64, ((hi * scale).ceil() as i64).max((lo * scale).floor() as i64 + 1))
}

impl CubeFamily {
    /// Every cube of order `q` meeting `∏[lo_j, hi_j]`.
    pub fn covering(lo: &[f64], hi: &[f64], order: u32) -> Result<Self> {
        check_box(lo, hi)?;
        let ranges: Vec<(i64, i64)> = lo.iter().zip(hi).map(|(&a, &b)| index_range(a, b, order)).collect();
        let mut indices = vec![Vec::new()];
        for &(a, b) in &ranges {
            indices = indices
                .into_iter()
                .flat_map(|prefix: Vec<i64>| {
                    (a..b).map(move |k| {
                        let mut v = prefix.clone();
                        v.push(k);
                        v
                    })
                })
                .collect();
        }
        Ok(CubeFamily { order, indices, region_lo: lo.to_vec(), region_hi: hi.to_vec(), is_cover: true })
    }

    pub fn side(&self) -> f64 {
        (-(self.order as f64)).exp2()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn cube_bounds(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let s = self.side();
        let lo = self.indices[i].iter().map(|&k| k as f64 * s).collect();
        let hi = self.indices[i].iter().map(|&k| (k + 1) as f64 * s).collect();
        (lo, hi)
    }

    /// Distinct indices give non-overlapping interiors; a cover must contain
    /// every grid cube meeting the region.
    pub fn verify(&self) -> CubeCheck {
        let set: HashSet<&Vec<i64>> = self.indices.iter().collect();
        let distinct = set.len() == self.indices.len();
        let covers_region = match CubeFamily::covering(&self.region_lo, &self.region_hi, self.order) {
            Ok(full) => full.indices.iter().all(|k| set.contains(k)),
            Err(_) => false,
        };
        CubeCheck { distinct, covers_region }
    }
}

fn check_box(lo: &[f64], hi: &[f64]) -> Result<()> {
    if lo.is_empty() || lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a < b && a.is_finite() && b.is_finite())) {
        return Err(Error::domain("region bounds must satisfy lo < hi on every axis"));
    }
    Ok(())
}

/// The box must lie inside the lattice.
pub(crate) fn check_box_coverage(lattice: &Lattice, lo: &[f64], hi: &[f64]) -> Result<()> {
    check_box(lo, hi)?;
    if lo.len() != lattice.dim() {
        return Err(Error::domain(format!("region has dimension {} but the lattice has {}", lo.len(), lattice.dim())));
    }
    let slack = 1e-9 * lattice.spacing();
    for a in 0..lattice.dim() {
        if lattice.lo(a) > lo[a] + slack || lattice.hi(a) < hi[a] - slack {
            return Err(Error::domain(format!(
                "coverage violation: lattice axis {a} spans [{}, {}] but the region needs [{}, {}]",
                lattice.lo(a),
                lattice.hi(a),
                lo[a],
                hi[a]
            )));
        }
    }
    Ok(())
}

/// Region sites grouped by the dyadic cube of order `q` containing them.
/// Faces shared by two cubes go to the upper cube, except on the region's
/// upper face.
pub(crate) fn sites_by_cube(lattice: &Lattice, lo: &[f64], hi: &[f64], order: u32) -> BTreeMap<Vec<i64>, Vec<usize>> {
    let scale = (order as f64).exp2();
    let slack = 1e-9 * lattice.spacing();
    let ranges: Vec<(i64, i64)> = lo.iter().zip(hi).map(|(&a, &b)| index_range(a, b, order)).collect();
    let mut map: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for s in 0..lattice.len() {
        let t = lattice.point(s);
        if t.iter().zip(lo.iter().zip(hi)).any(|(x, (a, b))| *x < a - slack || *x > b + slack) {
            continue;
        }
        let key: Vec<i64> = t
            .iter()
            .zip(&ranges)
            .map(|(x, &(k0, k1))| ((x * scale).floor() as i64).clamp(k0, k1 - 1))
            .collect();
        map.entry(key).or_default().push(s);
    }
    map
}

/// Site nearest the cube centre (lowest index on ties).
pub(crate) fn net_site(lattice: &Lattice, key: &[i64], order: u32, sites: &[usize]) -> usize {
    let side = (-(order as f64)).exp2();
    let centre: Vec<f64> = key.iter().map(|&k| (k as f64 + 0.5) * side).collect();
    let mut best = sites[0];
    let mut best_d = f64::INFINITY;
    for &s in sites {
        let d = dist2(&lattice.point(s), &centre);
        if d < best_d {
            best_d = d;
            best = s;
        }
    }
    best
}

/// `max_{s,t ∈ sites} |X(s) − X(t)|²`.
pub(crate) fn squared_oscillation(field: &FieldSample, sites: &[usize]) -> f64 {
    if field.components == 1 {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &s in sites {
            let x = field.value(s, 0);
            lo = lo.min(x);
            hi = hi.max(x);
        }
        return (hi - lo) * (hi - lo);
    }
    let mut best = 0.0f64;
    for (i, &a) in sites.iter().enumerate() {
        let xa = field.site_values(a);
        for &b in &sites[i + 1..] {
            best = best.max(dist2(xa, field.site_values(b)));
        }
    }
    best
}

/// Cubes of order `ℓ` whose image leaves the excluded balls, with one image
/// ball `B(X(t_Q), r̂_Q)` each, `r̂_Q` being the observed oscillation on `Q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualCover {
    pub cubes: CubeFamily,
    pub net_sites: Vec<usize>,
    pub balls: Vec<Ball>,
    /// Number of cubes of order `ℓ` holding at least one region site.
    pub cubes_examined: usize,
}

fn check_resolution(lattice: &Lattice, order: u32) -> Result<()> {
    let side = (-(order as f64)).exp2();
    if side < 2.0 * lattice.spacing() {
        return Err(Error::domain(format!(
            "resolution violation: cube side 2^-{order} = {side} is below twice the lattice spacing {}",
            lattice.spacing()
        )));
    }
    Ok(())
}

pub fn residual_cover(field: &FieldSample, lo: &[f64], hi: &[f64], order: u32, excluded: &[Ball]) -> Result<ResidualCover> {
    let lattice = &field.lattice;
    check_box_coverage(lattice, lo, hi)?;
    check_resolution(lattice, order)?;
    if excluded.iter().any(|b| b.dim() != field.components) {
        return Err(Error::domain("excluded balls must live in the field's value space"));
    }
    let groups = sites_by_cube(lattice, lo, hi, order);
    let mut cubes = CubeFamily { order, indices: Vec::new(), region_lo: lo.to_vec(), region_hi: hi.to_vec(), is_cover: false };
    let mut net_sites = Vec::new();
    let mut balls = Vec::new();
    for (key, sites) in &groups {
        let escapes = sites
            .iter()
            .any(|&s| !excluded.iter().any(|b| b.contains_point(field.site_values(s))));
        if !escapes {
            continue;
        }
        let t_q = net_site(lattice, key, order, sites);
        let radius = covering_radius(squared_oscillation(field, sites)).max(f64::MIN_POSITIVE);
        cubes.indices.push(key.clone());
        net_sites.push(t_q);
        balls.push(Ball { center: field.site_values(t_q).to_vec(), radius });
    }
    cubes.is_cover = excluded.is_empty();
    Ok(ResidualCover { cubes, net_sites, balls, cubes_examined: groups.len() })
}

/// Oscillation of the field over the cubes of one order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillationPoint {
    pub order: u32,
    pub cubes: usize,
    pub max_oscillation: f64,
    pub mean_oscillation: f64,
}

pub fn oscillation_profile(field: &FieldSample, lo: &[f64], hi: &[f64], orders: &[u32]) -> Result<Vec<OscillationPoint>> {
    check_box_coverage(&field.lattice, lo, hi)?;
    orders
        .iter()
        .map(|&order| {
            check_resolution(&field.lattice, order)?;
            let groups = sites_by_cube(&field.lattice, lo, hi, order);
            let osc: Vec<f64> = groups.values().map(|s| squared_oscillation(field, s).sqrt()).collect();
            Ok(OscillationPoint {
                order,
                cubes: osc.len(),
                max_oscillation: osc.iter().copied().fold(0.0, f64::max),
                mean_oscillation: crate::stats::mean(&osc),
            })
        })
        .collect()
}
