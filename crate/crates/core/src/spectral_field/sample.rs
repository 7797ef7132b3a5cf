use super::lattice::Lattice;
use crate::error::{Error, Result};
use crate::variance_model::{FieldParams, Hurst};
use std::io::{Read, Write};

/// Frequency band `a ≤ |ξ| < b` with `0 ≤ a < b ≤ ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    lo: f64,
    hi: f64,
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && lo.is_finite() && hi > lo) {
            return Err(Error::domain(format!("invalid band [{lo}, {hi})")));
        }
        Ok(Band { lo, hi })
    }

    pub fn full() -> Self {
        Band { lo: 0.0, hi: f64::INFINITY }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }
    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_full(&self) -> bool {
        self.lo == 0.0 && self.hi == f64::INFINITY
    }

    /// Whether a spectral cell `[lo, hi)` lies inside the band.
    pub fn contains_cell(&self, lo: f64, hi: f64) -> bool {
        lo >= self.lo && hi <= self.hi
    }
}

/// `d`-component field values on a lattice, stored site-major
/// (`values[site * d + component]`).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub params: FieldParams,
    pub lattice: Lattice,
    pub components: usize,
    pub values: Vec<f64>,
    pub seed: u64,
    pub band: Option<Band>,
}

const MAGIC: &[u8; 5] = b"CFLD1";

impl FieldSample {
    pub fn new(
        params: FieldParams,
        lattice: Lattice,
        components: usize,
        values: Vec<f64>,
        seed: u64,
        band: Option<Band>,
    ) -> Result<Self> {
        if values.len() != lattice.len() * components {
            return Err(Error::domain("value count does not match lattice size times components"));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::numerical(format!("non-finite field value at flat index {bad}")));
        }
        Ok(FieldSample { params, lattice, components, values, seed, band })
    }

    #[inline]
    pub fn value(&self, site: usize, component: usize) -> f64 {
        self.values[site * self.components + component]
    }

    #[inline]
    pub fn site_values(&self, site: usize) -> &[f64] {
        &self.values[site * self.components..(site + 1) * self.components]
    }

    /// Values of one component across all sites.
    pub fn component(&self, component: usize) -> Vec<f64> {
        self.values.iter().skip(component).step_by(self.components).copied().collect()
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let p = &self.params;
        w.write_all(MAGIC)?;
        put_u32(&mut w, p.n() as u32)?;
        put_u32(&mut w, p.d() as u32)?;
        put_f64(&mut w, p.h())?;
        let (num, den) = p.hurst().ratio().unwrap_or((0, 0));
        put_u64(&mut w, num)?;
        put_u64(&mut w, den)?;
        put_f64(&mut w, p.gamma())?;
        put_f64(&mut w, p.delta0())?;
        let l = &self.lattice;
        put_u32(&mut w, l.dim() as u32)?;
        put_f64(&mut w, l.spacing())?;
        for axis in 0..l.dim() {
            put_f64(&mut w, l.lo(axis))?;
            put_f64(&mut w, l.hi(axis))?;
        }
        put_u64(&mut w, self.seed)?;
        match self.band {
            Some(b) => {
                w.write_all(&[1])?;
                put_f64(&mut w, b.lo())?;
                put_f64(&mut w, b.hi())?;
            }
            None => {
                w.write_all(&[0])?;
                put_f64(&mut w, 0.0)?;
                put_f64(&mut w, f64::INFINITY)?;
            }
        }
        put_u32(&mut w, self.components as u32)?;
        put_u64(&mut w, self.values.len() as u64)?;
        for v in &self.values {
            put_f64(&mut w, *v)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("missing CFLD1 magic".into()));
        }
        let n = get_u32(&mut r)? as usize;
        let d = get_u32(&mut r)? as usize;
        let h = get_f64(&mut r)?;
        let num = get_u64(&mut r)?;
        let den = get_u64(&mut r)?;
        let gamma = get_f64(&mut r)?;
        let delta0 = get_f64(&mut r)?;
        let hurst = if den == 0 { Hurst::float(h)? } else { Hurst::rational(num, den)? };
        let params = FieldParams::new(n, d, hurst, gamma, delta0)?;
        let dim = get_u32(&mut r)? as usize;
        let spacing = get_f64(&mut r)?;
        let mut lo = Vec::with_capacity(dim);
        let mut hi = Vec::with_capacity(dim);
        for _ in 0..dim {
            lo.push(get_f64(&mut r)?);
            hi.push(get_f64(&mut r)?);
        }
        let lattice = Lattice::new(lo, hi, spacing)?;
        let seed = get_u64(&mut r)?;
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let a = get_f64(&mut r)?;
        let b = get_f64(&mut r)?;
        let band = if flag[0] == 1 { Some(Band::new(a, b)?) } else { None };
        let components = get_u32(&mut r)? as usize;
        let count = get_u64(&mut r)? as usize;
        if count != lattice.len() * components {
            return Err(Error::Format("value count does not match header".into()));
        }
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            values.push(get_f64(&mut r)?);
        }
        FieldSample::new(params, lattice, components, values, seed, band)
    }

    /// CSV with columns `t0..t{N-1}, x0..x{d-1}`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        let dim = self.lattice.dim();
        let header: Vec<String> = (0..dim)
            .map(|a| format!("t{a}"))
            .chain((0..self.components).map(|c| format!("x{c}")))
            .collect();
        out.write_record(&header)?;
        for site in 0..self.lattice.len() {
            let row: Vec<String> = self
                .lattice
                .point(site)
                .into_iter()
                .chain(self.site_values(site).iter().copied())
                .map(|v| v.to_string())
                .collect();
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}
fn put_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}
fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}
fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let p = FieldParams::new(2, 3, Hurst::rational(1, 3).unwrap(), 0.25, 0.5).unwrap();
        let l = Lattice::cube(2, -0.5, 0.5, 0.25).unwrap();
        let values: Vec<f64> = (0..l.len() * 3).map(|i| (i as f64).sin()).collect();
        let s = FieldSample::new(p, l, 3, values, 99, Some(Band::new(2.0, 64.0).unwrap())).unwrap();
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..5], b"CFLD1");
        let back = FieldSample::read_binary(&buf[..]).unwrap();
        assert_eq!(back, s);
        assert!(FieldSample::read_binary(&b"XXXXX"[..]).is_err());
    }

    #[test]
    fn csv_has_coordinates_then_components() {
        let p = FieldParams::new(1, 2, Hurst::float(0.5).unwrap(), 0.0, 0.5).unwrap();
        let l = Lattice::new(vec![0.0], vec![1.0], 0.5).unwrap();
        let s = FieldSample::new(p, l, 2, vec![0.0, 0.0, 1.5, -2.0, 0.25, 3.0], 1, None).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "t0,x0,x1\n0,0,0\n0.5,1.5,-2\n1,0.25,3\n");
    }
}
