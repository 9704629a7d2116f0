use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::numerics::{CVector, TimeGrid};
use crate::propagation::csv_err;

/// Pauli expectation values along a two-level trajectory, with the unwrapped
/// azimuth about z and its least-squares rotation rate.
#[derive(Debug, Clone)]
pub struct BlochSeries {
    pub times: Vec<f64>,
    pub vectors: Vec<[f64; 3]>,
    pub azimuth: Vec<f64>,
    pub rate: f64,
}

pub fn bloch_vector(psi: &CVector) -> Result<[f64; 3]> {
    if psi.len() != 2 {
        return Err(Error::DimensionNotTwo(psi.len()));
    }
    let coherence = psi[0].conj() * psi[1];
    Ok([
        2.0 * coherence.re,
        2.0 * coherence.im,
        psi[0].norm_sqr() - psi[1].norm_sqr(),
    ])
}

pub fn bloch_series(grid: &TimeGrid, states: &[CVector]) -> Result<BlochSeries> {
    if states.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "{} states for {} nodes",
            states.len(),
            grid.len()
        )));
    }
    let vectors = states.iter().map(bloch_vector).collect::<Result<Vec<_>>>()?;
    let times = grid.times();
    let azimuth = unwrap(vectors.iter().map(|b| b[1].atan2(b[0])));
    let rate = least_squares_slope(&times, &azimuth);
    Ok(BlochSeries {
        times,
        vectors,
        azimuth,
        rate,
    })
}

fn unwrap(angles: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for a in angles {
        match out.last() {
            None => out.push(a),
            Some(&prev) => {
                let mut d = a - prev;
                d -= 2.0 * PI * (d / (2.0 * PI)).round();
                out.push(prev + d);
            }
        }
    }
    out
}

pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

impl BlochSeries {
    /// Columns: t, bx, by, bz, azimuth.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "bx", "by", "bz", "azimuth"]).map_err(csv_err)?;
        for ((t, b), phi) in self.times.iter().zip(&self.vectors).zip(&self.azimuth) {
            w.write_record([fmt_f64(*t), fmt_f64(b[0]), fmt_f64(b[1]), fmt_f64(b[2]), fmt_f64(*phi)])
                .map_err(csv_err)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidParameter(format!("write failed: {e}")))?;
        Ok(())
    }
}
