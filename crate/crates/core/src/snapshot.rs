//! Binary state files: one JSON header line, then the physical-space
//! values of `u` followed by each `q` component as little-endian `f64`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Kinetics, State};
use crate::error::{Error, Result};
use crate::spectral::{Grid, Transform, VectorField};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format_version: u32,
    pub d: usize,
    pub n: usize,
    pub alpha: f64,
    pub t: f64,
    pub kinetics: Kinetics,
    pub field_order: Vec<String>,
}

fn field_order(d: usize) -> Vec<String> {
    let mut v = vec!["u".to_string(), "q_x".to_string()];
    if d == 2 {
        v.push("q_y".to_string());
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    /// Node values, field by field in `field_order`, row-major in 2-D.
    pub data: Vec<f64>,
}

impl Snapshot {
    pub fn from_state(s: &State, alpha: f64, kinetics: Kinetics) -> Result<Self> {
        let grid = s.grid();
        let mut tr = Transform::new(grid);
        let mut data = tr.inverse(&s.u)?;
        for c in s.q.components() {
            data.extend(tr.inverse(c)?);
        }
        Ok(Snapshot {
            header: SnapshotHeader {
                format_version: FORMAT_VERSION,
                d: grid.dim(),
                n: grid.n(),
                alpha,
                t: s.t,
                kinetics,
                field_order: field_order(grid.dim()),
            },
            data,
        })
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.header.d, self.header.n)
    }

    pub fn to_state(&self) -> Result<State> {
        let grid = self.grid()?;
        let mut tr = Transform::new(grid);
        let mut chunks = self.data.chunks_exact(grid.len());
        let mut next = || chunks.next().ok_or_else(|| Error::Snapshot("truncated payload".into()));
        let u = tr.forward(next()?)?;
        let mut comps = Vec::with_capacity(grid.dim());
        for _ in 0..grid.dim() {
            comps.push(tr.forward(next()?)?);
        }
        State::new(self.header.t, u, VectorField::new(comps)?)
    }

    fn validate(&self) -> Result<()> {
        let h = &self.header;
        if h.format_version != FORMAT_VERSION {
            return Err(Error::Snapshot(format!("unsupported format_version {}", h.format_version)));
        }
        let grid = self.grid().map_err(|e| Error::Snapshot(e.to_string()))?;
        if h.field_order != field_order(h.d) {
            return Err(Error::Snapshot(format!("unexpected field_order {:?}", h.field_order)));
        }
        let expected = (1 + h.d) * grid.len();
        if self.data.len() != expected {
            return Err(Error::Snapshot(format!(
                "payload holds {} values, header implies {expected}",
                self.data.len()
            )));
        }
        Ok(())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        self.validate()?;
        let header = serde_json::to_string(&self.header).map_err(|e| Error::Snapshot(e.to_string()))?;
        w.write_all(header.as_bytes())?;
        w.write_all(b"\n")?;
        let mut bytes = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut line = Vec::new();
        r.read_until(b'\n', &mut line)?;
        if line.last() != Some(&b'\n') {
            return Err(Error::Snapshot("missing header line".into()));
        }
        line.pop();
        let header: SnapshotHeader =
            serde_json::from_slice(&line).map_err(|e| Error::Snapshot(format!("bad header: {e}")))?;
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        if payload.len() % 8 != 0 {
            return Err(Error::Snapshot(format!("payload of {} bytes is not a whole number of f64", payload.len())));
        }
        let data = payload
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
            .collect();
        let snap = Snapshot { header, data };
        snap.validate()?;
        Ok(snap)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralField;

    fn sample_state(dim: usize) -> State {
        let g = Grid::new(dim, 16).unwrap();
        let u = SpectralField::from_fn(g, |x| 1.0 + 0.3 * (x[0] + 2.0 * x[1]).cos());
        let phi = SpectralField::from_fn(g, |x| (x[0] - x[1]).sin());
        State::new(0.25, u, phi.gradient()).unwrap()
    }

    #[test]
    fn payload_layout() {
        for dim in [1, 2] {
            let s = sample_state(dim);
            let snap = Snapshot::from_state(&s, 1.5, Kinetics::Quadratic).unwrap();
            let mut bytes = Vec::new();
            snap.write_to(&mut bytes).unwrap();
            let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
            let n_d = 16usize.pow(dim as u32);
            assert_eq!(bytes.len() - nl - 1, (1 + dim) * n_d * 8);
            let header: serde_json::Value = serde_json::from_slice(&bytes[..nl]).unwrap();
            assert_eq!(header["format_version"], 1);
            assert_eq!(header["kinetics"], "quadratic");
            // First payload value is u at the first node.
            let first = f64::from_le_bytes(bytes[nl + 1..nl + 9].try_into().unwrap());
            let x0 = -std::f64::consts::PI;
            let expected = 1.0 + 0.3 * (x0 + if dim == 2 { 2.0 * x0 } else { 0.0 }).cos();
            assert!((first - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn round_trip_bit_exact() {
        let s = sample_state(2);
        let snap = Snapshot::from_state(&s, 2.0, Kinetics::Linear).unwrap();
        let mut bytes = Vec::new();
        snap.write_to(&mut bytes).unwrap();
        let back = Snapshot::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, snap);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(again, bytes);
        let st = back.to_state().unwrap();
        assert_eq!(st.t, 0.25);
        assert!(st.u.max_coeff_diff(&s.u).unwrap() < 1e-14);
    }

    #[test]
    fn rejects_truncated_and_bad_header() {
        let snap = Snapshot::from_state(&sample_state(1), 1.0, Kinetics::Quadratic).unwrap();
        let mut bytes = Vec::new();
        snap.write_to(&mut bytes).unwrap();
        bytes.truncate(bytes.len() - 8);
        assert!(matches!(Snapshot::read_from(bytes.as_slice()), Err(Error::Snapshot(_))));
        assert!(Snapshot::read_from(&b"{\"format_version\":1}\n"[..]).is_err());
        assert!(Snapshot::read_from(&b"no newline"[..]).is_err());
    }
}
