//! Diagnostics CSV: fixed columns, one row per sample, flushed as written.

use std::io::Write;

use crate::diagnostics::DiagnosticsRow;
use crate::error::Result;

pub const CSV_COLUMNS: [&str; 18] = [
    "t", "E0", "Ehalf", "E1", "E2", "D0", "D1", "D2", "mean_u", "min_u", "max_u", "curl_norm", "div_q", "grad_q",
    "R_low", "R_1", "R_2", "flags",
];

/// Shortest round-tripping scientific notation, so output is reproducible
/// bit for bit and parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

pub fn csv_header() -> String {
    CSV_COLUMNS.join(",")
}

pub fn csv_line(r: &DiagnosticsRow) -> String {
    let vals = [
        r.t, r.e0, r.e_half, r.e1, r.e2, r.d0, r.d1, r.d2, r.mean_u, r.min_u, r.max_u, r.curl_norm, r.div_q_norm,
        r.grad_q_norm, r.r_low, r.r_1,
    ];
    let mut cells: Vec<String> = vals.iter().map(|&v| fmt_f64(v)).collect();
    cells.push(r.r_2.map(fmt_f64).unwrap_or_default());
    cells.push(r.flags.to_string());
    cells.join(",")
}

pub struct CsvWriter<W: Write> {
    out: W,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{}", csv_header())?;
        out.flush()?;
        Ok(CsvWriter { out })
    }

    pub fn write_row(&mut self, r: &DiagnosticsRow) -> Result<()> {
        writeln!(self.out, "{}", csv_line(r))?;
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::RowFlags;

    fn row() -> DiagnosticsRow {
        DiagnosticsRow {
            t: 0.5,
            step: 3,
            e0: 0.1,
            e_half: 0.2,
            e1: 0.3,
            e2: 0.4,
            d0: 1.0,
            d_half: 1.5,
            d1: 2.0,
            d2: 3.0,
            u_l2_sq: 0.0,
            u_h1_sq: 0.0,
            mean_u: 1.0,
            mean_q: vec![0.0],
            min_u: 0.9,
            max_u: 1.1,
            q_l2: 0.0,
            curl_norm: 0.0,
            div_q_norm: 0.25,
            grad_q_norm: 0.25,
            int_d0: 0.0,
            int_d1: 0.0,
            int_d2: 0.0,
            int_i: 0.0,
            int_j: 0.0,
            int_n2: 0.0,
            r_low: 1e-15,
            r_1: 2e-15,
            r_2: None,
            flags: RowFlags {
                blowup: true,
                negative_u: true,
            },
        }
    }

    #[test]
    fn header_and_row_shape() {
        let mut w = CsvWriter::new(Vec::new()).unwrap();
        w.write_row(&row()).unwrap();
        let text = String::from_utf8(w.into_inner()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,E0,Ehalf,E1,E2,D0,D1,D2,mean_u,min_u,max_u,curl_norm,div_q,grad_q,R_low,R_1,R_2,flags");
        let cells: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cells.len(), CSV_COLUMNS.len());
        assert_eq!(cells[0], "5e-1");
        assert_eq!(cells[16], "");
        assert_eq!(cells[17], "blowup;negative_u");
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1 + 0.2, 1e-300, -3.25, 0.0, 12345.678901234567] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
