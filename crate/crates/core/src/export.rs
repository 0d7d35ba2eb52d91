//! CSV writers (RFC 4180, `.` decimal, 17 significant digits). Structured
//! reports go through `serde_json` and carry `schema: 1`.

use std::io::{self, Write};

use crate::analysis::DecayScan;
use crate::integrator::SolutionTrace;

pub const TRACE_HEADER: &str = "xi,phi,dphi,y1,y2,R";
pub const POTENTIAL_HEADER: &str = "x,q,xi,V";
pub const OSCINT_HEADER: &str = "xi0,sup_partial_integral";

fn row<W: Write>(w: &mut W, vals: &[f64]) -> io::Result<()> {
    let cells: Vec<String> = vals.iter().map(|v| format!("{v:.16e}")).collect();
    writeln!(w, "{}", cells.join(","))
}

pub fn write_trace_csv<W: Write>(w: &mut W, trace: &SolutionTrace) -> io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for i in 0..trace.xi.len() {
        row(w, &[trace.xi[i], trace.phi[i], trace.dphi[i], trace.y1[i], trace.y2[i], trace.r[i]])?;
    }
    Ok(())
}

/// Rows `[x, q, ξ, V]` as produced by `Potential::samples`.
pub fn write_potential_csv<W: Write>(w: &mut W, samples: &[[f64; 4]]) -> io::Result<()> {
    writeln!(w, "{POTENTIAL_HEADER}")?;
    for s in samples {
        row(w, s)?;
    }
    Ok(())
}

pub fn write_oscint_csv<W: Write>(w: &mut W, scan: &DecayScan) -> io::Result<()> {
    writeln!(w, "{OSCINT_HEADER}")?;
    for (x, s) in scan.xi0.iter().zip(&scan.sup_partial) {
        row(w, &[*x, *s])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_csv_round_trips() {
        let rows = [[0.1, -2.5e-7, 1.0 / 3.0, 0.0], [1e5, 3.0, 2e7, -1.25]];
        let mut buf = Vec::new();
        write_potential_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(POTENTIAL_HEADER));
        for (line, r) in lines.zip(&rows) {
            let vals: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            assert_eq!(vals.as_slice(), r.as_slice());
        }
    }

    #[test]
    fn oscint_header() {
        let scan = DecayScan { xi0: vec![1e2, 1e3], sup_partial: vec![0.5, 0.05], slope: -1.0 };
        let mut buf = Vec::new();
        write_oscint_csv(&mut buf, &scan).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("xi0,sup_partial_integral"));
        assert_eq!(text.lines().count(), 3);
    }
}
