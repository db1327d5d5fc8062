//! CSV writers. Reals are written with 17 significant digits so that files
//! round-trip to the same `f64` bits.

use std::io::{self, Write};

use crate::functional::{FtleRecord, IntegrabilityReport};
use crate::integrate::Trajectory;
use crate::poincare::ScalingRow;

/// 17 significant digits, scientific notation.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trajectory_header(dim: usize) -> String {
    if dim == 4 {
        "t,x1,y1,x2,y2".to_string()
    } else {
        std::iter::once("t".to_string())
            .chain((0..dim).map(|i| format!("u{i}")))
            .collect::<Vec<_>>()
            .join(",")
    }
}

pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &Trajectory) -> io::Result<()> {
    let dim = traj.states.first().map_or(0, Vec::len);
    writeln!(w, "{}", trajectory_header(dim))?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let mut line = fmt_real(*t);
        for x in s {
            line.push(',');
            line.push_str(&fmt_real(*x));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub const FTLE_HEADER: &str = "index,x1_0,y1_0,x2_0,y2_0,rho0,lambda_max,escaped,regular";

pub fn write_ftle_csv<W: Write>(mut w: W, records: &[FtleRecord]) -> io::Result<()> {
    writeln!(w, "{FTLE_HEADER}")?;
    for r in records {
        let coords: Vec<String> = r.u0.iter().map(|x| fmt_real(*x)).collect();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.index,
            coords.join(","),
            fmt_real(r.rho0),
            fmt_real(r.lambda_max),
            u8::from(r.escaped),
            u8::from(r.regular)
        )?;
    }
    Ok(())
}

pub const SWEEP_HEADER: &str = "alpha,m_rho,n_regular,n_escaped";

pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[(f64, IntegrabilityReport)]) -> io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for (alpha, r) in rows {
        writeln!(w, "{},{},{},{}", fmt_real(*alpha), fmt_real(r.m_rho), r.n_regular, r.n_escaped)?;
    }
    Ok(())
}

pub fn poincare_header(angles: usize) -> String {
    let mut cols = vec!["epsilon".to_string(), "map_I".to_string()];
    cols.extend((1..=angles).map(|i| format!("map_theta{i}")));
    cols.push("oracle_I".to_string());
    cols.extend((1..=angles).map(|i| format!("oracle_theta{i}")));
    cols.push("error".to_string());
    cols.join(",")
}

pub fn write_poincare_csv<W: Write>(mut w: W, rows: &[ScalingRow]) -> io::Result<()> {
    let angles = rows.first().map_or(0, |r| r.map.angles.len());
    writeln!(w, "{}", poincare_header(angles))?;
    for r in rows {
        let mut cols = vec![fmt_real(r.epsilon), fmt_real(r.map.action)];
        cols.extend(r.map.angles.iter().map(|x| fmt_real(*x)));
        cols.push(fmt_real(r.oracle.action));
        cols.extend(r.oracle.angles.iter().map(|x| fmt_real(*x)));
        cols.push(fmt_real(r.error));
        writeln!(w, "{}", cols.join(","))?;
    }
    Ok(())
}
