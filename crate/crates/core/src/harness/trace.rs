//! Per-high-level-step records and the CSV writer.

use std::io::{self, Write};

use nalgebra::{Vector3, Vector4};

use crate::model::{Vector6, NUM_QUADS};

/// Bits of [`TraceRecord::sat_flags`]: bit `i` (0..3) is set when module
/// `i` clamped a propeller at its latest low-level tick.
pub const SAT_ALLOCATION_CONSTRAINED: u32 = 1 << 4;
/// An allocated module thrust exceeded `4·t_max` and was clamped.
pub const SAT_THRUST_COMMAND: u32 = 1 << 5;
/// The allocator QP did not return an optimal point.
pub const SAT_QP_NOT_OPTIMAL: u32 = 1 << 6;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceRecord {
    pub t: f64,
    pub xi: Vector3<f64>,
    pub eta: Vector3<f64>,
    pub xi_r: Vector3<f64>,
    pub eta_r: Vector3<f64>,
    /// Hinge angles.
    pub alpha: Vector4<f64>,
    /// Module thrusts from the allocator, before any clamping.
    pub thrust_alloc: Vector4<f64>,
    pub alpha_alloc: Vector4<f64>,
    /// Propeller thrusts `props[i][j]` of module `i`.
    pub props: [Vector4<f64>; NUM_QUADS],
    pub mx_dist: f64,
    pub mz_dist: f64,
    pub mx_aux: Vector3<f64>,
    pub mz_aux: Vector3<f64>,
    pub sat_flags: u32,
    pub u_d: Vector6,
    /// Position error norm against the reference.
    pub pos_err: f64,
    /// Geodesic attitude error in rad.
    pub att_err: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub ll_steps: usize,
    pub ll_saturated_steps: usize,
    pub duration: f64,
}

pub fn csv_header() -> String {
    let mut cols: Vec<String> =
        ["t", "x", "y", "z", "phi", "theta", "psi", "xd", "yd", "zd"].iter().map(|s| s.to_string()).collect();
    cols.extend((0..4).map(|i| format!("alpha{i}")));
    cols.extend((0..4).map(|i| format!("T{i}")));
    for i in 0..4 {
        cols.extend((0..4).map(|j| format!("t{i}{j}")));
    }
    cols.push("Mx_dist".into());
    cols.push("Mz_dist".into());
    cols.extend((0..3).map(|i| format!("Mx_aux{i}")));
    cols.extend((0..3).map(|i| format!("Mz_aux{i}")));
    cols.push("sat_flags".into());
    cols.extend((0..6).map(|i| format!("ud{i}")));
    cols.join(",")
}

fn push_num(line: &mut String, v: f64) {
    use std::fmt::Write as _;
    let _ = write!(line, ",{v:.8e}");
}

pub fn csv_row(r: &TraceRecord) -> String {
    let mut line = format!("{:.8e}", r.t);
    for v in r.xi.iter().chain(r.eta.iter()).chain(r.xi_r.iter()) {
        push_num(&mut line, *v);
    }
    for v in r.alpha.iter().chain(r.thrust_alloc.iter()) {
        push_num(&mut line, *v);
    }
    for p in &r.props {
        for v in p.iter() {
            push_num(&mut line, *v);
        }
    }
    push_num(&mut line, r.mx_dist);
    push_num(&mut line, r.mz_dist);
    for v in r.mx_aux.iter().chain(r.mz_aux.iter()) {
        push_num(&mut line, *v);
    }
    line.push_str(&format!(",{}", r.sat_flags));
    for v in r.u_d.iter() {
        push_num(&mut line, *v);
    }
    line
}

impl Trace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", csv_header())?;
        for r in &self.records {
            writeln!(w, "{}", csv_row(r))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}
