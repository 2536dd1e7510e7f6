//! Sweep tables and their CSV / JSON encodings.
//!
//! Floats are written with 17 significant digits in scientific notation, so a
//! table read back from CSV is bit-identical to the JSON variant.

use serde::{Deserialize, Serialize};

use crate::floquet_pt::PerturbationResult;
use crate::phase::{PhaseRecord, PhaseZero};
use crate::spectrum::{GapEvent, Parity};
use crate::{Error, Result};

pub const SCHEMA: &str = "ohphase-sweep/1";
pub const CSV_HEADER: &str =
    "omega_r_rad_s,state_index,M_times_2,parity,energy_joule,total_phase_rad,dynamical_phase_rad,geometric_phase_rad";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub omega_r: f64,
    pub state_index: usize,
    pub m_times_2: i8,
    pub parity: Parity,
    pub energy: f64,
    pub total_phase: f64,
    pub dynamical_phase: f64,
    pub geometric_phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub omega_r: f64,
    pub steps: usize,
    pub identity_defect: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtSummary {
    /// Flags and values with the printed electric denominator.
    pub printed: PerturbationResult,
    /// Order-two value with the denominator of the explicit sum.
    pub corrected_order2_phase: f64,
    /// Exact adiabatic phase of `(3/2, f)` relative to both cone angles zero.
    pub exact_offset_phase: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Annotations {
    pub state_zeros: Vec<PhaseZero>,
    pub pair_zeros: Vec<PhaseZero>,
    pub gap_events: Vec<GapEvent>,
    pub warnings: Vec<String>,
    /// `2ω_L cosθ_m` for pure magnetic protocols with `θ_m < π/2`.
    pub critical_rate_closed_form: Option<f64>,
    /// Largest `|Δγ − M·Δγ_B/M|` against the pure magnetic closed form with
    /// the same `B` and `θ_m`.
    pub max_closed_form_deviation: Option<f64>,
    pub oracle: Vec<OracleCheck>,
    pub perturbation: Option<PtSummary>,
    /// Set when tracking stopped early; the rows end at the last linked point.
    pub breakdown: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema: String,
    pub rows: Vec<SweepRow>,
    pub annotations: Annotations,
}

/// One row per state per record, sorted by `(ω_r, state index)`.
pub fn rows_from_phases(records: &[PhaseRecord]) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = records
        .iter()
        .flat_map(|r| {
            r.states.iter().map(move |s| SweepRow {
                omega_r: r.omega_r,
                state_index: s.label.index(),
                m_times_2: s.label.m_times_2,
                parity: s.label.parity,
                energy: s.energy,
                total_phase: s.total_phase,
                dynamical_phase: s.dynamical_phase,
                geometric_phase: s.geometric_phase,
            })
        })
        .collect();
    rows.sort_by(|a, b| a.omega_r.total_cmp(&b.omega_r).then(a.state_index.cmp(&b.state_index)));
    rows
}

impl SweepReport {
    pub fn new(rows: Vec<SweepRow>, annotations: Annotations) -> Self {
        Self { schema: SCHEMA.to_string(), rows, annotations }
    }

    pub fn rows_csv(&self) -> String {
        write_csv(&self.rows)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("sweep json: {e}")))?;
        if r.schema != SCHEMA {
            return Err(Error::InvalidParameter(format!("unsupported schema '{}'", r.schema)));
        }
        Ok(r)
    }

    pub fn annotations_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.annotations).expect("annotations serialize");
        s.push('\n');
        s
    }
}

pub fn write_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("# schema: {SCHEMA}\n{CSV_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.omega_r,
            r.state_index,
            r.m_times_2,
            r.parity.as_str(),
            r.energy,
            r.total_phase,
            r.dynamical_phase,
            r.geometric_phase
        ));
    }
    out
}

fn csv_error(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::InvalidParameter(format!("sweep csv line {line}: {msg}"))
}

pub fn read_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == format!("# schema: {SCHEMA}") => {}
        _ => return Err(csv_error(1, format!("expected '# schema: {SCHEMA}'"))),
    }
    match lines.next() {
        Some((_, l)) if l.trim() == CSV_HEADER => {}
        _ => return Err(csv_error(2, "unexpected header")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(csv_error(n, format!("expected 8 fields, found {}", f.len())));
        }
        let num = |k: usize| f[k].parse::<f64>().map_err(|e| csv_error(n, e));
        let parity = match f[3] {
            "e" => Parity::E,
            "f" => Parity::F,
            other => return Err(csv_error(n, format!("parity '{other}'"))),
        };
        rows.push(SweepRow {
            omega_r: num(0)?,
            state_index: f[1].parse().map_err(|e| csv_error(n, e))?,
            m_times_2: f[2].parse().map_err(|e| csv_error(n, e))?,
            parity,
            energy: num(4)?,
            total_phase: num(5)?,
            dynamical_phase: num(6)?,
            geometric_phase: num(7)?,
        });
    }
    Ok(rows)
}

/// gnuplot script plotting the geometric phase of every state from `csv_name`.
pub fn gnuplot_script(csv_name: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set xlabel 'omega_r (rad/s)'\n\
         set ylabel 'geometric phase (rad)'\n\
         set key outside\n\
         plot for [k=0:7] '{csv_name}' skip 2 using ($2 == k ? $1 : 1/0):8 with lines title sprintf('state %d', k)\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<SweepRow> {
        vec![SweepRow {
            omega_r: 1.234_567_890_123_456_7e9,
            state_index: 7,
            m_times_2: 3,
            parity: Parity::F,
            energy: -3.3e-25,
            total_phase: 0.1 + 0.2,
            dynamical_phase: -1.0 / 3.0,
            geometric_phase: f64::MIN_POSITIVE,
        }]
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = sample();
        let text = write_csv(&rows);
        assert!(text.starts_with("# schema: ohphase-sweep/1\nomega_r_rad_s,"));
        assert_eq!(read_csv(&text).unwrap(), rows);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let r = SweepReport::new(sample(), Annotations::default());
        assert_eq!(SweepReport::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn rejects_foreign_csv() {
        assert!(read_csv("a,b\n").is_err());
        let bad = write_csv(&sample()).replace(",f,", ",g,");
        assert!(read_csv(&bad).is_err());
    }
}
