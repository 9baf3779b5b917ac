//! Trace CSV files: one row per solve step and tracked variable-state.

use std::io::{Read, Write};

use bcond_core::bounded::TraceRecord;
use bcond_core::concurrent::ConcurrentRun;
use bcond_core::{BeliefNetwork, VarId};
use thiserror::Error;

pub const TRACE_HEADER: [&str; 10] = [
    "step",
    "instance_index",
    "instance_w_upper",
    "evidence_epoch",
    "variable",
    "state",
    "lower",
    "upper",
    "width",
    "cumulative_work_units",
];

pub const CONCURRENT_HEADER: [&str; 13] = [
    "step",
    "analysis_id",
    "instance_index",
    "instance_w_upper",
    "evidence_epoch",
    "variable",
    "state",
    "lower",
    "upper",
    "width",
    "combined_lower",
    "combined_upper",
    "cumulative_work_units",
];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("trace has no `{0}` column")]
    MissingColumn(&'static str),
    #[error("row {row}: cannot parse `{value}` in column {column}")]
    BadValue {
        row: usize,
        column: &'static str,
        value: String,
    },
}

/// Rounds to 12 significant digits and prints the shortest form.
pub fn format_value(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("own output parses");
    let s = rounded.to_string();
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn wanted(targets: Option<&[VarId]>, v: VarId) -> bool {
    targets.is_none_or(|t| t.contains(&v))
}

pub fn write_trace<W: Write>(
    out: W,
    net: &BeliefNetwork,
    records: &[TraceRecord],
    targets: Option<&[VarId]>,
) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        for (v, ivs) in r.snapshot.tracked().filter(|(v, _)| wanted(targets, *v)) {
            let var = net.variable(v);
            for (k, iv) in ivs.iter().enumerate() {
                w.write_record([
                    r.step.to_string(),
                    r.instance.to_string(),
                    format_value(r.instance_w_upper),
                    r.epoch.to_string(),
                    var.name.clone(),
                    var.states[k].clone(),
                    format_value(iv.lower),
                    format_value(iv.upper),
                    format_value(iv.width()),
                    r.work_units.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One block per turn and analysis. `step` is the row sequence number, with
/// 0 for the starting snapshot; instance columns are empty for analyses
/// that did not solve in that row.
pub fn write_concurrent_trace<W: Write>(
    out: W,
    net: &BeliefNetwork,
    run: &ConcurrentRun,
    targets: Option<&[VarId]>,
) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CONCURRENT_HEADER)?;
    for (step, row) in run.rows.iter().enumerate() {
        for (a, snap) in row.snapshots.iter().enumerate() {
            let (inst, wu) = match (row.analysis, row.instance, row.instance_w_upper) {
                (Some(x), Some(i), Some(u)) if x == a => (i.to_string(), format_value(u)),
                _ => (String::new(), String::new()),
            };
            for (v, ivs) in snap.tracked().filter(|(v, _)| wanted(targets, *v)) {
                let var = net.variable(v);
                for (k, iv) in ivs.iter().enumerate() {
                    let c = row
                        .combined
                        .interval(v.0, k)
                        .expect("combined bounds share the tracked set");
                    w.write_record([
                        step.to_string(),
                        a.to_string(),
                        inst.clone(),
                        wu.clone(),
                        row.epoch.to_string(),
                        var.name.clone(),
                        var.states[k].clone(),
                        format_value(iv.lower),
                        format_value(iv.upper),
                        format_value(iv.width()),
                        format_value(c.lower),
                        format_value(c.upper),
                        row.work_units.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Largest width at each step of a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepWidth {
    pub step: usize,
    pub epoch: usize,
    pub width: f64,
}

/// Reads a trace and reduces it to the largest width per step, in file
/// order.
pub fn read_step_widths<R: Read>(input: R) -> Result<Vec<StepWidth>, TraceError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let col = |name: &'static str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or(TraceError::MissingColumn(name))
    };
    let (step_i, epoch_i, width_i) = (col("step")?, col("evidence_epoch")?, col("width")?);
    let mut out: Vec<StepWidth> = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize, column: &'static str| {
            let value = rec.get(i).unwrap_or("");
            value.parse::<f64>().map_err(|_| TraceError::BadValue {
                row: row + 1,
                column,
                value: value.to_string(),
            })
        };
        let step = field(step_i, "step")? as usize;
        let epoch = field(epoch_i, "evidence_epoch")? as usize;
        let width = field(width_i, "width")?;
        match out.last_mut() {
            Some(last) if last.step == step && last.epoch == epoch => {
                last.width = last.width.max(width);
            }
            _ => out.push(StepWidth { step, epoch, width }),
        }
    }
    Ok(out)
}

/// `(t, width)` points for the decay fit, where `t` counts solves within
/// an evidence epoch from 0. Epoch 0 (prior initialization) is skipped
/// unless it is the only one; `epoch` restricts to a single epoch.
pub fn decay_points(widths: &[StepWidth], epoch: Option<usize>) -> Vec<(f64, f64)> {
    let has_updates = widths.iter().any(|w| w.epoch > 0);
    let mut points = Vec::new();
    let mut current = None;
    let mut t = 0usize;
    for w in widths {
        let keep = match epoch {
            Some(e) => w.epoch == e,
            None => w.epoch > 0 || !has_updates,
        };
        if !keep {
            continue;
        }
        if current != Some(w.epoch) {
            current = Some(w.epoch);
            t = 0;
        }
        points.push((t as f64, w.width));
        t += 1;
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_value(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_value(0.5), "0.5");
        assert_eq!(format_value(1.0), "1");
        assert_eq!(format_value(0.0), "0");
        assert_eq!(format_value(-0.0), "0");
        assert_eq!(format_value(123456.7890123456), "123456.789012");
        assert_eq!(format_value(2.5e-15), "0.0000000000000025");
        assert_eq!(format_value(f64::INFINITY), "inf");
    }

    #[test]
    fn widths_and_points() {
        let csv =
            "step,evidence_epoch,width\n1,0,0.5\n1,0,0.7\n2,1,0.4\n3,1,0.2\n3,1,0.3\n4,2,0.9\n";
        let w = read_step_widths(csv.as_bytes()).unwrap();
        assert_eq!(w.len(), 4);
        assert_eq!(w[0].width, 0.7);
        assert_eq!(w[2].width, 0.3);
        assert_eq!(
            decay_points(&w, None),
            vec![(0.0, 0.4), (1.0, 0.3), (0.0, 0.9)]
        );
        assert_eq!(decay_points(&w, Some(0)), vec![(0.0, 0.7)]);
        assert!(read_step_widths("a,b\n1,2\n".as_bytes()).is_err());
    }
}
