use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::fmt_sig9;
use crate::eval::{Evaluation, RelativeThreshold, SweepRow};

pub const REPORT_HEADER: &str = "metric,state,value,ci";

fn num(x: f64) -> String {
    if x.is_finite() {
        fmt_sig9(x)
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Long-format report: per-state RMSE, trajectory error with its 95% half-width, divergence
/// count and, for bounded models, the relative threshold per state.
pub fn report_csv(eval: &Evaluation, threshold: Option<&RelativeThreshold>) -> String {
    let names = eval.vehicle.state_names();
    let mut out = format!("{REPORT_HEADER}\n");
    for (n, v) in names.iter().zip(&eval.state_rmse) {
        out.push_str(&format!("state_rmse,{n},{},\n", num(*v)));
    }
    let pos = if super::position_dim(eval.vehicle) == 2 { "xy" } else { "xyz" };
    out.push_str(&format!("trajectory_rmse,{pos},{},{}\n", num(eval.trajectory.mean), num(eval.trajectory.ci95)));
    out.push_str(&format!("diverged_samples,all,{},\n", eval.diverged));
    out.push_str(&format!("samples,all,{},\n", eval.samples));
    if let Some(t) = threshold {
        for (n, v) in names.iter().zip(&t.per_state) {
            out.push_str(&format!("relative_threshold_percent,{n},{},\n", num(*v)));
        }
        out.push_str(&format!("relative_threshold_percent,all,{},\n", num(t.aggregate)));
    }
    out
}

/// Boxplot data: one row per sample and horizon segment.
pub fn per_minute_csv(eval: &Evaluation) -> String {
    let mut out = String::from("sample_id,minute,rmse\n");
    for (i, segs) in eval.trajectory.per_segment.iter().enumerate() {
        for (j, v) in segs.iter().enumerate() {
            out.push_str(&format!("{i},{},{}\n", j + 1, num(*v)));
        }
    }
    out
}

/// One row per sweep entry: mode, threshold, per-state RMSE, trajectory error, divergences.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let Some(first) = rows.first() else { return String::new() };
    let names = first.evaluation.vehicle.state_names();
    let mut out = String::from("mode,threshold_percent");
    for n in names {
        out.push_str(&format!(",rmse_{n}"));
    }
    out.push_str(",trajectory_rmse,trajectory_ci,diverged\n");
    for r in rows {
        out.push_str(&format!("{},{}", r.mode.as_str(), num(r.threshold)));
        for v in &r.evaluation.state_rmse {
            out.push_str(&format!(",{}", num(*v)));
        }
        let t = &r.evaluation.trajectory;
        out.push_str(&format!(",{},{},{}\n", num(t.mean), num(t.ci95), r.evaluation.diverged));
    }
    out
}

/// JSON summary of an evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub model: String,
    pub vehicle: String,
    pub samples: usize,
    pub diverged: usize,
    pub state_rmse: BTreeMap<String, f64>,
    pub normalized_rmse_sum: f64,
    pub trajectory_rmse: f64,
    pub trajectory_ci95: f64,
    pub relative_threshold_percent: Option<f64>,
}

impl EvalSummary {
    pub fn new(model: &str, eval: &Evaluation, state_std: &[f64], threshold: Option<&RelativeThreshold>) -> Self {
        let names = eval.vehicle.state_names();
        Self {
            model: model.into(),
            vehicle: eval.vehicle.as_str().into(),
            samples: eval.samples,
            diverged: eval.diverged,
            state_rmse: names.iter().zip(&eval.state_rmse).map(|(n, v)| (n.to_string(), *v)).collect(),
            normalized_rmse_sum: super::normalized_rmse_sum(&eval.state_rmse, state_std),
            trajectory_rmse: eval.trajectory.mean,
            trajectory_ci95: eval.trajectory.ci95,
            relative_threshold_percent: threshold.map(|t| t.aggregate),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Vehicle;
    use crate::eval::TrajectoryReport;

    fn toy() -> Evaluation {
        Evaluation {
            vehicle: Vehicle::Ship,
            samples: 2,
            diverged: 0,
            state_rmse: vec![0.5, 0.25, 0.125, 1.0, 2.0],
            trajectory: TrajectoryReport {
                mean: 3.0,
                ci95: 0.5,
                per_sample: vec![2.5, 3.5],
                per_segment: vec![vec![1.0, 4.0], vec![2.0, 5.0]],
            },
        }
    }

    #[test]
    fn report_schema_is_fixed() {
        let golden = "metric,state,value,ci
state_rmse,u,5.00000000e-1,
state_rmse,w,2.50000000e-1,
state_rmse,p,1.25000000e-1,
state_rmse,r,1.00000000e0,
state_rmse,phi,2.00000000e0,
trajectory_rmse,xy,3.00000000e0,5.00000000e-1
diverged_samples,all,0,
samples,all,2,
";
        assert_eq!(report_csv(&toy(), None), golden);
        let minutes = "sample_id,minute,rmse
0,1,1.00000000e0
0,2,4.00000000e0
1,1,2.00000000e0
1,2,5.00000000e0
";
        assert_eq!(per_minute_csv(&toy()), minutes);
    }

    #[test]
    fn summary_serializes_infinities_as_null() {
        let mut e = toy();
        e.trajectory.mean = f64::INFINITY;
        let s = EvalSummary::new("Lin-2P", &e, &[1.0; 5], None);
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"trajectory_rmse\":null"));
    }
}
