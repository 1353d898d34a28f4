use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Vehicle {
    Ship,
    Quad,
}

impl Vehicle {
    pub fn state_names(self) -> &'static [&'static str] {
        match self {
            Vehicle::Ship => &["u", "w", "p", "r", "phi"],
            Vehicle::Quad => &["vx", "vy", "vz", "p", "q", "r"],
        }
    }

    pub fn pose_names(self) -> &'static [&'static str] {
        match self {
            Vehicle::Ship => &["x", "y", "phi", "psi"],
            Vehicle::Quad => &["x", "y", "z", "phi", "theta", "psi"],
        }
    }

    pub fn state_dim(self) -> usize {
        self.state_names().len()
    }

    pub fn control_dim(self) -> usize {
        4
    }

    pub fn pose_dim(self) -> usize {
        self.pose_names().len()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Vehicle::Ship => "ship",
            Vehicle::Quad => "quad",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "ship" => Some(Vehicle::Ship),
            "quad" => Some(Vehicle::Quad),
            _ => None,
        }
    }

    /// Episode-file columns after `t`.
    fn columns(self) -> Vec<String> {
        let mut cols: Vec<String> = match self {
            Vehicle::Ship => ["u", "w", "p", "r", "phi", "x", "y", "psi"].iter().map(|s| s.to_string()).collect(),
            Vehicle::Quad => ["vx", "vy", "vz", "p", "q", "r", "x", "y", "z", "phi", "theta", "psi"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        };
        cols.extend((1..=self.control_dim()).map(|k| format!("c{k}")));
        cols
    }
}

/// Time-aligned states, controls and poses of one simulation run.
///
/// `controls[t]` is the command applied over `[t, t+1)`; all three sequences
/// have the same length.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub vehicle: Vehicle,
    pub seed: u64,
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub poses: Vec<Vec<f64>>,
}

/// Nine significant digits, scientific notation.
pub fn fmt_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

impl Episode {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Domain(format!("episode dt must be positive, got {}", self.dt)));
        }
        if self.states.len() != self.controls.len() || self.states.len() != self.poses.len() {
            return Err(Error::Dimension(format!(
                "episode sequences differ in length: {} states, {} controls, {} poses",
                self.states.len(),
                self.controls.len(),
                self.poses.len()
            )));
        }
        let v = self.vehicle;
        let bad = self.states.iter().any(|s| s.len() != v.state_dim())
            || self.controls.iter().any(|c| c.len() != v.control_dim())
            || self.poses.iter().any(|p| p.len() != v.pose_dim());
        if bad {
            return Err(Error::Dimension("episode row width does not match vehicle".into()));
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# seed={}", self.seed);
        let _ = writeln!(out, "# dt={}", self.dt);
        let _ = writeln!(out, "# vehicle={}", self.vehicle.as_str());
        let _ = writeln!(out, "t,{}", self.vehicle.columns().join(","));
        for i in 0..self.len() {
            let mut row = vec![fmt_sig9(i as f64 * self.dt)];
            row.extend(self.states[i].iter().map(|&x| fmt_sig9(x)));
            match self.vehicle {
                Vehicle::Ship => {
                    let p = &self.poses[i];
                    row.extend([p[0], p[1], p[3]].iter().map(|&x| fmt_sig9(x)));
                }
                Vehicle::Quad => row.extend(self.poses[i].iter().map(|&x| fmt_sig9(x))),
            }
            row.extend(self.controls[i].iter().map(|&x| fmt_sig9(x)));
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let mut seed = None;
        let mut dt = None;
        let mut vehicle = None;
        let mut rows = Vec::new();
        let mut saw_header = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let (k, v) = meta
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| Error::format(path, format!("line {}: malformed header", lineno + 1)))?;
                match k.trim() {
                    "seed" => seed = v.trim().parse::<u64>().ok(),
                    "dt" => dt = v.trim().parse::<f64>().ok(),
                    "vehicle" => vehicle = Vehicle::parse(v),
                    other => return Err(Error::format(path, format!("unknown header key `{other}`"))),
                }
                continue;
            }
            if !saw_header {
                saw_header = true;
                let v = vehicle.ok_or_else(|| Error::format(path, "missing `# vehicle=` header"))?;
                let expected = format!("t,{}", v.columns().join(","));
                let got: String = line.split(',').map(|s| s.trim()).collect::<Vec<_>>().join(",");
                if got != expected {
                    return Err(Error::format(path, format!("column header `{line}` != `{expected}`")));
                }
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            rows.push(vals.map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 1)))?);
        }
        let vehicle = vehicle.ok_or_else(|| Error::format(path, "missing `# vehicle=` header"))?;
        let seed = seed.ok_or_else(|| Error::format(path, "missing `# seed=` header"))?;
        let dt = dt.ok_or_else(|| Error::format(path, "missing `# dt=` header"))?;
        let ns = vehicle.state_dim();
        let width = 1 + vehicle.columns().len();
        let mut ep = Episode { vehicle, seed, dt, states: vec![], controls: vec![], poses: vec![] };
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != width {
                return Err(Error::format(path, format!("row {i} has {} columns, expected {width}", r.len())));
            }
            let state = r[1..1 + ns].to_vec();
            let (pose, ctrl_start) = match vehicle {
                Vehicle::Ship => (vec![r[6], r[7], r[5], r[8]], 9),
                Vehicle::Quad => (r[7..13].to_vec(), 13),
            };
            ep.states.push(state);
            ep.poses.push(pose);
            ep.controls.push(r[ctrl_start..].to_vec());
        }
        ep.validate()?;
        Ok(ep)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(vehicle: Vehicle) -> Episode {
        let n = 4;
        Episode {
            vehicle,
            seed: 42,
            dt: 0.5,
            states: (0..n).map(|i| (0..vehicle.state_dim()).map(|k| (i * 10 + k) as f64 * 0.1).collect()).collect(),
            controls: (0..n).map(|i| vec![0.5, 0.5, 0.01 * i as f64, -0.01]).collect(),
            poses: (0..n)
                .map(|i| {
                    let mut p: Vec<f64> = (0..vehicle.pose_dim()).map(|k| (i + k) as f64).collect();
                    if vehicle == Vehicle::Ship {
                        p[2] = (i * 10 + 4) as f64 * 0.1;
                    }
                    p
                })
                .collect(),
        }
    }

    #[test]
    fn csv_layout_is_fixed() {
        let csv = toy(Vehicle::Ship).to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# seed=42");
        assert_eq!(lines[1], "# dt=0.5");
        assert_eq!(lines[2], "# vehicle=ship");
        assert_eq!(lines[3], "t,u,w,p,r,phi,x,y,psi,c1,c2,c3,c4");
        assert!(lines[4].starts_with("0.00000000e0,"));
        let quad = toy(Vehicle::Quad).to_csv();
        assert!(quad.contains("t,vx,vy,vz,p,q,r,x,y,z,phi,theta,psi,c1,c2,c3,c4"));
    }

    #[test]
    fn csv_round_trip_to_nine_digits() {
        for v in [Vehicle::Ship, Vehicle::Quad] {
            let ep = toy(v);
            let back = Episode::from_csv(&ep.to_csv(), Path::new("mem")).unwrap();
            assert_eq!(back.len(), ep.len());
            for (a, b) in back.states.iter().flatten().zip(ep.states.iter().flatten()) {
                assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-300));
            }
            for (a, b) in back.poses.iter().flatten().zip(ep.poses.iter().flatten()) {
                assert!((a - b).abs() <= 1e-8 * b.abs());
            }
        }
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let mut ep = toy(Vehicle::Ship);
        ep.controls.pop();
        assert!(ep.validate().is_err());
    }

    #[test]
    fn bad_header_rejected() {
        let text = "# seed=1\n# dt=1\n# vehicle=ship\nt,u,w\n";
        assert!(matches!(Episode::from_csv(text, Path::new("x")), Err(Error::Format { .. })));
    }
}
