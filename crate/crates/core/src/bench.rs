//! Run-time projections and surrogate-versus-oracle timing.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::oracle::{simulate_sweep, DeviceParams, OracleConfig, SweepCurve};
use crate::surrogate::SurrogateModel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Best,
    Average,
    Worst,
    Measured,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Best => "best",
            Scenario::Average => "average",
            Scenario::Worst => "worst",
            Scenario::Measured => "measured",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeProjection {
    pub cycle_time_s: f64,
    pub n_cycles: u64,
    pub total_s: f64,
    pub scenario: Scenario,
}

/// `cycle_time_s · n_cycles`. Zero cycles are allowed and give zero.
pub fn project_time(cycle_time_s: f64, n_cycles: u64, scenario: Scenario) -> Result<TimeProjection> {
    if !(cycle_time_s >= 0.0 && cycle_time_s.is_finite()) {
        return Err(Error::domain(format!(
            "cycle time must be a non-negative number of seconds, got {cycle_time_s}"
        )));
    }
    Ok(TimeProjection {
        cycle_time_s,
        n_cycles,
        total_s: cycle_time_s * n_cycles as f64,
        scenario,
    })
}

impl TimeProjection {
    pub fn human(&self) -> String {
        human_duration(self.total_s)
    }
}

/// Seconds below a minute, whole minutes below an hour, whole hours below a
/// day, whole days above.
pub fn human_duration(seconds: f64) -> String {
    if seconds < 60.0 {
        format!("{} s", trim_float(seconds))
    } else if seconds < 3600.0 {
        format!("{} min", (seconds / 60.0).round())
    } else if seconds < 86_400.0 {
        format!("{} h", (seconds / 3600.0).round())
    } else {
        format!("{} days", (seconds / 86_400.0).round())
    }
}

fn trim_float(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else if x.abs() < 0.01 {
        format!("{x:.3e}")
    } else {
        format!("{x:.3}")
    }
}

/// Phase-field cycle times and cycle counts used for the built-in table.
///
/// The average cycle time is derived from a total of roughly 157 days over
/// 447 cycles.
pub const PHASE_FIELD_PRESET: [(Scenario, f64, u64); 3] = [
    (Scenario::Best, 942.0, 1),
    (Scenario::Average, 30_346.0, 447),
    (Scenario::Worst, 63_350.0, 1000),
];

pub fn phase_field_preset() -> Vec<TimeProjection> {
    PHASE_FIELD_PRESET
        .iter()
        .map(|&(s, t, n)| project_time(t, n, s).expect("preset constants are valid"))
        .collect()
}

/// One table row per projection: `scenario  cycle_time_s  n_cycles  total_s  human`.
pub fn render_projections(rows: &[TimeProjection]) -> String {
    let mut out = String::from("scenario  cycle_time_s  n_cycles  total_s  approx\n");
    for r in rows {
        out.push_str(&format!(
            "{}  {}  {}  {}  {}\n",
            r.scenario,
            trim_float(r.cycle_time_s),
            r.n_cycles,
            trim_float(r.total_s),
            r.human()
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    /// Median seconds per sweep over repeats.
    pub surrogate_s: f64,
    pub oracle_s: f64,
    /// `oracle_s / surrogate_s`.
    pub ratio: f64,
    pub repeats: usize,
    pub devices: usize,
    pub points_per_sweep: f64,
}

impl SpeedupReport {
    pub fn render(&self) -> String {
        format!(
            "surrogate_s_per_sweep: {:.3e}\noracle_s_per_sweep: {:.3e}\nspeedup_ratio: {:.3}\nrepeats: {}\ndevices: {}\nmean_points_per_sweep: {:.1}\n",
            self.surrogate_s, self.oracle_s, self.ratio, self.repeats, self.devices, self.points_per_sweep
        )
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Times full sweeps of every device with the oracle and with the surrogate
/// on the same `(v, dir)` grids, `repeats` times, and reports per-sweep
/// medians.
pub fn measure_speedup(
    model: &SurrogateModel,
    oracle: &OracleConfig,
    v_step: f64,
    params: &[DeviceParams],
    repeats: usize,
) -> Result<SpeedupReport> {
    if params.is_empty() {
        return Err(Error::domain("measure_speedup needs at least one device"));
    }
    if repeats == 0 {
        return Err(Error::domain("repeats must be at least 1"));
    }
    let grids: Vec<SweepCurve> = params
        .iter()
        .map(|&p| simulate_sweep(p, oracle, v_step))
        .collect::<Result<_>>()?;
    let n = params.len() as f64;
    let mut oracle_t = Vec::with_capacity(repeats);
    let mut surrogate_t = Vec::with_capacity(repeats);
    let mut sink = 0.0;
    for _ in 0..repeats {
        let start = Instant::now();
        for &p in params {
            sink += simulate_sweep(p, oracle, v_step)?.points[0].p;
        }
        oracle_t.push(start.elapsed().as_secs_f64() / n);

        let start = Instant::now();
        for (p, g) in params.iter().zip(&grids) {
            sink += model.predict_sweep(*p, g)?.points[0].p;
        }
        surrogate_t.push(start.elapsed().as_secs_f64() / n);
    }
    std::hint::black_box(sink);
    let oracle_s = median(oracle_t);
    let surrogate_s = median(surrogate_t);
    Ok(SpeedupReport {
        surrogate_s,
        oracle_s,
        ratio: oracle_s / surrogate_s.max(f64::MIN_POSITIVE),
        repeats,
        devices: params.len(),
        points_per_sweep: grids.iter().map(|g| g.len() as f64).sum::<f64>() / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::Normalization;

    #[test]
    fn worst_case_is_733_days() {
        let p = project_time(63_350.0, 1000, Scenario::Worst).unwrap();
        assert_eq!(p.total_s, 63_350_000.0);
        assert_eq!(p.human(), "733 days");
    }

    #[test]
    fn best_case_is_16_minutes() {
        let p = project_time(942.0, 1, Scenario::Best).unwrap();
        assert_eq!(p.total_s, 942.0);
        assert_eq!(p.human(), "16 min");
    }

    #[test]
    fn average_case_is_157_days() {
        let p = phase_field_preset()[1];
        assert_eq!(p.scenario, Scenario::Average);
        assert_eq!(p.human(), "157 days");
    }

    #[test]
    fn zero_cycles_is_zero() {
        let p = project_time(1.0, 0, Scenario::Measured).unwrap();
        assert_eq!(p.total_s, 0.0);
        assert_eq!(p.human(), "0 s");
        assert!(project_time(-1.0, 3, Scenario::Measured).is_err());
        assert!(project_time(f64::NAN, 3, Scenario::Measured).is_err());
    }

    #[test]
    fn human_units() {
        assert_eq!(human_duration(2.5), "2.500 s");
        assert_eq!(human_duration(7200.0), "2 h");
        assert_eq!(human_duration(0.0012), "1.200e-3 s");
    }

    #[test]
    fn table_lists_every_row() {
        let t = render_projections(&phase_field_preset());
        assert_eq!(t.lines().count(), 4);
        assert!(t.contains("worst  63350  1000  63350000  733 days"));
        assert!(t.contains("best  942  1  942  16 min"));
    }

    #[test]
    fn speedup_report_is_finite() {
        let norm = Normalization {
            input_mean: vec![0.0, 0.0, 1.25, 8.0],
            input_std: vec![1.5, 1.0, 0.45, 4.0],
            output_mean: vec![0.0],
            output_std: vec![10.0],
        };
        let model = SurrogateModel::new(&[4, 8, 1], norm, 0).unwrap();
        let params = [DeviceParams::new(0.5, 2.0).unwrap()];
        let r = measure_speedup(&model, &OracleConfig::default(), 0.1, &params, 1).unwrap();
        assert!(r.ratio.is_finite() && r.ratio > 0.0);
        assert!(r.surrogate_s < 1.0);
        assert_eq!(r.repeats, 1);
        assert!(measure_speedup(&model, &OracleConfig::default(), 0.1, &[], 1).is_err());
    }
}
