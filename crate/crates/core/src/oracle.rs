//! Analytic hysteresis model standing in for phase-field device simulation.
//!
//! Each branch of the polarization–voltage loop is a saturating `tanh`
//! centred on the coercive voltage of the stack:
//!
//! ```text
//! V_c = e_c·t_fl + v_dl·t_dl
//! P_s = p_s0·t_fl / (t_fl + lambda·t_dl)
//! ascending:  p = P_s·tanh((v − V_c)/w)
//! descending: p = P_s·tanh((v + V_c)/w)
//! ```
//!
//! With quantization enabled, polarization snaps to multiples of `2·P_s/N_g`
//! where `N_g = max(4, round(grains_per_nm·t_fl))`, which gives thin films
//! the step-like switching of a device with few grains.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sweep voltage increment used throughout, in volts.
pub const DEFAULT_V_STEP: f64 = 0.1;

/// Layer thicknesses in nm: the design vector θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Dead (non-switching dielectric) layer thickness.
    pub t_dl: f64,
    /// Ferroelectric layer thickness.
    pub t_fl: f64,
}

impl DeviceParams {
    pub const DL_RANGE: (f64, f64) = (0.5, 2.0);
    pub const FL_RANGE: (f64, f64) = (2.0, 14.0);

    /// Creates params, rejecting values outside the supported thickness box.
    pub fn new(t_dl: f64, t_fl: f64) -> Result<Self> {
        let p = DeviceParams { t_dl, t_fl };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_range("t_dl", self.t_dl, Self::DL_RANGE)?;
        check_range("t_fl", self.t_fl, Self::FL_RANGE)
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.t_dl, self.t_fl]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        DeviceParams {
            t_dl: a[0],
            t_fl: a[1],
        }
    }
}

fn check_range(field: &str, value: f64, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo..=hi).contains(&value) {
        return Err(Error::domain(format!(
            "{field} = {value} nm is outside [{lo}, {hi}] nm"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Saturation polarization scale, μC/cm².
    pub p_s0: f64,
    /// Coercive field of the ferroelectric, V/nm.
    pub e_c: f64,
    /// Coercive penalty of the dead layer, V/nm.
    pub v_dl: f64,
    /// Switching softness, V.
    pub w: f64,
    /// Dead-layer depolarization factor.
    pub lambda: f64,
    pub grains_per_nm: f64,
    pub quantize: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            p_s0: 30.0,
            e_c: 0.1,
            v_dl: 0.8,
            w: 0.5,
            lambda: 4.0,
            grains_per_nm: 2.0,
            quantize: true,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        let scales = [
            ("p_s0", self.p_s0),
            ("e_c", self.e_c),
            ("v_dl", self.v_dl),
            ("w", self.w),
            ("lambda", self.lambda),
            ("grains_per_nm", self.grains_per_nm),
        ];
        for (name, v) in scales {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!(
                    "oracle parameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Coercive voltage without range checks on the thicknesses.
    pub fn coercive_voltage_at(&self, t_dl: f64, t_fl: f64) -> f64 {
        self.e_c * t_fl + self.v_dl * t_dl
    }

    /// Saturation polarization without range checks on the thicknesses.
    pub fn saturation_polarization_at(&self, t_dl: f64, t_fl: f64) -> f64 {
        self.p_s0 * t_fl / (t_fl + self.lambda * t_dl)
    }

    /// Number of grains switching independently in a film of `t_fl` nm.
    pub fn grain_count(&self, t_fl: f64) -> u32 {
        ((self.grains_per_nm * t_fl).round() as u32).max(4)
    }
}

/// Coercive voltage `V_c` of the stack, in volts.
pub fn coercive_voltage(params: DeviceParams, cfg: &OracleConfig) -> Result<f64> {
    params.validate()?;
    Ok(cfg.coercive_voltage_at(params.t_dl, params.t_fl))
}

/// Saturation polarization `P_s` of the stack, in μC/cm².
pub fn saturation_polarization(params: DeviceParams, cfg: &OracleConfig) -> Result<f64> {
    params.validate()?;
    Ok(cfg.saturation_polarization_at(params.t_dl, params.t_fl))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Down,
    Up,
}

impl Direction {
    /// `-1.0` for a falling sweep, `+1.0` for a rising one.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Down => -1.0,
            Direction::Up => 1.0,
        }
    }

    pub fn from_sign(s: i64) -> Option<Self> {
        match s {
            -1 => Some(Direction::Down),
            1 => Some(Direction::Up),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub v: f64,
    pub dir: Direction,
    pub p: f64,
}

/// One steady-state hysteresis loop for a device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub params: DeviceParams,
    pub points: Vec<SweepPoint>,
}

impl SweepCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn polarization(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.p).collect()
    }

    /// Copies this curve's voltage grid, replacing polarization with `p`.
    pub fn with_polarization(&self, params: DeviceParams, p: &[f64]) -> SweepCurve {
        debug_assert_eq!(p.len(), self.points.len());
        SweepCurve {
            params,
            points: self
                .points
                .iter()
                .zip(p)
                .map(|(pt, &p)| SweepPoint { p, ..*pt })
                .collect(),
        }
    }
}

/// Simulates the steady-state loop `+V_max → −V_max → +V_max`.
///
/// The initialization half-branch `0 → +V_max` is not stored. The descending
/// branch includes both turning points; the ascending branch starts one step
/// above `−V_max`, so the curve has `4·N + 1` points for `V_max = N·v_step`.
pub fn simulate_sweep(params: DeviceParams, cfg: &OracleConfig, v_step: f64) -> Result<SweepCurve> {
    if !(v_step > 0.0 && v_step.is_finite()) {
        return Err(Error::domain(format!("v_step must be positive, got {v_step}")));
    }
    params.validate()?;
    cfg.validate()?;

    let v_c = cfg.coercive_voltage_at(params.t_dl, params.t_fl);
    let p_s = cfg.saturation_polarization_at(params.t_dl, params.t_fl);
    // ceil-to-step, tolerant of representation error in (V_c + 3w)/v_step
    let steps = ((v_c + 3.0 * cfg.w) / v_step - 1e-9).ceil().max(1.0) as i64;
    let level = 2.0 * p_s / f64::from(cfg.grain_count(params.t_fl));

    let polarize = |v: f64, dir: Direction| {
        let offset = match dir {
            Direction::Up => -v_c,
            Direction::Down => v_c,
        };
        let p = p_s * ((v + offset) / cfg.w).tanh();
        if cfg.quantize {
            (p / level).round() * level
        } else {
            p
        }
    };

    let mut points = Vec::with_capacity(4 * steps as usize + 1);
    for k in (-steps..=steps).rev() {
        let v = k as f64 * v_step;
        points.push(SweepPoint {
            v,
            dir: Direction::Down,
            p: polarize(v, Direction::Down),
        });
    }
    for k in (1 - steps)..=steps {
        let v = k as f64 * v_step;
        points.push(SweepPoint {
            v,
            dir: Direction::Up,
            p: polarize(v, Direction::Up),
        });
    }
    Ok(SweepCurve { params, points })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use proptest::prelude::*;

    use super::*;

    fn thin() -> DeviceParams {
        DeviceParams::new(0.5, 2.0).unwrap()
    }

    fn smooth() -> OracleConfig {
        OracleConfig {
            quantize: false,
            ..OracleConfig::default()
        }
    }

    #[test]
    fn coercive_voltage_of_zero_stack_is_zero() {
        assert_eq!(OracleConfig::default().coercive_voltage_at(0.0, 0.0), 0.0);
    }

    #[test]
    fn coercive_voltage_thin_device() {
        let v = coercive_voltage(thin(), &OracleConfig::default()).unwrap();
        assert!((v - 0.6).abs() < 1e-12, "{v}");
    }

    #[test]
    fn coercive_voltage_grows_with_fl() {
        let cfg = OracleConfig::default();
        let thick = DeviceParams::new(0.5, 14.0).unwrap();
        assert!(coercive_voltage(thick, &cfg).unwrap() > coercive_voltage(thin(), &cfg).unwrap());
    }

    #[test]
    fn out_of_range_names_field() {
        let err = coercive_voltage(
            DeviceParams {
                t_dl: 0.5,
                t_fl: 20.0,
            },
            &OracleConfig::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("t_fl"), "{err}");
        let err = DeviceParams::new(3.0, 5.0).unwrap_err();
        assert!(err.to_string().contains("t_dl"), "{err}");
    }

    #[test]
    fn saturation_without_dead_layer_is_full_scale() {
        let cfg = OracleConfig::default();
        assert_eq!(cfg.saturation_polarization_at(0.0, 5.0), cfg.p_s0);
    }

    #[test]
    fn saturation_thin_device() {
        let p = saturation_polarization(thin(), &OracleConfig::default()).unwrap();
        assert!((p - 15.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_step() {
        let cfg = OracleConfig::default();
        assert!(simulate_sweep(thin(), &cfg, 0.0).is_err());
        assert!(simulate_sweep(thin(), &cfg, -0.1).is_err());
    }

    #[test]
    fn sweep_saturates_at_turning_points() {
        let cfg = smooth();
        let curve = simulate_sweep(DeviceParams::new(0.5, 14.0).unwrap(), &cfg, 0.1).unwrap();
        let p_s = cfg.saturation_polarization_at(0.5, 14.0);
        let v_max = curve.points[0].v;
        assert!(cfg.w <= v_max / 5.0);
        for pt in curve.points.iter().filter(|pt| (pt.v - v_max).abs() < 1e-12) {
            assert!((pt.p - p_s).abs() < 0.01 * p_s, "{pt:?}");
        }
    }

    #[test]
    fn sweep_layout() {
        let curve = simulate_sweep(thin(), &OracleConfig::default(), 0.1).unwrap();
        // V_c + 3w = 2.1 V -> 21 steps
        assert_eq!(curve.len(), 4 * 21 + 1);
        assert_eq!(curve.points.first().unwrap().v, curve.points.last().unwrap().v);
        assert!((curve.points[0].v - 2.1).abs() < 1e-12);
    }

    #[test]
    fn quantized_thin_film_has_few_levels() {
        let cfg = OracleConfig::default();
        let params = thin();
        let n_g = cfg.grain_count(params.t_fl) as usize;
        let curve = simulate_sweep(params, &cfg, 0.1).unwrap();
        for dir in [Direction::Up, Direction::Down] {
            let levels: BTreeSet<u64> = curve
                .points
                .iter()
                .filter(|pt| pt.dir == dir)
                .map(|pt| (pt.p + 0.0).to_bits())
                .collect();
            assert!(levels.len() <= n_g + 1, "{dir:?}: {} levels", levels.len());
            assert!(levels.len() >= 3);
        }
    }

    fn params_strategy() -> impl Strategy<Value = DeviceParams> {
        (0.5f64..=2.0, 2.0f64..=14.0).prop_map(|(t_dl, t_fl)| DeviceParams { t_dl, t_fl })
    }

    fn branch(curve: &SweepCurve, dir: Direction) -> Vec<SweepPoint> {
        curve.points.iter().copied().filter(|p| p.dir == dir).collect()
    }

    proptest! {
        #[test]
        fn curve_invariants(params in params_strategy(), quantize in any::<bool>()) {
            let cfg = OracleConfig { quantize, ..OracleConfig::default() };
            let curve = simulate_sweep(params, &cfg, 0.1).unwrap();
            for pair in curve.points.windows(2) {
                let dv = pair[1].v - pair[0].v;
                prop_assert!((dv.abs() - 0.1).abs() < 1e-9);
                let rising = dv > 0.0;
                prop_assert_eq!(pair[1].dir == Direction::Up, rising);
            }
            for pt in &curve.points {
                prop_assert!(pt.p.abs() <= cfg.p_s0);
            }
        }

        #[test]
        fn loop_is_counter_clockwise(params in params_strategy(), quantize in any::<bool>()) {
            let cfg = OracleConfig { quantize, ..OracleConfig::default() };
            let curve = simulate_sweep(params, &cfg, 0.1).unwrap();
            let at_zero = |dir| curve.points.iter().find(|p| p.dir == dir && p.v.abs() < 1e-9).unwrap().p;
            prop_assert!(at_zero(Direction::Up) < at_zero(Direction::Down));
        }

        #[test]
        fn smooth_loop_is_point_symmetric(params in params_strategy()) {
            let curve = simulate_sweep(params, &smooth(), 0.1).unwrap();
            let down = branch(&curve, Direction::Down);
            for up in branch(&curve, Direction::Up) {
                let mirror = down.iter().find(|d| (d.v + up.v).abs() < 1e-9).unwrap();
                prop_assert!((up.p + mirror.p).abs() < 1e-9);
            }
        }

        #[test]
        fn smooth_loop_is_continuous(params in params_strategy()) {
            let cfg = smooth();
            let curve = simulate_sweep(params, &cfg, 0.1).unwrap();
            let p_s = cfg.saturation_polarization_at(params.t_dl, params.t_fl);
            for dir in [Direction::Up, Direction::Down] {
                for pair in branch(&curve, dir).windows(2) {
                    prop_assert!((pair[1].p - pair[0].p).abs() <= p_s * 0.1 / cfg.w + 1e-12);
                }
            }
        }

        #[test]
        fn deterministic(params in params_strategy()) {
            let cfg = OracleConfig::default();
            let a = simulate_sweep(params, &cfg, 0.1).unwrap();
            let b = simulate_sweep(params, &cfg, 0.1).unwrap();
            for (x, y) in a.points.iter().zip(&b.points) {
                prop_assert_eq!(x.p.to_bits(), y.p.to_bits());
                prop_assert_eq!(x.v.to_bits(), y.v.to_bits());
            }
        }

        #[test]
        fn saturation_grows_with_fl(t_dl in 0.5f64..=2.0, x in 2.0f64..=14.0, y in 2.0f64..=14.0) {
            let (a, b) = (x.min(y), x.max(y));
            // ties within rounding are not a violation
            prop_assume!(b - a > 1e-9);
            let cfg = OracleConfig::default();
            prop_assert!(cfg.saturation_polarization_at(t_dl, a) < cfg.saturation_polarization_at(t_dl, b));
            prop_assert!(cfg.saturation_polarization_at(t_dl, b) <= cfg.p_s0);
        }
    }
}
