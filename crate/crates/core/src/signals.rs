//! Hourly scenario data and the per-step exogenous signals derived from it.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{AreaExogenous, AreaId, EEA_AREAS};

pub const HOURS: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("series {area} {kind} has {present} present entries, at least 2 are needed")]
    TooFewPoints {
        area: AreaId,
        kind: SeriesKind,
        present: usize,
    },
    #[error("series has {present} present entries, at least 2 are needed")]
    TooFewValues { present: usize },
    #[error("series {area} {kind} has {found} entries instead of 24")]
    WrongLength {
        area: AreaId,
        kind: SeriesKind,
        found: usize,
    },
    #[error("series {area} {kind} is not finite at hour {hour}")]
    NonFinite {
        area: AreaId,
        kind: SeriesKind,
        hour: usize,
    },
    #[error("load series {area} {kind} is negative at hour {hour}")]
    NegativeLoad {
        area: AreaId,
        kind: SeriesKind,
        hour: usize,
    },
    #[error("series {area} {kind} has a missing entry at hour {hour}; repair it first")]
    Missing {
        area: AreaId,
        kind: SeriesKind,
        hour: usize,
    },
    #[error("scenario lacks area {0}")]
    MissingArea(AreaId),
    #[error("scenario has {found} areas, expected {expected}")]
    AreaCount { expected: usize, found: usize },
    #[error("invalid capacity {value} for area {area}")]
    InvalidCapacity { area: AreaId, value: f64 },
    #[error("steps_per_hour must be positive")]
    ZeroStepsPerHour,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SeriesKind {
    LoadMeas,
    LoadFor,
    RenMeas,
    RenFor,
}

impl SeriesKind {
    pub const ALL: [SeriesKind; 4] = [
        SeriesKind::LoadMeas,
        SeriesKind::LoadFor,
        SeriesKind::RenMeas,
        SeriesKind::RenFor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SeriesKind::LoadMeas => "load_meas",
            SeriesKind::LoadFor => "load_for",
            SeriesKind::RenMeas => "ren_meas",
            SeriesKind::RenFor => "ren_for",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        SeriesKind::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_load(self) -> bool {
        matches!(self, SeriesKind::LoadMeas | SeriesKind::LoadFor)
    }
}

impl core::fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// One hourly series in GW. `None` marks an entry awaiting repair.
#[derive(Clone, Debug, PartialEq)]
pub struct HourlySeries {
    pub area: AreaId,
    pub kind: SeriesKind,
    pub values: Vec<Option<f64>>,
}

impl HourlySeries {
    pub fn complete(area: AreaId, kind: SeriesKind, values: &[f64]) -> Self {
        HourlySeries {
            area,
            kind,
            values: values.iter().map(|&v| Some(v)).collect(),
        }
    }

    pub fn missing_hours(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_none())
            .map(|(h, _)| h + 1)
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    /// Present values, or an error naming the first gap (1-based hour).
    pub fn dense(&self) -> Result<Vec<f64>, SignalError> {
        self.values
            .iter()
            .enumerate()
            .map(|(h, v)| {
                v.ok_or(SignalError::Missing {
                    area: self.area,
                    kind: self.kind,
                    hour: h + 1,
                })
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if self.values.len() != HOURS {
            return Err(SignalError::WrongLength {
                area: self.area,
                kind: self.kind,
                found: self.values.len(),
            });
        }
        for (h, v) in self.values.iter().enumerate() {
            let Some(v) = *v else { continue };
            if !v.is_finite() {
                return Err(SignalError::NonFinite {
                    area: self.area,
                    kind: self.kind,
                    hour: h + 1,
                });
            }
            if self.kind.is_load() && v < 0.0 {
                return Err(SignalError::NegativeLoad {
                    area: self.area,
                    kind: self.kind,
                    hour: h + 1,
                });
            }
        }
        Ok(())
    }
}

/// Fills gaps by linear interpolation between the nearest present neighbours
/// and holds the nearest present value across leading and trailing gaps.
pub fn repair_values(values: &[Option<f64>]) -> Result<Vec<f64>, SignalError> {
    let present: Vec<(usize, f64)> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .collect();
    if present.len() < 2 {
        return Err(SignalError::TooFewValues { present: present.len() });
    }
    let mut out = Vec::with_capacity(values.len());
    let mut next = 0; // index into `present` of the first point at or after i
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = v {
            out.push(*v);
            next += 1;
            continue;
        }
        let filled = if next == 0 {
            present[0].1
        } else if next == present.len() {
            present[present.len() - 1].1
        } else {
            let (i0, v0) = present[next - 1];
            let (i1, v1) = present[next];
            let t = (i - i0) as f64 / (i1 - i0) as f64;
            v0 + t * (v1 - v0)
        };
        out.push(filled);
    }
    Ok(out)
}

pub fn repair_missing(series: &HourlySeries) -> Result<HourlySeries, SignalError> {
    let repaired = repair_values(&series.values).map_err(|e| match e {
        SignalError::TooFewValues { present } => SignalError::TooFewPoints {
            area: series.area,
            kind: series.kind,
            present,
        },
        other => other,
    })?;
    Ok(HourlySeries::complete(series.area, series.kind, &repaired))
}

/// Profile of the synthetic generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Profile {
    Calm,
    Volatile,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Calm => "calm",
            Profile::Volatile => "volatile",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "calm" => Some(Profile::Calm),
            "volatile" => Some(Profile::Volatile),
            _ => None,
        }
    }
}

/// Hourly data of a network for one day.
///
/// `series` is area-major with the four kinds in [`SeriesKind::ALL`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub series: Vec<HourlySeries>,
    pub capacities: Vec<f64>,
    pub provenance: String,
    pub seed: Option<u64>,
}

impl Scenario {
    pub fn n_areas(&self) -> usize {
        self.capacities.len()
    }

    pub fn series(&self, area: usize, kind: SeriesKind) -> &HourlySeries {
        &self.series[4 * area + kind.index()]
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        let n = self.capacities.len();
        if self.series.len() != 4 * n {
            return Err(SignalError::AreaCount {
                expected: n,
                found: self.series.len() / 4,
            });
        }
        for (i, &cap) in self.capacities.iter().enumerate() {
            let area = AreaId::new(i).ok_or(SignalError::AreaCount {
                expected: EEA_AREAS,
                found: n,
            })?;
            if !(cap.is_finite() && cap >= 0.0) {
                return Err(SignalError::InvalidCapacity { area, value: cap });
            }
            for kind in SeriesKind::ALL {
                let s = self.series(i, kind);
                if s.area != area || s.kind != kind {
                    return Err(SignalError::MissingArea(area));
                }
                s.validate()?;
            }
        }
        Ok(())
    }

    /// Every series with gaps filled.
    pub fn repaired(&self) -> Result<Scenario, SignalError> {
        let series = self
            .series
            .iter()
            .map(|s| {
                if s.is_complete() {
                    Ok(s.clone())
                } else {
                    repair_missing(s)
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Scenario {
            series,
            capacities: self.capacities.clone(),
            provenance: self.provenance.clone(),
            seed: self.seed,
        })
    }

    pub fn missing_cells(&self) -> usize {
        self.series.iter().map(|s| s.missing_hours().len()).sum()
    }
}

/// Per-step deviation signals of one area [GW].
#[derive(Clone, Debug, PartialEq)]
pub struct AreaSignals {
    pub load_meas: Vec<f64>,
    pub load_for: Vec<f64>,
    pub ren_meas: Vec<f64>,
    pub ren_for: Vec<f64>,
}

impl AreaSignals {
    pub fn get(&self, kind: SeriesKind) -> &[f64] {
        match kind {
            SeriesKind::LoadMeas => &self.load_meas,
            SeriesKind::LoadFor => &self.load_for,
            SeriesKind::RenMeas => &self.ren_meas,
            SeriesKind::RenFor => &self.ren_for,
        }
    }

    fn get_mut(&mut self, kind: SeriesKind) -> &mut Vec<f64> {
        match kind {
            SeriesKind::LoadMeas => &mut self.load_meas,
            SeriesKind::LoadFor => &mut self.load_for,
            SeriesKind::RenMeas => &mut self.ren_meas,
            SeriesKind::RenFor => &mut self.ren_for,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepSignals {
    pub steps_per_hour: usize,
    pub areas: Vec<AreaSignals>,
}

impl StepSignals {
    pub fn zeros(n_areas: usize, steps: usize, steps_per_hour: usize) -> Self {
        let z = alloc::vec![0.0; steps];
        StepSignals {
            steps_per_hour,
            areas: alloc::vec![
                AreaSignals {
                    load_meas: z.clone(),
                    load_for: z.clone(),
                    ren_meas: z.clone(),
                    ren_for: z,
                };
                n_areas
            ],
        }
    }

    pub fn n_areas(&self) -> usize {
        self.areas.len()
    }

    pub fn len(&self) -> usize {
        self.areas.first().map_or(0, |a| a.load_meas.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Measured disturbance of every area at step `k`.
    pub fn measured(&self, k: usize) -> Vec<AreaExogenous> {
        self.areas
            .iter()
            .map(|a| AreaExogenous {
                d_p_load: a.load_meas[k],
                d_p_ren: a.ren_meas[k],
            })
            .collect()
    }

    pub fn forecast(&self, k: usize) -> Vec<AreaExogenous> {
        self.areas
            .iter()
            .map(|a| AreaExogenous {
                d_p_load: a.load_for[k],
                d_p_ren: a.ren_for[k],
            })
            .collect()
    }

    /// First `steps` steps only.
    pub fn truncated(&self, steps: usize) -> Self {
        let mut out = self.clone();
        for a in &mut out.areas {
            for kind in SeriesKind::ALL {
                a.get_mut(kind).truncate(steps);
            }
        }
        out
    }

    /// Keeps only the first `n` areas.
    pub fn first_areas(&self, n: usize) -> Self {
        StepSignals {
            steps_per_hour: self.steps_per_hour,
            areas: self.areas[..n].to_vec(),
        }
    }
}

/// Value of an hourly series at step `k`; step 0 is hour 1 and the last hour
/// is held.
pub fn interpolate_at(hourly: &[f64], k: usize, steps_per_hour: usize) -> f64 {
    let i = k / steps_per_hour;
    if i + 1 >= hourly.len() {
        return hourly[hourly.len() - 1];
    }
    let frac = (k % steps_per_hour) as f64 / steps_per_hour as f64;
    hourly[i] + frac * (hourly[i + 1] - hourly[i])
}

/// Expands a repaired scenario to `24 · steps_per_hour` deviation samples per
/// series. Each series is referenced to its own hour-1 value.
pub fn interpolate_to_steps(scenario: &Scenario, steps_per_hour: usize) -> Result<StepSignals, SignalError> {
    if steps_per_hour == 0 {
        return Err(SignalError::ZeroStepsPerHour);
    }
    let steps = HOURS * steps_per_hour;
    let mut out = StepSignals::zeros(scenario.n_areas(), steps, steps_per_hour);
    for (i, area) in out.areas.iter_mut().enumerate() {
        for kind in SeriesKind::ALL {
            let hourly = scenario.series(i, kind).dense()?;
            let base = hourly[0];
            for (k, slot) in area.get_mut(kind).iter_mut().enumerate() {
                *slot = interpolate_at(&hourly, k, steps_per_hour) - base;
            }
        }
    }
    Ok(out)
}

struct ProfileShape {
    load_swing: f64,
    load_noise: f64,
    solar: (f64, f64),
    wind: (f64, f64),
    wind_noise: f64,
    forecast_sigma: f64,
}

fn shape_of(profile: Profile) -> ProfileShape {
    match profile {
        Profile::Calm => ProfileShape {
            load_swing: 0.02,
            load_noise: 0.001,
            solar: (0.002, 0.01),
            wind: (0.05, 0.15),
            wind_noise: 0.01,
            forecast_sigma: 0.01,
        },
        Profile::Volatile => ProfileShape {
            load_swing: 0.25,
            load_noise: 0.03,
            solar: (0.05, 0.3),
            wind: (0.05, 0.3),
            wind_noise: 0.15,
            forecast_sigma: 0.10,
        },
    }
}

/// Correlation of consecutive hourly forecast errors.
const FORECAST_PHI: f64 = 0.95;
/// Share of the per-step input limit the synthetic net-load deviations may use.
const HEADROOM: f64 = 0.5;

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2)
}

fn round4(x: f64) -> f64 {
    libm::round(x * 1e4) / 1e4
}

/// Normalized daily load shape, trough near 04:00 and peak in the evening.
fn load_shape(t: f64) -> f64 {
    let base = -libm::cos(2.0 * PI * (t - 4.0) / 24.0);
    let evening = libm::exp(-libm::pow((t - 19.0) / 2.5, 2.0));
    0.6 * base + 0.4 * evening
}

fn forecast_errors(rng: &mut ChaCha8Rng, sigma: f64) -> [f64; HOURS] {
    let mut eps = [0.0; HOURS];
    let innov = libm::sqrt(1.0 - FORECAST_PHI * FORECAST_PHI) * sigma;
    let mut e = sigma * gaussian(rng);
    for slot in eps.iter_mut() {
        *slot = e.clamp(-3.0 * sigma, 3.0 * sigma);
        e = FORECAST_PHI * e + innov * gaussian(rng);
    }
    eps
}

/// Largest hourly deviation from hour 1; interpolation never exceeds it.
fn max_deviation(v: &[f64]) -> f64 {
    v.iter().map(|x| (x - v[0]).abs()).fold(0.0, f64::max)
}

/// Deterministic 26-area day. Capacities cover 1.2 × the peak net load and
/// are raised further so that every net-load deviation (measured or
/// forecast) stays within half of the per-step dispatch limit.
pub fn synthetic_scenario(seed: u64, profile: Profile) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = shape_of(profile);
    let mut series = Vec::with_capacity(4 * EEA_AREAS);
    let mut capacities = Vec::with_capacity(EEA_AREAS);
    for area in AreaId::all() {
        let base = 3.0 + 67.0 * rng.random::<f64>();
        let solar_cap = base * (shape.solar.0 + (shape.solar.1 - shape.solar.0) * rng.random::<f64>());
        let wind_cap = base * (shape.wind.0 + (shape.wind.1 - shape.wind.0) * rng.random::<f64>());

        let mut load = [0.0; HOURS];
        let mut ren = [0.0; HOURS];
        let mut gust = 0.0;
        for h in 0..HOURS {
            let t = h as f64;
            load[h] = base * (1.0 + shape.load_swing * load_shape(t) + shape.load_noise * gaussian(&mut rng));
            let solar = solar_cap * libm::sin(PI * (t - 7.0) / 11.0).max(0.0);
            gust = 0.8 * gust + shape.wind_noise * gaussian(&mut rng);
            let wind = wind_cap * (1.0 + gust).max(0.1);
            ren[h] = solar + wind;
        }
        let load_err = forecast_errors(&mut rng, shape.forecast_sigma);
        let ren_err = forecast_errors(&mut rng, shape.forecast_sigma);

        let load_meas: Vec<f64> = load.iter().map(|&v| round4(v)).collect();
        let ren_meas: Vec<f64> = ren.iter().map(|&v| round4(v)).collect();
        let load_for: Vec<f64> = load_meas
            .iter()
            .zip(load_err)
            .map(|(v, e)| round4(v * (1.0 + e)))
            .collect();
        let ren_for: Vec<f64> = ren_meas
            .iter()
            .zip(ren_err)
            .map(|(v, e)| round4(v * (1.0 + e)))
            .collect();

        let net = |l: &[f64], r: &[f64]| -> Vec<f64> { l.iter().zip(r).map(|(a, b)| a - b).collect() };
        let net_meas = net(&load_meas, &ren_meas);
        let net_for = net(&load_for, &ren_for);
        let peak = net_meas.iter().copied().fold(0.0, f64::max);
        let swing = max_deviation(&net_meas).max(max_deviation(&net_for));
        let cap = (1.2 * peak).max(1440.0 * swing / HEADROOM);
        capacities.push(libm::ceil(cap));

        for (kind, v) in [
            (SeriesKind::LoadMeas, &load_meas),
            (SeriesKind::LoadFor, &load_for),
            (SeriesKind::RenMeas, &ren_meas),
            (SeriesKind::RenFor, &ren_for),
        ] {
            series.push(HourlySeries::complete(area, kind, v));
        }
    }
    Scenario {
        series,
        capacities,
        provenance: alloc::format!("synthetic {} seed {}", profile.name(), seed),
        seed: Some(seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn repair_midpoint_and_edges() {
        assert_eq!(
            repair_values(&[Some(1.0), None, Some(3.0)]).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        assert_eq!(
            repair_values(&[None, Some(2.0), Some(4.0)]).unwrap(),
            vec![2.0, 2.0, 4.0]
        );
        assert_eq!(
            repair_values(&[Some(2.0), Some(4.0), None, None]).unwrap(),
            vec![2.0, 4.0, 4.0, 4.0]
        );
        let full = [Some(1.5), Some(-2.0), Some(7.0)];
        assert_eq!(repair_values(&full).unwrap(), vec![1.5, -2.0, 7.0]);
        assert_eq!(
            repair_values(&[None, Some(1.0), None]),
            Err(SignalError::TooFewValues { present: 1 })
        );
    }

    #[test]
    fn interpolation_midpoint() {
        let mut hourly = [11.44; 24];
        hourly[0] = 10.0;
        let v = interpolate_at(&hourly, 720, 1440);
        assert!((v - 10.72).abs() < 1e-12);
        assert!((v - hourly[0] - 0.72).abs() < 1e-12);
        assert_eq!(interpolate_at(&hourly, 1440, 1440), 11.44);
    }

    #[test]
    fn last_hour_is_held() {
        let hourly: Vec<f64> = (0..24).map(|h| h as f64).collect();
        assert_eq!(interpolate_at(&hourly, 23 * 1440, 1440), 23.0);
        assert_eq!(interpolate_at(&hourly, 24 * 1440 - 1, 1440), 23.0);
    }

    #[test]
    fn synthetic_is_deterministic() {
        assert_eq!(
            synthetic_scenario(7, Profile::Calm),
            synthetic_scenario(7, Profile::Calm)
        );
        assert_ne!(
            synthetic_scenario(7, Profile::Calm),
            synthetic_scenario(8, Profile::Calm)
        );
    }

    #[test]
    fn calm_forecasts_stay_close() {
        for seed in 0..20 {
            let s = synthetic_scenario(seed, Profile::Calm);
            s.validate().unwrap();
            for i in 0..EEA_AREAS {
                for (m, f) in [
                    (SeriesKind::LoadMeas, SeriesKind::LoadFor),
                    (SeriesKind::RenMeas, SeriesKind::RenFor),
                ] {
                    let m = s.series(i, m).dense().unwrap();
                    let f = s.series(i, f).dense().unwrap();
                    for (a, b) in m.iter().zip(&f) {
                        assert!(*a > 0.0);
                        assert!((b - a).abs() / a <= 0.05, "seed {seed} area {i}: {a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn volatile_load_varies() {
        let s = synthetic_scenario(3, Profile::Volatile);
        for i in 0..EEA_AREAS {
            let l = s.series(i, SeriesKind::LoadMeas).dense().unwrap();
            let lo = l.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(lo < hi);
        }
    }

    #[test]
    fn capacities_cover_net_load() {
        let s = synthetic_scenario(11, Profile::Volatile);
        for i in 0..EEA_AREAS {
            let l = s.series(i, SeriesKind::LoadMeas).dense().unwrap();
            let r = s.series(i, SeriesKind::RenMeas).dense().unwrap();
            let peak = l.iter().zip(&r).map(|(a, b)| a - b).fold(0.0, f64::max);
            assert!(peak <= s.capacities[i]);
        }
    }

    #[test]
    fn signals_start_at_zero_and_match_hours() {
        let s = synthetic_scenario(5, Profile::Volatile);
        let sig = interpolate_to_steps(&s, 1440).unwrap();
        assert_eq!(sig.len(), 34560);
        for (i, a) in sig.areas.iter().enumerate() {
            for kind in SeriesKind::ALL {
                let hourly = s.series(i, kind).dense().unwrap();
                let v = a.get(kind);
                assert_eq!(v[0], 0.0);
                for h in 0..24 {
                    assert_eq!(v[h * 1440], hourly[h] - hourly[0]);
                }
            }
        }
    }

    #[test]
    fn constant_series_has_no_deviation() {
        let mut s = synthetic_scenario(1, Profile::Calm);
        for ser in &mut s.series {
            ser.values = vec![Some(4.2); 24];
        }
        let sig = interpolate_to_steps(&s, 60).unwrap();
        assert!(sig
            .areas
            .iter()
            .all(|a| SeriesKind::ALL.iter().all(|&k| a.get(k).iter().all(|&v| v == 0.0))));
    }

    #[test]
    fn missing_cell_blocks_interpolation() {
        let mut s = synthetic_scenario(1, Profile::Calm);
        s.series[4 * 8].values[6] = None;
        assert_eq!(s.missing_cells(), 1);
        assert!(matches!(
            interpolate_to_steps(&s, 10),
            Err(SignalError::Missing {
                hour: 7,
                kind: SeriesKind::LoadMeas,
                ..
            })
        ));
        let fixed = s.repaired().unwrap();
        assert_eq!(fixed.missing_cells(), 0);
        assert!(interpolate_to_steps(&fixed, 10).is_ok());
    }
}
