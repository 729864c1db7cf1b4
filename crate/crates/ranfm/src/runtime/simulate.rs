//! Synthetic telemetry scenarios, emulating live KPI streams with labeled
//! events so every task demo runs without a testbed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::datapile::{CuratedDataset, Labels, Split};
use crate::error::{Error, Result};
use crate::tensor::{DType, Tensor};

/// Default sampling period: 10 ms telemetry granularity.
pub const DEFAULT_PERIOD_MS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// RF interference burst: level shift + variance change on SINR/BLER-like
    /// channels, per-timestep anomaly labels.
    Jamming,
    /// Stationary vs mobile regimes on RSRP-like channels, per-timestep
    /// class labels.
    Mobility,
    /// PRB-utilization-like load in [0,100]: smoothed random walk with
    /// periodic bursts.
    EmbbLoad,
    /// Integer CQI channel in [0,15] with half the samples masked out.
    CqiMask,
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jamming" => Ok(Scenario::Jamming),
            "mobility" => Ok(Scenario::Mobility),
            "embb_load" => Ok(Scenario::EmbbLoad),
            "cqi_mask" => Ok(Scenario::CqiMask),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Jamming => "jamming",
            Scenario::Mobility => "mobility",
            Scenario::EmbbLoad => "embb_load",
            Scenario::CqiMask => "cqi_mask",
        }
    }
}

/// Scenario parameters. `events` holds (start, len) sample ranges; `None`
/// derives a scenario-appropriate default schedule from the duration, and
/// an explicit empty list produces an event-free trace.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    /// Total duration in samples; must cover at least one analysis window.
    pub duration: usize,
    /// Analysis window the stream must at least cover.
    pub window: usize,
    pub sampling_period_ms: f64,
    pub seed: u64,
    pub events: Option<Vec<(usize, usize)>>,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, duration: usize, seed: u64) -> Self {
        ScenarioSpec {
            scenario,
            duration,
            window: 512,
            sampling_period_ms: DEFAULT_PERIOD_MS,
            seed,
            events: None,
        }
    }

    fn default_events(&self) -> Vec<(usize, usize)> {
        if let Some(events) = &self.events {
            return events.clone();
        }
        let d = self.duration;
        match self.scenario {
            // one burst past the 60% mark, a tenth of the trace long
            Scenario::Jamming => vec![((d * 6) / 10, (d / 10).max(4))],
            // alternate regimes in eighths: mobile on odd segments
            Scenario::Mobility => {
                let seg = (d / 8).max(1);
                (0..8)
                    .filter(|i| i % 2 == 1)
                    .map(|i| (i * seg, seg.min(d - i * seg)))
                    .collect()
            }
            // periodic load bursts every quarter
            Scenario::EmbbLoad => {
                let seg = (d / 16).max(2);
                (1..4).map(|i| (i * d / 4, seg)).collect()
            }
            Scenario::CqiMask => Vec::new(),
        }
    }
}

fn ar1_series(
    n: usize,
    phi: f64,
    sigma: f64,
    level: f64,
    diurnal_amp: f64,
    diurnal_period: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let normal = Normal::new(0.0, sigma).expect("sigma > 0");
    let mut x = 0.0;
    (0..n)
        .map(|i| {
            x = phi * x + normal.sample(rng);
            level + x + diurnal_amp * (2.0 * std::f64::consts::PI * i as f64 / diurnal_period).sin()
        })
        .collect()
}

/// Generate one labeled, stream-ready dataset. Byte-reproducible for a
/// fixed (scenario, seed).
pub fn simulate_telemetry(spec: &ScenarioSpec) -> Result<CuratedDataset> {
    if spec.duration < spec.window {
        return Err(Error::Config(format!(
            "duration {} shorter than the analysis window {}",
            spec.duration, spec.window
        )));
    }
    let n = spec.duration;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let events = spec.default_events();
    for &(start, len) in &events {
        if start + len > n {
            return Err(Error::Config(format!(
                "event {start}+{len} exceeds duration {n}"
            )));
        }
    }

    let (rows, names, labels, missing): (Vec<Vec<f64>>, Vec<&str>, Option<Labels>, Option<Vec<bool>>) =
        match spec.scenario {
            Scenario::Jamming => {
                let diurnal = (n as f64 / 3.0).max(64.0);
                let mut sinr = ar1_series(n, 0.9, 0.25, 18.0, 2.0, diurnal, &mut rng);
                let mut bler = ar1_series(n, 0.85, 0.02, 0.05, 0.01, diurnal, &mut rng);
                let mut tput = ar1_series(n, 0.9, 1.5, 80.0, 8.0, diurnal, &mut rng);
                let jitter = Normal::new(0.0, 0.8).unwrap();
                let mut lab = vec![0u32; n];
                for &(start, len) in &events {
                    for j in start..start + len {
                        // interference floor: SINR collapses and gets noisy,
                        // error rate and throughput follow
                        sinr[j] = sinr[j] - 12.0 + 3.0 * jitter.sample(&mut rng);
                        bler[j] = bler[j] + 0.4;
                        tput[j] = (tput[j] - 50.0).max(0.0);
                        lab[j] = 1;
                    }
                }
                (
                    vec![sinr, bler, tput],
                    vec!["sinr_db", "bler", "throughput_mbps"],
                    Some(Labels::PerTimestep(lab)),
                    None,
                )
            }
            Scenario::Mobility => {
                let mut lab = vec![0u32; n];
                for &(start, len) in &events {
                    for l in lab.iter_mut().skip(start).take(len) {
                        *l = 1;
                    }
                }
                let still = Normal::new(0.0, 0.15).unwrap();
                let moving = Normal::new(0.0, 1.2).unwrap();
                let mut rsrp = Vec::with_capacity(n);
                let mut snr = Vec::with_capacity(n);
                let mut drift: f64 = 0.0;
                for &l in lab.iter() {
                    if l == 1 {
                        drift += moving.sample(&mut rng) * 0.25;
                        drift = drift.clamp(-12.0, 12.0);
                        rsrp.push(-85.0 + drift + moving.sample(&mut rng));
                        snr.push(12.0 + drift * 0.4 + moving.sample(&mut rng) * 0.8);
                    } else {
                        drift *= 0.995;
                        rsrp.push(-85.0 + drift + still.sample(&mut rng));
                        snr.push(12.0 + drift * 0.4 + still.sample(&mut rng) * 0.3);
                    }
                }
                (
                    vec![rsrp, snr],
                    vec!["rsrp_dbm", "snr_db"],
                    Some(Labels::PerTimestep(lab)),
                    None,
                )
            }
            Scenario::EmbbLoad => {
                let step = Normal::new(0.0, 1.1).unwrap();
                let mut level: f64 = 45.0;
                let mut prb: Vec<f64> = (0..n)
                    .map(|_| {
                        level = 45.0 + 0.97 * (level - 45.0) + step.sample(&mut rng);
                        level.clamp(0.0, 100.0)
                    })
                    .collect();
                for &(start, len) in &events {
                    for (off, v) in prb.iter_mut().skip(start).take(len).enumerate() {
                        let ramp = (off as f64 / len as f64 * std::f64::consts::PI).sin();
                        *v = (*v + 35.0 * ramp).clamp(0.0, 100.0);
                    }
                }
                (vec![prb], vec!["prb_util_pct"], None, None)
            }
            Scenario::CqiMask => {
                let mut cqi: f64 = 9.0;
                let values: Vec<f64> = (0..n)
                    .map(|_| {
                        let delta: f64 = match rng.gen_range(0..10) {
                            0..=2 => -1.0,
                            3..=5 => 1.0,
                            _ => 0.0,
                        };
                        cqi = (cqi + delta).clamp(0.0, 15.0);
                        cqi
                    })
                    .collect();
                // half the samples masked out, at least one observed
                let mut mask = vec![false; n];
                let target = n / 2;
                let mut masked = 0;
                while masked < target {
                    let i = rng.gen_range(0..n);
                    if !mask[i] {
                        mask[i] = true;
                        masked += 1;
                    }
                }
                if mask.iter().all(|&m| m) {
                    mask[0] = false;
                }
                (vec![values], vec!["cqi"], None, Some(mask))
            }
        };

    let channels = Tensor::from_rows(&rows, DType::F64)?;
    let d = CuratedDataset {
        name: spec.scenario.name().to_string(),
        channels,
        channel_names: names.iter().map(|s| s.to_string()).collect(),
        sampling_period_ms: spec.sampling_period_ms,
        labels,
        missing,
        split: Split::Test,
    };
    d.validate()?;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(s: Scenario, n: usize, seed: u64) -> ScenarioSpec {
        let mut sp = ScenarioSpec::new(s, n, seed);
        sp.window = 64;
        sp
    }

    #[test]
    fn fixed_seed_reproduces_bytes() {
        for s in [
            Scenario::Jamming,
            Scenario::Mobility,
            Scenario::EmbbLoad,
            Scenario::CqiMask,
        ] {
            let a = simulate_telemetry(&spec(s, 256, 7)).unwrap();
            let b = simulate_telemetry(&spec(s, 256, 7)).unwrap();
            assert!(a.channels.bits_eq(&b.channels), "{s:?}");
            assert_eq!(a.labels, b.labels);
            assert_eq!(a.missing, b.missing);
            let c = simulate_telemetry(&spec(s, 256, 8)).unwrap();
            assert!(!a.channels.bits_eq(&c.channels), "{s:?} must vary by seed");
        }
    }

    #[test]
    fn jamming_labels_line_up_with_burst_schedule() {
        let mut sp = spec(Scenario::Jamming, 400, 3);
        sp.events = Some(vec![(100, 40)]);
        let d = simulate_telemetry(&sp).unwrap();
        match &d.labels {
            Some(Labels::PerTimestep(l)) => {
                for (i, &v) in l.iter().enumerate() {
                    let inside = (100..140).contains(&i);
                    assert_eq!(v == 1, inside, "label at {i}");
                }
            }
            _ => panic!("jamming must carry per-timestep labels"),
        }
        assert_eq!(d.num_channels(), 3);
    }

    #[test]
    fn embb_load_stays_in_percent_range() {
        let d = simulate_telemetry(&spec(Scenario::EmbbLoad, 512, 5)).unwrap();
        for j in 0..d.len() {
            let v = d.channels.at(0, j);
            assert!((0.0..=100.0).contains(&v), "sample {j} = {v}");
        }
    }

    #[test]
    fn cqi_mask_is_half_missing_integer_channel() {
        let d = simulate_telemetry(&spec(Scenario::CqiMask, 300, 2)).unwrap();
        let missing = d.missing.as_ref().unwrap();
        assert_eq!(missing.iter().filter(|&&m| m).count(), 150);
        for j in 0..d.len() {
            let v = d.channels.at(0, j);
            assert!((0.0..=15.0).contains(&v));
            assert_eq!(v.fract(), 0.0, "CQI must be integer-valued");
        }
    }

    #[test]
    fn duration_must_cover_window() {
        let mut sp = spec(Scenario::Jamming, 32, 1);
        sp.window = 64;
        assert!(simulate_telemetry(&sp).is_err());
    }

    #[test]
    fn mobility_has_two_regimes() {
        let d = simulate_telemetry(&spec(Scenario::Mobility, 512, 9)).unwrap();
        let labels = match &d.labels {
            Some(Labels::PerTimestep(l)) => l,
            _ => panic!(),
        };
        let ones = labels.iter().filter(|&&v| v == 1).count();
        assert!(ones > 100 && ones < 412, "both regimes present: {ones}");
        // mobile segments have visibly larger within-segment variance
        let rsrp: Vec<f64> = d.channel(0);
        let var = |xs: &[f64]| {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / xs.len() as f64
        };
        let mut seg_vars: Vec<(u32, f64)> = Vec::new();
        let mut start = 0usize;
        for i in 1..=labels.len() {
            if i == labels.len() || labels[i] != labels[start] {
                seg_vars.push((labels[start], var(&rsrp[start..i])));
                start = i;
            }
        }
        let mean_var = |class: u32| {
            let vs: Vec<f64> = seg_vars
                .iter()
                .filter(|(l, _)| *l == class)
                .map(|(_, v)| *v)
                .collect();
            vs.iter().sum::<f64>() / vs.len() as f64
        };
        assert!(
            mean_var(1) > 2.0 * mean_var(0),
            "mobile {} vs still {}",
            mean_var(1),
            mean_var(0)
        );
    }
}
