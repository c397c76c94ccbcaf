use serde::{Deserialize, Serialize};

use super::CycleError;

pub const CYCLE_HEADER: &str = "time_s,speed_kmh";

/// Speed trace as `(time [s], vehicle speed [m/s])` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveCycle {
    pub samples: Vec<(f64, f64)>,
}

#[derive(Debug, Deserialize)]
struct Row {
    time_s: f64,
    speed_kmh: f64,
}

impl DriveCycle {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self, CycleError> {
        if samples.len() < 2 {
            return Err(CycleError::Cycle("need at least two samples".into()));
        }
        for (i, &(t, v)) in samples.iter().enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(CycleError::Cycle(format!("non-finite sample at row {i}")));
            }
            if v < 0.0 {
                return Err(CycleError::Cycle(format!("negative speed {v} at t = {t}")));
            }
            if i > 0 && t <= samples[i - 1].0 {
                return Err(CycleError::Cycle(format!("time not strictly increasing at t = {t}")));
            }
        }
        Ok(DriveCycle { samples })
    }

    /// Parses `time_s,speed_kmh` CSV.
    pub fn from_csv(text: &str) -> Result<Self, CycleError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| CycleError::Cycle(e.to_string()))?;
        if headers.iter().collect::<Vec<_>>() != ["time_s", "speed_kmh"] {
            return Err(CycleError::Cycle(format!("expected header `{CYCLE_HEADER}`")));
        }
        let mut samples = Vec::new();
        for row in rdr.deserialize::<Row>() {
            let row = row.map_err(|e| CycleError::Cycle(e.to_string()))?;
            samples.push((row.time_s, row.speed_kmh / 3.6));
        }
        Self::new(samples)
    }

    /// Stricter check for a full class-3 trace: must start from standstill.
    pub fn validate_class3(&self) -> Result<(), CycleError> {
        if self.samples[0].1 != 0.0 {
            return Err(CycleError::Cycle("class-3 cycle must start at zero speed".into()));
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{CYCLE_HEADER}\n");
        for &(t, v) in &self.samples {
            out.push_str(&format!("{t},{}\n", v * 3.6));
        }
        out
    }

    pub fn duration(&self) -> f64 {
        self.samples[self.samples.len() - 1].0 - self.samples[0].0
    }

    /// Trapezoidal distance [m].
    pub fn distance(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum()
    }

    pub fn max_speed(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.1))
    }

    /// Inserts linearly interpolated midpoints; halves the time step.
    pub fn refined(&self) -> DriveCycle {
        let mut samples = Vec::with_capacity(2 * self.samples.len());
        for w in self.samples.windows(2) {
            samples.push(w[0]);
            samples.push((0.5 * (w[0].0 + w[1].0), 0.5 * (w[0].1 + w[1].1)));
        }
        samples.push(self.samples[self.samples.len() - 1]);
        DriveCycle { samples }
    }

    pub fn shifted(&self, dt: f64) -> DriveCycle {
        DriveCycle {
            samples: self.samples.iter().map(|&(t, v)| (t + dt, v)).collect(),
        }
    }

    /// Constant speed `v_kmh` for `seconds`, sampled every second.
    pub fn constant(v_kmh: f64, seconds: usize) -> Result<DriveCycle, CycleError> {
        Self::new((0..=seconds).map(|i| (i as f64, v_kmh / 3.6)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let c = DriveCycle::from_csv("time_s,speed_kmh\n0,0\n1,3.6\n2,7.2\n").unwrap();
        assert_eq!(c.samples, vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]);
        assert_eq!(DriveCycle::from_csv(&c.to_csv()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(DriveCycle::from_csv("t,v\n0,0\n1,1\n").is_err());
        assert!(DriveCycle::from_csv("time_s,speed_kmh\n0,0\n0,1\n").is_err());
        assert!(DriveCycle::from_csv("time_s,speed_kmh\n0,0\n1,-1\n").is_err());
        assert!(DriveCycle::from_csv("time_s,speed_kmh\n0,0\n").is_err());
        assert!(DriveCycle::from_csv("time_s,speed_kmh\n0,0\n1,x\n").is_err());
    }

    #[test]
    fn shipped_cycle_is_valid() {
        let c = crate::data::cycle("synthetic_class3");
        c.validate_class3().unwrap();
        assert_eq!(c.duration(), 1800.0);
        assert!((c.max_speed() * 3.6 - 131.3).abs() < 1e-9);
    }
}
