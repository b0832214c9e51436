use serde::{Deserialize, Serialize};

use super::StlError;

/// Sampled trajectory with named state channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    channels: Vec<String>,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
}

impl Signal {
    pub fn new(channels: Vec<String>, times: Vec<f64>, states: Vec<Vec<f64>>) -> Result<Self, StlError> {
        if times.is_empty() {
            return Err(StlError::InvalidSignal("signal has no samples".into()));
        }
        if times.len() != states.len() {
            return Err(StlError::InvalidSignal(format!(
                "{} times but {} state vectors",
                times.len(),
                states.len()
            )));
        }
        if channels.is_empty() {
            return Err(StlError::InvalidSignal("signal has no channels".into()));
        }
        if let Some(k) = times.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(StlError::InvalidSignal(format!("times not strictly increasing at sample {}", k + 1)));
        }
        if let Some(k) = states.iter().position(|s| s.len() != channels.len()) {
            return Err(StlError::InvalidSignal(format!(
                "state {k} has {} entries, expected {}",
                states[k].len(),
                channels.len()
            )));
        }
        Ok(Self { channels, times, states })
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    pub fn channel(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.channel_index(name)?;
        Some(self.states.iter().map(|s| s[k]).collect())
    }

    pub fn first_time(&self) -> f64 {
        self.times[0]
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Index of the sample at time `t`, within the sampling tolerance.
    pub fn sample_index(&self, t: f64) -> Result<usize, StlError> {
        let (first, last) = (self.first_time(), self.last_time());
        let eps = time_eps(t);
        if t < first - eps || t > last + eps {
            return Err(StlError::TimeOutOfDomain { t, first, last });
        }
        let k = self.times.partition_point(|&x| x < t - eps);
        if k < self.times.len() && (self.times[k] - t).abs() <= eps {
            Ok(k)
        } else {
            Err(StlError::NotSampled(t))
        }
    }

    /// Write `time,<channels...>` rows.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["time".to_string()];
        header.extend(self.channels.iter().cloned());
        w.write_record(&header)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut row = vec![t.to_string()];
            row.extend(s.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Tolerance used when matching sample instants against window bounds.
pub fn time_eps(t: f64) -> f64 {
    1e-9 * t.abs().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let ch = vec!["x".to_string()];
        assert!(Signal::new(ch.clone(), vec![], vec![]).is_err());
        assert!(Signal::new(ch.clone(), vec![0.0, 0.0], vec![vec![1.0], vec![1.0]]).is_err());
        assert!(Signal::new(ch.clone(), vec![0.0], vec![vec![1.0, 2.0]]).is_err());
        let s = Signal::new(ch, vec![0.0, 0.1, 0.2], vec![vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        assert_eq!(s.sample_index(0.1).unwrap(), 1);
        assert_eq!(s.sample_index(0.30000000000000004 - 0.1).unwrap(), 2);
        assert!(matches!(s.sample_index(0.05), Err(StlError::NotSampled(_))));
        assert!(matches!(s.sample_index(1.0), Err(StlError::TimeOutOfDomain { .. })));
    }

    #[test]
    fn csv_export() {
        let s = Signal::new(vec!["a".into(), "b".into()], vec![0.0, 0.5], vec![vec![1.0, 2.0], vec![3.0, 4.5]])
            .unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "time,a,b\n0,1,2\n0.5,3,4.5\n");
    }
}
