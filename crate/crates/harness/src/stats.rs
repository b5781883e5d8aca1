use serde::{Deserialize, Serialize};

/// Mean and standard error of the mean over trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; zero for a single trial.
    pub se: f64,
    pub n: usize,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Self { mean, se, n }
    }
}

impl std::fmt::Display for MeanSe {
    /// Percent with one decimal, e.g. `91.8 ± 2.0`.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.1} ± {:.1}", 100.0 * self.mean, 100.0 * self.se)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed() {
        // mean 2, sample var 1, se 1/sqrt(3)
        let s = MeanSe::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.se - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(MeanSe::of(&[0.4]).se, 0.0);
        assert!(MeanSe::of(&[]).mean.is_nan());
        assert_eq!(MeanSe::of(&[0.918, 0.918]).to_string(), "91.8 ± 0.0");
    }
}
