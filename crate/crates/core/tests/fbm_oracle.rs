//! Exact fractional Gaussian noise by circulant embedding, used as ground
//! truth for the scaling-exponent estimator.

use aggar_core::limits::{run_scaling_experiment, PathSource, ScaleStat};
use aggar_core::rng::{stream, StreamDomain};
use aggar_core::Result;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

struct FractionalNoise {
    hurst: f64,
    seed: u64,
}

fn autocov(h: f64, k: f64) -> f64 {
    0.5 * ((k + 1.0).abs().powf(2.0 * h) - 2.0 * k.abs().powf(2.0 * h) + (k - 1.0).abs().powf(2.0 * h))
}

impl PathSource for FractionalNoise {
    fn path(&self, replicate: u64, len: usize) -> Result<Vec<f64>> {
        let m = 2 * len;
        let mut c: Vec<Complex64> = (0..m)
            .map(|i| {
                let k = if i <= len { i } else { m - i };
                Complex64::new(autocov(self.hurst, k as f64), 0.0)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut c);
        let mut rng = stream(self.seed, StreamDomain::Replicates, replicate);
        let mut z: Vec<Complex64> = c
            .iter()
            .map(|l| {
                assert!(l.re > -1e-9, "circulant embedding not nonnegative");
                let s = (l.re.max(0.0) / m as f64).sqrt();
                Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * s
            })
            .collect();
        fft.process(&mut z);
        Ok(z[..len].iter().map(|v| v.re).collect())
    }
}

#[test]
fn embedding_reproduces_covariance() {
    let src = FractionalNoise { hurst: 0.75, seed: 1 };
    let reps = 4000;
    let mut acc = [0.0; 3];
    for r in 0..reps {
        let x = src.path(r, 64).unwrap();
        for (k, a) in acc.iter_mut().enumerate() {
            *a += x[10] * x[10 + k];
        }
    }
    for (k, a) in acc.iter().enumerate() {
        let est = a / reps as f64;
        assert!((est - autocov(0.75, k as f64)).abs() < 0.07, "lag {k}: {est}");
    }
}

#[test]
fn scaling_exponent_recovers_hurst_index() {
    let grid: Vec<usize> = (8..=14).map(|k| 1usize << k).collect();
    let e = run_scaling_experiment(&FractionalNoise { hurst: 0.75, seed: 5 }, &grid, 4000, ScaleStat::MedianAbs)
        .unwrap();
    assert!((e.exponent - 0.75).abs() < 0.03, "{} ± {}", e.exponent, e.stderr);
    let e = run_scaling_experiment(&FractionalNoise { hurst: 0.75, seed: 6 }, &grid, 1000, ScaleStat::StdDev)
        .unwrap();
    assert!((e.exponent - 0.75).abs() < 0.03, "{} ± {}", e.exponent, e.stderr);
}
