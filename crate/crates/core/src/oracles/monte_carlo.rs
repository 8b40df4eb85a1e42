use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Samples per independent random stream.
const CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Running mean and centred sum of squares of one chunk.
#[derive(Clone, Copy)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn merge(self, o: Moments) -> Moments {
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let delta = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * o.n / n,
            m2: self.m2 + o.m2 + delta * delta * self.n * o.n / n,
        }
    }
}

/// Uniform-sphere Monte Carlo estimate of `∫ dΩ |C û|`.
///
/// Chunk `j` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `j`, and chunk
/// moments are merged in chunk order, so the result is independent of threading.
pub fn mc_steering(c: &Matrix3<f64>, n_samples: usize, seed: u64) -> Result<McEstimate> {
    if n_samples < 10_000 {
        return Err(Error::validation(format!(
            "mc_steering needs at least 10^4 samples, got {n_samples}"
        )));
    }
    let chunks = n_samples.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let len = CHUNK.min(n_samples - j * CHUNK);
            let mut m = Moments {
                n: 0.0,
                mean: 0.0,
                m2: 0.0,
            };
            for _ in 0..len {
                let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
                let phi: f64 = 2.0 * PI * rng.random::<f64>();
                let s = (1.0 - z * z).max(0.0).sqrt();
                let (sp, cp) = phi.sin_cos();
                let v = (c * Vector3::new(s * cp, s * sp, z)).norm();
                m.n += 1.0;
                let d = v - m.mean;
                m.mean += d / m.n;
                m.m2 += d * (v - m.mean);
            }
            m
        })
        .collect();
    let total = parts.into_iter().fold(
        Moments {
            n: 0.0,
            mean: 0.0,
            m2: 0.0,
        },
        Moments::merge,
    );
    let var = if total.n > 1.0 {
        total.m2 / (total.n - 1.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        estimate: 4.0 * PI * total.mean,
        std_error: 4.0 * PI * (var / total.n).sqrt(),
    })
}
