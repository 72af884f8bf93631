//! Deterministic low-discrepancy sampling.
//!
//! A Halton sequence with a Cranley–Patterson rotation drawn from a seeded
//! ChaCha stream. Same seed, same points, on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u64; 32] =
    [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone)]
pub struct Halton {
    dim: usize,
    shift: Vec<f64>,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton dimension {dim} too large");
        let mut r = rng(seed);
        let shift = (0..dim).map(|_| r.gen::<f64>()).collect();
        Halton { dim, shift }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The i-th point in [0, 1)^dim.
    pub fn unit(&self, i: usize) -> Vec<f64> {
        (0..self.dim)
            .map(|j| {
                let v = radical_inverse(i as u64 + 1, PRIMES[j]) + self.shift[j];
                v - v.floor()
            })
            .collect()
    }
}

fn box_muller(u1: f64, u2: f64) -> (f64, f64) {
    let r = (-2.0 * (1.0 - u1).max(1e-300).ln()).sqrt();
    let a = std::f64::consts::TAU * u2;
    (r * a.cos(), r * a.sin())
}

/// Point sampler over a box.
#[derive(Debug, Clone)]
pub struct BoxSampler {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    halton: Halton,
}

impl BoxSampler {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, seed: u64) -> Self {
        let halton = Halton::new(lo.len(), seed);
        BoxSampler { lo, hi, halton }
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.halton.unit(i).iter().zip(self.lo.iter().zip(&self.hi)).map(|(u, (l, h))| l + u * (h - l)).collect()
    }

    pub fn points(&self, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| self.point(i)).collect()
    }
}

/// Uniform-in-volume and on-sphere sampler for the ball of radius one.
#[derive(Debug, Clone)]
pub struct BallSampler {
    dim: usize,
    halton: Halton,
}

impl BallSampler {
    pub fn new(dim: usize, seed: u64) -> Self {
        let normals = dim + dim % 2;
        BallSampler { dim, halton: Halton::new(normals + 1, seed) }
    }

    pub fn direction(&self, i: usize) -> Vec<f64> {
        if self.dim == 0 {
            return Vec::new();
        }
        let u = self.halton.unit(i);
        if self.dim == 1 {
            return vec![if u[0] < 0.5 { -1.0 } else { 1.0 }];
        }
        let mut g = Vec::with_capacity(self.dim + 1);
        for k in 0..self.dim.div_ceil(2) {
            let (a, b) = box_muller(u[2 * k], u[2 * k + 1]);
            g.push(a);
            g.push(b);
        }
        g.truncate(self.dim);
        let n = crate::linalg::norm(&g);
        if n < 1e-300 {
            let mut e = vec![0.0; self.dim];
            e[0] = 1.0;
            return e;
        }
        g.iter().map(|v| v / n).collect()
    }

    pub fn on_sphere(&self, i: usize) -> Vec<f64> {
        self.direction(i)
    }

    pub fn in_ball(&self, i: usize) -> Vec<f64> {
        let d = self.direction(i);
        let u = *self.halton.unit(i).last().unwrap();
        let r = u.powf(1.0 / self.dim.max(1) as f64);
        d.iter().map(|v| v * r).collect()
    }
}

/// Evenly spaced unit directions: endpoints in 1-D, a circle in 2-D,
/// low-discrepancy sphere points otherwise.
pub fn directions(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    match dim {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let s = BallSampler::new(dim, seed);
            (0..n).map(|i| s.direction(i)).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a = BoxSampler::new(vec![-1.0, 0.0], vec![1.0, 2.0], 7);
        let b = BoxSampler::new(vec![-1.0, 0.0], vec![1.0, 2.0], 7);
        for i in 0..100 {
            let p = a.point(i);
            assert_eq!(p, b.point(i));
            assert!(p[0] >= -1.0 && p[0] < 1.0 && p[1] >= 0.0 && p[1] < 2.0);
        }
    }

    #[test]
    fn ball_points_inside() {
        let s = BallSampler::new(3, 1);
        for i in 0..200 {
            assert!(crate::linalg::norm(&s.in_ball(i)) <= 1.0 + 1e-12);
            assert!((crate::linalg::norm(&s.on_sphere(i)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn halton_first_coordinate_is_van_der_corput() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(1, 3) - 1.0 / 3.0).abs() < 1e-15);
    }
}
