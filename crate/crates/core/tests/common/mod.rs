//! Reference computations that share no code with the library.
#![allow(dead_code)]

use std::f64::consts::PI;

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (left, right) = (simpson(f, a, m), simpson(f, m, b));
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    adaptive(f, a, m, left, tol / 2.0, depth - 1) + adaptive(f, m, b, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson over `[a, b]` split at `breaks`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut knots = vec![a];
    knots.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    knots.push(b);
    knots.sort_by(f64::total_cmp);
    knots
        .windows(2)
        .map(|w| adaptive(f, w[0], w[1], simpson(f, w[0], w[1]), tol, 50))
        .sum()
}

/// Overlap of two disks as `∫₀^{r1} 2 r θ(r) dr`, where `θ(r)` is the half
/// angle of the arc of radius `r` about the first center that lies inside
/// the second disk.
pub fn lens_by_integration(r1: f64, r2: f64, d: f64) -> f64 {
    let theta = |r: f64| {
        if r == 0.0 {
            return if d < r2 { PI } else { 0.0 };
        }
        if d == 0.0 {
            return if r <= r2 { PI } else { 0.0 };
        }
        let c = (r * r + d * d - r2 * r2) / (2.0 * r * d);
        if c <= -1.0 {
            PI
        } else if c >= 1.0 {
            0.0
        } else {
            c.acos()
        }
    };
    let f = |r: f64| 2.0 * r * theta(r);
    integrate(&f, 0.0, r1, &[(d - r2).abs(), d + r2], 1e-11 * PI * r1 * r1)
}

/// Ring-coverage overlap by counting cell midpoints of a `cells × cells`
/// grid over the coverage disk at distance `d` from the fire center.
pub fn ring_overlap_by_grid(r_fire: f64, r_sense: f64, r_hov: f64, d: f64, cells: usize) -> f64 {
    let h = 2.0 * r_hov / cells as f64;
    let mut hits = 0u64;
    for i in 0..cells {
        let x = d - r_hov + (i as f64 + 0.5) * h;
        for j in 0..cells {
            let y = -r_hov + (j as f64 + 0.5) * h;
            let in_disk = (x - d).powi(2) + y * y <= r_hov * r_hov;
            let rho2 = x * x + y * y;
            if in_disk && rho2 > r_fire * r_fire && rho2 <= r_sense * r_sense {
                hits += 1;
            }
        }
    }
    hits as f64 * h * h
}

/// Distribution of the number of positive flags, by enumerating all `2^n`
/// flag patterns: the first `n_in` sensors flag with probability `1 - ε`,
/// the others with probability `ε`.
pub fn flag_count_by_enumeration(n_in: usize, n_out: usize, eps: f64) -> Vec<f64> {
    let n = n_in + n_out;
    assert!(n <= 20);
    let mut dist = vec![0.0; n + 1];
    for mask in 0u32..(1u32 << n) {
        let mut p = 1.0;
        for bit in 0..n {
            let on = mask >> bit & 1 == 1;
            let q = if bit < n_in { 1.0 - eps } else { eps };
            p *= if on { q } else { 1.0 - q };
        }
        dist[mask.count_ones() as usize] += p;
    }
    dist
}

/// `P(count >= m)` from a count distribution.
pub fn tail(dist: &[f64], m: usize) -> f64 {
    dist.iter().skip(m).sum()
}

/// Gaussian tail `Q(x)` by direct integration of the density.
pub fn q_function(x: f64) -> f64 {
    let pdf = |t: f64| (-(t * t) / 2.0).exp() / (2.0 * PI).sqrt();
    integrate(&pdf, x, x + 40.0, &[x + 1.0, x + 4.0, x + 10.0], 1e-18)
}

/// Whole steps of `step_centis` in `horizon_centis`, both in hundredths of
/// a second.
pub fn steps_within_centis(horizon_centis: u64, step_centis: u64) -> u64 {
    horizon_centis / step_centis
}
