#![allow(dead_code)]

//! Shared test oracles, independent of the marching-solve code paths:
//! a dense assembled-matrix Green solve and a spatial mode-sum
//! propagator, plus random input generators.

use fieldprobe::{CoupledOperator, GreenDirection, GridFunction, Lattice, MultiComponentFunction};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Dense oracle: assembles the full operator matrix with the marching
/// boundary rows and solves it by LU factorization.
pub fn dense_green_solve(
    op: &CoupledOperator,
    direction: GreenDirection,
    f: &MultiComponentFunction,
) -> MultiComponentFunction {
    let lat = op.lattice();
    let (n_t, n_x) = (lat.n_t, lat.n_x);
    let comps = op.n_components();
    let n = comps * n_t * n_x;
    let idx = |a: usize, t: usize, x: usize| (a * n_t + t) * n_x + (x % n_x);
    let mut m = DMatrix::<C64>::zeros(n, n);
    let mut rhs = DMatrix::<C64>::zeros(n, 1);
    let idt2 = 1.0 / (lat.dt * lat.dt);
    let idx2 = 1.0 / (lat.dx * lat.dx);
    let mut row = 0usize;
    for a in 0..comps {
        let mass = op.masses()[a];
        for t in 1..n_t - 1 {
            for x in 0..n_x {
                m[(row, idx(a, t + 1, x))] += C64::from(idt2);
                m[(row, idx(a, t - 1, x))] += C64::from(idt2);
                m[(row, idx(a, t, x))] += C64::from(-2.0 * idt2 + 2.0 * idx2 + mass * mass);
                m[(row, idx(a, t, x + 1))] += C64::from(-idx2);
                m[(row, idx(a, t, x + n_x - 1))] += C64::from(-idx2);
                for coupling in op.couplings() {
                    let w = coupling.values()[lat.index(t, x)];
                    if w != 0.0 {
                        if coupling.a == a {
                            m[(row, idx(coupling.b, t, x))] += C64::from(w);
                        }
                        if coupling.b == a {
                            m[(row, idx(coupling.a, t, x))] += C64::from(w);
                        }
                    }
                }
                rhs[(row, 0)] = f.component(a).value(t, x);
                row += 1;
            }
        }
        // data rows pin the zero slices on the marching side
        let (b0, b1) = match direction {
            GreenDirection::Retarded => (0, 1),
            GreenDirection::Advanced => (n_t - 1, n_t - 2),
        };
        for x in 0..n_x {
            for t in [b0, b1] {
                m[(row, idx(a, t, x))] = C64::ONE;
                rhs[(row, 0)] = C64::ZERO;
                row += 1;
            }
        }
    }
    assert_eq!(row, n);
    let solution = m.lu().solve(&rhs).expect("assembled operator is invertible");
    let mut out = MultiComponentFunction::zeros(lat, comps);
    for a in 0..comps {
        for t in 0..n_t {
            for x in 0..n_x {
                out.component_mut(a).set(t, x, solution[(idx(a, t, x), 0)]);
            }
        }
    }
    out
}

/// Mode-sum oracle for the causal propagator of a single free field:
/// spatial Fourier transform, per-mode discrete oscillator kernel,
/// inverse transform. No marching involved.
pub fn mode_sum_propagator(lattice: Lattice, mass: f64, f: &GridFunction) -> GridFunction {
    let (n_t, n_x) = (lattice.n_t, lattice.n_x);
    // spatial Fourier coefficients per slice
    let mut fhat = vec![C64::ZERO; n_t * n_x];
    for k in 0..n_x {
        for t in 0..n_t {
            let mut acc = C64::ZERO;
            for x in 0..n_x {
                let phase = C64::from_polar(
                    1.0,
                    -2.0 * std::f64::consts::PI * (k as f64) * (x as f64) / n_x as f64,
                );
                acc += f.value(t, x) * phase;
            }
            fhat[k * n_t + t] = acc / n_x as f64;
        }
    }
    let mut out = GridFunction::zeros(lattice);
    for k in 0..n_x {
        let s = (std::f64::consts::PI * k as f64 / n_x as f64).sin();
        let omega_sq = 4.0 * s * s / (lattice.dx * lattice.dx) + mass * mass;
        let theta = (1.0 - omega_sq * lattice.dt * lattice.dt / 2.0).acos();
        let sin_theta = theta.sin();
        // kernel K(n, n') = -dt^2 sin((n - n') theta) / sin(theta)
        for n in 0..n_t {
            let mut acc = C64::ZERO;
            for n2 in 0..n_t {
                let kernel = -lattice.dt * lattice.dt * ((n as f64 - n2 as f64) * theta).sin() / sin_theta;
                acc += fhat[k * n_t + n2] * kernel;
            }
            for x in 0..n_x {
                let phase = C64::from_polar(
                    1.0,
                    2.0 * std::f64::consts::PI * (k as f64) * (x as f64) / n_x as f64,
                );
                let prev = out.value(n, x);
                out.set(n, x, prev + acc * phase);
            }
        }
    }
    out
}

/// A clustered random complex smearing inside the given slice band.
pub fn clustered_smearing(
    rng: &mut ChaCha12Rng,
    lattice: Lattice,
    t_lo: usize,
    t_hi: usize,
    real: bool,
) -> GridFunction {
    let mut g = GridFunction::zeros(lattice);
    let t0 = rng.random_range(t_lo..t_hi.max(t_lo + 1));
    let x0 = rng.random_range(0..lattice.n_x);
    for _ in 0..5 {
        let t = (t0 + rng.random_range(0..3)).min(lattice.n_t - 3);
        let x = (x0 + rng.random_range(0..5)) % lattice.n_x;
        let im = if real { 0.0 } else { rng.random_range(-1.0..1.0) };
        g.set(t, x, C64::new(rng.random_range(-1.0..1.0), im));
    }
    g
}

/// Relative max-norm difference of two multi-component functions.
pub fn rel_inf_diff(a: &MultiComponentFunction, b: &MultiComponentFunction) -> f64 {
    let scale = a.norm_inf().max(b.norm_inf()).max(1e-300);
    a.sub(b).expect("same layout").norm_inf() / scale
}
