//! Discrete Klein-Gordon operators (free, probe-coupled, multi-probe) and
//! their exact retarded/advanced Green operators.
//!
//! The operator is the 3-point leapfrog stencil in time plus the 3-point
//! periodic Laplacian in space. Its domain of dependence is exactly the
//! unit-slope cell cone, so the support containment of Green solutions
//! holds with exact zeros, not just small values. Green operators are
//! realized as marching solves, never as stored matrices; a dense
//! triangular solve serves as a test oracle only.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, MultiComponentFunction};
use crate::lattice::{Lattice, Region};

/// Marching direction of a Green solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GreenDirection {
    /// Output supported in the causal future of the source; forward
    /// marching from zero past data.
    Retarded,
    /// Output supported in the causal past; backward marching from zero
    /// future data.
    Advanced,
}

/// One off-diagonal coupling entry: a real profile multiplying component
/// `b` in the equation of component `a` and vice versa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingProfile {
    pub a: usize,
    pub b: usize,
    values: Vec<f64>,
}

impl CouplingProfile {
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A diagonal bank of Klein-Gordon operators plus a symmetric
/// off-diagonal multiplicative coupling with compact support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledOperator {
    lattice: Lattice,
    masses: Vec<f64>,
    couplings: Vec<CouplingProfile>,
}

impl CoupledOperator {
    /// Free bank of fields: no coupling.
    pub fn free(lattice: Lattice, masses: Vec<f64>) -> Result<Self> {
        for &m in &masses {
            if m <= 0.0 || m.is_nan() {
                return Err(Error::NonpositiveMass(m));
            }
        }
        if masses.is_empty() {
            return Err(Error::LayoutMismatch);
        }
        Ok(Self { lattice, masses, couplings: Vec::new() })
    }

    /// Single free scalar field.
    pub fn free_scalar(lattice: Lattice, mass: f64) -> Result<Self> {
        Self::free(lattice, vec![mass])
    }

    /// Adds a symmetric coupling profile between components `a` and `b`.
    ///
    /// The profile must be real, must not sit on the diagonal, and its
    /// support must stay away from the first and last lattice slices so
    /// that the in/out regions contain full time slices.
    pub fn with_coupling(mut self, a: usize, b: usize, profile: &GridFunction) -> Result<Self> {
        if a == b || a >= self.masses.len() || b >= self.masses.len() {
            return Err(Error::LayoutMismatch);
        }
        if profile.lattice() != self.lattice {
            return Err(Error::LatticeMismatch);
        }
        if !profile.is_real() {
            return Err(Error::ComplexCoupling);
        }
        let support = profile.support();
        if !support.is_empty() {
            let t0 = support.t_min().unwrap();
            let t1 = support.t_max().unwrap();
            if t0 < 2 || t1 + 4 > self.lattice.n_t {
                return Err(Error::CouplingTouchesBoundary);
            }
        }
        let values = profile.values().iter().map(|v| v.re).collect();
        self.couplings.push(CouplingProfile { a: a.min(b), b: a.max(b), values });
        Ok(self)
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn n_components(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn couplings(&self) -> &[CouplingProfile] {
        &self.couplings
    }

    pub fn is_free(&self) -> bool {
        self.couplings.iter().all(|c| c.values.iter().all(|v| *v == 0.0))
    }

    /// The same diagonal bank with every coupling removed.
    pub fn free_part(&self) -> Self {
        Self { lattice: self.lattice, masses: self.masses.clone(), couplings: Vec::new() }
    }

    /// Adds an existing coupling profile unchanged.
    pub fn with_coupling_profile(mut self, profile: &CouplingProfile) -> Result<Self> {
        if profile.a >= self.masses.len() || profile.b >= self.masses.len() {
            return Err(Error::LayoutMismatch);
        }
        self.couplings.push(profile.clone());
        Ok(self)
    }

    /// The same operator with every coupling profile multiplied by `s`.
    pub fn scaled_coupling(&self, s: f64) -> Self {
        let couplings = self
            .couplings
            .iter()
            .map(|c| CouplingProfile {
                a: c.a,
                b: c.b,
                values: c.values.iter().map(|v| v * s).collect(),
            })
            .collect();
        Self { lattice: self.lattice, masses: self.masses.clone(), couplings }
    }

    /// Union of the coupling supports (the region K).
    pub fn coupling_region(&self) -> Region {
        let mut r = Region::empty(self.lattice);
        for c in &self.couplings {
            let cells = (0..self.lattice.n_t).flat_map(|t| {
                (0..self.lattice.n_x)
                    .filter(|&x| c.values[self.lattice.index(t, x)] != 0.0)
                    .map(move |x| crate::lattice::Cell::new(t, x))
                    .collect::<Vec<_>>()
            });
            let s = Region::new(self.lattice, cells).expect("in range");
            r = r.union(&s).expect("same lattice");
        }
        r
    }

    fn check_layout(&self, f: &MultiComponentFunction) -> Result<()> {
        if f.lattice() != self.lattice {
            return Err(Error::LatticeMismatch);
        }
        if f.n_components() != self.masses.len() {
            return Err(Error::LayoutMismatch);
        }
        Ok(())
    }

    /// Applies the off-diagonal coupling part only.
    pub fn coupling_apply(&self, f: &MultiComponentFunction) -> Result<MultiComponentFunction> {
        self.check_layout(f)?;
        let mut out = MultiComponentFunction::zeros(self.lattice, self.masses.len());
        for c in &self.couplings {
            let ga = f.component(c.b).mul_profile(&c.values);
            let gb = f.component(c.a).mul_profile(&c.values);
            *out.component_mut(c.a) = out.component(c.a).add(&ga)?;
            *out.component_mut(c.b) = out.component(c.b).add(&gb)?;
        }
        Ok(out)
    }

    /// Applies the full operator. The result is defined on interior time
    /// slices; the first and last slice of the output are zero.
    pub fn apply(&self, f: &MultiComponentFunction) -> Result<MultiComponentFunction> {
        self.check_layout(f)?;
        let lat = self.lattice;
        let (n_t, n_x) = (lat.n_t, lat.n_x);
        let idt2 = 1.0 / (lat.dt * lat.dt);
        let idx2 = 1.0 / (lat.dx * lat.dx);
        let coupled = self.coupling_apply(f)?;
        let mut out = MultiComponentFunction::zeros(lat, self.masses.len());
        for (a, &m) in self.masses.iter().enumerate() {
            let src = f.component(a);
            let cpl = coupled.component(a);
            let dst = out.component_mut(a);
            for t in 1..n_t - 1 {
                for x in 0..n_x {
                    let up = src.value(t + 1, x);
                    let mid = src.value(t, x);
                    let down = src.value(t - 1, x);
                    let left = src.value(t, (x + n_x - 1) % n_x);
                    let right = src.value(t, (x + 1) % n_x);
                    let v = (up - 2.0 * mid + down) * idt2 - (left - 2.0 * mid + right) * idx2
                        + mid * (m * m)
                        + cpl.value(t, x);
                    dst.set(t, x, v);
                }
            }
        }
        Ok(out)
    }

    /// Marching Green solve without precondition checks. Exactness of the
    /// one-sided inverse identities and of the cone support containment
    /// does not depend on the checks, which exist to keep results
    /// interpretable.
    pub(crate) fn march(&self, direction: GreenDirection, f: &MultiComponentFunction) -> Result<MultiComponentFunction> {
        self.check_layout(f)?;
        let lat = self.lattice;
        let (n_t, n_x) = (lat.n_t, lat.n_x);
        let c = self.masses.len();
        let dt2 = lat.dt * lat.dt;
        let idx2 = 1.0 / (lat.dx * lat.dx);
        let mut phi = MultiComponentFunction::zeros(lat, c);
        // coupling values at the current slice, per component
        let mut cpl = vec![C64::ZERO; n_x * c];
        let steps: Vec<usize> = match direction {
            GreenDirection::Retarded => (1..n_t - 1).collect(),
            GreenDirection::Advanced => (1..n_t - 1).rev().collect(),
        };
        for n in steps {
            for v in cpl.iter_mut() {
                *v = C64::ZERO;
            }
            for cp in &self.couplings {
                for x in 0..n_x {
                    let w = cp.values[lat.index(n, x)];
                    if w != 0.0 {
                        cpl[cp.a * n_x + x] += phi.component(cp.b).value(n, x) * w;
                        cpl[cp.b * n_x + x] += phi.component(cp.a).value(n, x) * w;
                    }
                }
            }
            for (a, &m) in self.masses.iter().enumerate() {
                for x in 0..n_x {
                    let mid = phi.component(a).value(n, x);
                    let left = phi.component(a).value(n, (x + n_x - 1) % n_x);
                    let right = phi.component(a).value(n, (x + 1) % n_x);
                    let lap = (left - 2.0 * mid + right) * idx2;
                    let rhs = f.component(a).value(n, x) + lap - mid * (m * m) - cpl[a * n_x + x];
                    let (known_t, new_t) = match direction {
                        GreenDirection::Retarded => (n - 1, n + 1),
                        GreenDirection::Advanced => (n + 1, n - 1),
                    };
                    let known = phi.component(a).value(known_t, x);
                    let v = 2.0 * mid - known + rhs * dt2;
                    phi.component_mut(a).set(new_t, x, v);
                }
            }
        }
        Ok(phi)
    }

    fn check_green_preconditions(&self, direction: GreenDirection, f: &MultiComponentFunction) -> Result<()> {
        let support = f.support();
        if support.is_empty() {
            return Ok(());
        }
        let n_t = self.lattice.n_t;
        match direction {
            GreenDirection::Retarded => {
                if support.t_max().unwrap() + 2 >= n_t {
                    return Err(Error::SupportTouchesBoundary);
                }
                if support.cone_wraps_directed(true) {
                    return Err(Error::ConeWrap);
                }
            }
            GreenDirection::Advanced => {
                if support.t_min().unwrap() < 2 {
                    return Err(Error::SupportTouchesBoundary);
                }
                if support.cone_wraps_directed(false) {
                    return Err(Error::ConeWrap);
                }
            }
        }
        Ok(())
    }

    /// Exact one-sided Green solve with precondition checks.
    pub fn green_apply(&self, direction: GreenDirection, f: &MultiComponentFunction) -> Result<MultiComponentFunction> {
        self.check_green_preconditions(direction, f)?;
        self.march(direction, f)
    }

    /// A handle pairing this operator with a marching direction.
    pub fn green(&self, direction: GreenDirection) -> GreenOperator<'_> {
        GreenOperator { op: self, direction }
    }

    /// Causal propagator application: advanced minus retarded solve. The
    /// result solves the homogeneous equation on interior slices.
    pub fn causal_propagator(&self, f: &MultiComponentFunction) -> Result<MultiComponentFunction> {
        let adv = self.green_apply(GreenDirection::Advanced, f)?;
        let ret = self.green_apply(GreenDirection::Retarded, f)?;
        adv.sub(&ret)
    }

    /// Causal propagator without wrap/boundary checks, for internal use
    /// where the algebraic identities are all that matters.
    pub(crate) fn propagator_unchecked(&self, f: &MultiComponentFunction) -> Result<MultiComponentFunction> {
        let adv = self.march(GreenDirection::Advanced, f)?;
        let ret = self.march(GreenDirection::Retarded, f)?;
        adv.sub(&ret)
    }

    /// The bilinear pairing dt*dx * sum over cells and components of
    /// F * (E G). Antisymmetric in (F, G) for real inputs; vanishes when
    /// the supports are causally disjoint.
    pub fn pairing(&self, f: &MultiComponentFunction, g: &MultiComponentFunction) -> Result<C64> {
        self.check_layout(f)?;
        let eg = self.causal_propagator(g)?;
        Ok(self.integrate(f, &eg))
    }

    /// dt*dx * sum of the pointwise product, over cells and components.
    pub fn integrate(&self, f: &MultiComponentFunction, g: &MultiComponentFunction) -> C64 {
        let mut acc = C64::ZERO;
        for a in 0..f.n_components() {
            let fa = f.component(a).values();
            let ga = g.component(a).values();
            for (u, v) in fa.iter().zip(ga) {
                acc += u * v;
            }
        }
        acc * self.lattice.cell_volume()
    }

    /// Replaces F by F' = op(chi * E F), supported on the first two
    /// consecutive full time slices of `target`, without changing the
    /// propagator class: E F' = E F exactly.
    pub fn push_to_region(&self, f: &MultiComponentFunction, target: &Region) -> Result<MultiComponentFunction> {
        if target.lattice() != self.lattice {
            return Err(Error::LatticeMismatch);
        }
        let band = (1..self.lattice.n_t.saturating_sub(2)).find(|&s| {
            (0..self.lattice.n_x).all(|x| {
                target.contains(crate::lattice::Cell::new(s, x))
                    && target.contains(crate::lattice::Cell::new(s + 1, x))
            })
        });
        let Some(s) = band else {
            return Err(Error::TargetLacksSlices);
        };
        self.push_to_band(f, s)
    }

    /// Same as `push_to_region` with the band start slice given directly.
    pub fn push_to_band(&self, f: &MultiComponentFunction, s: usize) -> Result<MultiComponentFunction> {
        self.check_layout(f)?;
        if s < 1 || s + 2 >= self.lattice.n_t {
            return Err(Error::TargetLacksSlices);
        }
        let u = self.propagator_unchecked(f)?;
        let idt2 = 1.0 / (self.lattice.dt * self.lattice.dt);
        let mut out = MultiComponentFunction::zeros(self.lattice, self.masses.len());
        for a in 0..self.masses.len() {
            for x in 0..self.lattice.n_x {
                out.component_mut(a).set(s, x, -u.component(a).value(s + 1, x) * idt2);
                out.component_mut(a).set(s + 1, x, u.component(a).value(s, x) * idt2);
            }
        }
        Ok(out)
    }
}

/// A Green operator: an operator reference plus a marching direction.
#[derive(Debug, Clone, Copy)]
pub struct GreenOperator<'a> {
    op: &'a CoupledOperator,
    direction: GreenDirection,
}

impl GreenOperator<'_> {
    pub fn direction(&self) -> GreenDirection {
        self.direction
    }

    pub fn apply(&self, f: &MultiComponentFunction) -> Result<MultiComponentFunction> {
        self.op.green_apply(self.direction, f)
    }
}

/// Truncated Born expansion of the advanced solve of `op` with coupling
/// scale `lambda`: sum over k <= order of (-lambda)^k (E0 R)^k E0 F, where
/// E0 is the advanced Green operator of the free part and R the coupling.
pub fn born_series(
    op: &CoupledOperator,
    lambda: f64,
    f: &MultiComponentFunction,
    order: usize,
) -> Result<MultiComponentFunction> {
    let free = op.free_part();
    let mut term = free.green_apply(GreenDirection::Advanced, f)?;
    let mut acc = term.clone();
    for _ in 1..=order {
        let coupled = op.coupling_apply(&term)?;
        term = free.green_apply(GreenDirection::Advanced, &coupled)?.scaled(C64::from(-lambda));
        acc = acc.add(&term)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Cell;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn lat() -> Lattice {
        Lattice::new(24, 64, 0.7, 1.0).unwrap()
    }

    fn rho_rect(l: Lattice, amp: f64) -> GridFunction {
        GridFunction::from_fn(l, |t, x| {
            if (8..=11).contains(&t) && (9..=13).contains(&x) {
                C64::from(amp)
            } else {
                C64::ZERO
            }
        })
    }

    fn coupled_pair(l: Lattice) -> CoupledOperator {
        CoupledOperator::free(l, vec![0.9, 0.6])
            .unwrap()
            .with_coupling(0, 1, &rho_rect(l, 0.5))
            .unwrap()
    }

    fn random_interior(l: Lattice, comps: usize, seed: u64) -> MultiComponentFunction {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut f = MultiComponentFunction::zeros(l, comps);
        for a in 0..comps {
            // clustered blob, so its cones stay clear of the periodic wrap
            let t0 = rng.random_range(3..l.n_t - 6);
            let x0 = rng.random_range(0..l.n_x);
            for _ in 0..6 {
                let t = t0 + rng.random_range(0..3);
                let x = (x0 + rng.random_range(0..5)) % l.n_x;
                let v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                f.component_mut(a).set(t, x, v);
            }
        }
        f
    }

    #[test]
    fn difference_operators_annihilate_constants() {
        let l = lat();
        let m = 0.9;
        let op = CoupledOperator::free_scalar(l, m).unwrap();
        let f = MultiComponentFunction::new(vec![GridFunction::from_fn(l, |_, _| C64::ONE)]).unwrap();
        let out = op.apply(&f).unwrap();
        for t in 1..l.n_t - 1 {
            for x in 0..l.n_x {
                let v = out.component(0).value(t, x);
                assert!((v - C64::from(m * m)).norm() < 1e-13);
            }
        }
        for x in 0..l.n_x {
            assert_eq!(out.component(0).value(0, x), C64::ZERO);
            assert_eq!(out.component(0).value(l.n_t - 1, x), C64::ZERO);
        }
    }

    #[test]
    fn decoupled_apply_acts_componentwise() {
        let l = lat();
        let op = CoupledOperator::free(l, vec![0.9, 0.6]).unwrap();
        let g = GridFunction::delta(l, 10, 5).unwrap();
        let f = MultiComponentFunction::embed(l, 2, 0, g).unwrap();
        let out = op.apply(&f).unwrap();
        assert!(out.component(1).is_zero());
    }

    #[test]
    fn retarded_delta_is_fundamental_solution() {
        let l = lat();
        let op = coupled_pair(l);
        let delta = MultiComponentFunction::embed(l, 2, 0, GridFunction::delta(l, 6, 3).unwrap()).unwrap();
        let sol = op.green_apply(GreenDirection::Retarded, &delta).unwrap();
        let back = op.apply(&sol).unwrap();
        let diff = back.sub(&delta).unwrap();
        assert!(diff.norm_inf() < 1e-12, "op(E+ delta) != delta: {}", diff.norm_inf());
    }

    #[test]
    fn green_identities_hold_to_roundoff() {
        let l = lat();
        let op = coupled_pair(l);
        let f = random_interior(l, 2, 7);
        let scale = f.norm_inf();
        for dir in [GreenDirection::Retarded, GreenDirection::Advanced] {
            // op (E f) = f on interior slices
            let sol = op.green_apply(dir, &f).unwrap();
            let diff = op.apply(&sol).unwrap().sub(&f).unwrap();
            assert!(diff.norm_inf() / scale < 1e-12, "{dir:?}: {}", diff.norm_inf());
            // E (op f) = f
            let of = op.apply(&f).unwrap();
            let rec = op.green_apply(dir, &of).unwrap();
            let diff2 = rec.sub(&f).unwrap();
            assert!(diff2.norm_inf() / scale < 1e-12, "{dir:?}: {}", diff2.norm_inf());
        }
    }

    #[test]
    fn advanced_support_in_causal_past_exactly() {
        let l = lat();
        let op = coupled_pair(l);
        let h = GridFunction::delta(l, 17, 4).unwrap();
        let src = MultiComponentFunction::embed(l, 2, 1, h.clone()).unwrap();
        let sol = op.green_apply(GreenDirection::Advanced, &src).unwrap();
        let cone = h.support().causal_past().unwrap();
        for t in 0..l.n_t {
            for x in 0..l.n_x {
                if !cone.contains(Cell::new(t, x)) {
                    for a in 0..2 {
                        assert_eq!(sol.component(a).value(t, x), C64::ZERO, "leak at ({t},{x})");
                    }
                }
            }
        }
    }

    #[test]
    fn propagator_solves_homogeneous_equation() {
        let l = lat();
        let op = coupled_pair(l);
        let f = random_interior(l, 2, 3);
        let ef = op.causal_propagator(&f).unwrap();
        let residual = op.apply(&ef).unwrap();
        assert!(residual.norm_inf() / f.norm_inf().max(1.0) < 1e-12);
        // E (op f) = 0 for interior-supported f
        let of = op.apply(&f).unwrap();
        let e_of = op.causal_propagator(&of).unwrap();
        assert!(e_of.norm_inf() / f.norm_inf().max(1.0) < 1e-11);
    }

    #[test]
    fn pairing_antisymmetric_for_real_inputs() {
        let l = lat();
        let op = coupled_pair(l);
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..5 {
            let mut f = MultiComponentFunction::zeros(l, 2);
            let mut g = MultiComponentFunction::zeros(l, 2);
            for h in [&mut f, &mut g] {
                for a in 0..2 {
                    let t0 = rng.random_range(3..l.n_t - 6);
                    let x0 = rng.random_range(0..l.n_x);
                    for _ in 0..5 {
                        let t = t0 + rng.random_range(0..3);
                        let x = (x0 + rng.random_range(0..5)) % l.n_x;
                        h.component_mut(a).set(t, x, C64::from(rng.random_range(-1.0..1.0)));
                    }
                }
            }
            let fg = op.pairing(&f, &g).unwrap();
            let gf = op.pairing(&g, &f).unwrap();
            assert!((fg + gf).norm() < 1e-11 * fg.norm().max(1.0), "{fg} vs {gf}");
            let ff = op.pairing(&f, &f).unwrap();
            assert!(ff.norm() < 1e-12);
        }
    }

    #[test]
    fn pairing_of_causally_disjoint_sources_is_exactly_zero() {
        let l = lat();
        let op = CoupledOperator::free_scalar(l, 0.8).unwrap();
        let f = MultiComponentFunction::embed(l, 1, 0, GridFunction::delta(l, 11, 2).unwrap()).unwrap();
        let g = MultiComponentFunction::embed(l, 1, 0, GridFunction::delta(l, 11, 12).unwrap()).unwrap();
        assert_eq!(op.pairing(&f, &g).unwrap(), C64::ZERO);
    }

    #[test]
    fn push_preserves_propagator_class() {
        let l = lat();
        let op = coupled_pair(l);
        let f = random_interior(l, 2, 21);
        let target = Region::rect(l, 15, 18, 0, l.n_x - 1).unwrap();
        let pushed = op.push_to_region(&f, &target).unwrap();
        assert!(pushed.support().is_subset(&target));
        let ef = op.propagator_unchecked(&f).unwrap();
        let ef2 = op.propagator_unchecked(&pushed).unwrap();
        let diff = ef.sub(&ef2).unwrap();
        assert!(diff.norm_inf() / ef.norm_inf().max(1e-30) < 1e-11, "{}", diff.norm_inf());
        // pushing forward then backward keeps the on-shell class
        let back = op.push_to_band(&pushed, 4).unwrap();
        let ef3 = op.propagator_unchecked(&back).unwrap();
        let diff2 = ef.sub(&ef3).unwrap();
        assert!(diff2.norm_inf() / ef.norm_inf().max(1e-30) < 1e-10);
    }

    #[test]
    fn push_requires_two_full_slices() {
        let l = lat();
        let op = coupled_pair(l);
        let f = random_interior(l, 2, 2);
        let target = Region::rect(l, 15, 15, 0, l.n_x - 1).unwrap();
        assert!(matches!(op.push_to_region(&f, &target), Err(Error::TargetLacksSlices)));
        let partial = Region::rect(l, 15, 18, 0, l.n_x - 3).unwrap();
        assert!(matches!(op.push_to_region(&f, &partial), Err(Error::TargetLacksSlices)));
    }

    #[test]
    fn born_series_zeroth_order_and_decoupled_limit() {
        let l = lat();
        let op = coupled_pair(l);
        let h = MultiComponentFunction::embed(l, 2, 1, GridFunction::delta(l, 16, 10).unwrap()).unwrap();
        let order0 = born_series(&op, 0.3, &h, 0).unwrap();
        let free_sol = op.free_part().green_apply(GreenDirection::Advanced, &h).unwrap();
        assert_eq!(order0, free_sol);
        // at lambda = 0 the series telescopes to the exact decoupled solve
        let series = born_series(&op, 0.0, &h, 3).unwrap();
        let exact = op.scaled_coupling(0.0).green_apply(GreenDirection::Advanced, &h).unwrap();
        let diff = series.sub(&exact).unwrap();
        assert!(diff.norm_inf() < 1e-13);
    }

    #[test]
    fn born_error_scales_with_order() {
        let l = lat();
        let base = coupled_pair(l);
        let h = MultiComponentFunction::embed(l, 2, 1, GridFunction::delta(l, 16, 10).unwrap()).unwrap();
        for order in 0..=2 {
            let lambdas = [1e-2, 3e-3, 1e-3];
            let mut errs = Vec::new();
            for &lam in &lambdas {
                let exact = base.scaled_coupling(lam).green_apply(GreenDirection::Advanced, &h).unwrap();
                let approx = born_series(&base, lam, &h, order).unwrap();
                errs.push(exact.sub(&approx).unwrap().norm_inf());
            }
            let slope = crate::util::loglog_slope(&lambdas, &errs);
            let expected = (order + 1) as f64;
            assert!(
                (slope - expected).abs() < 0.15,
                "order {order}: slope {slope}, expected {expected}"
            );
        }
    }

    #[test]
    fn green_identities_hold_at_256() {
        // each direction gets a source band whose cone stays in-grid
        let l = Lattice::new(256, 256, 0.7, 1.0).unwrap();
        let op = CoupledOperator::free(l, vec![0.9, 0.6]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        for (dir, band) in [
            (GreenDirection::Advanced, (90usize, 110usize)),
            (GreenDirection::Retarded, (150usize, 170usize)),
        ] {
            let mut f = MultiComponentFunction::zeros(l, 2);
            let t0 = rng.random_range(band.0..band.1);
            let x0 = rng.random_range(0..l.n_x);
            for _ in 0..5 {
                f.component_mut(0).set(
                    t0 + rng.random_range(0..3),
                    (x0 + rng.random_range(0..5)) % l.n_x,
                    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                );
            }
            let sol = op.green_apply(dir, &f).unwrap();
            let diff = op.apply(&sol).unwrap().sub(&f).unwrap();
            assert!(diff.norm_inf() / f.norm_inf() < 1e-12, "{dir:?}: {}", diff.norm_inf());
        }
    }

    #[test]
    fn boundary_and_wrap_guards() {
        let l = lat();
        let op = coupled_pair(l);
        let late = MultiComponentFunction::embed(l, 2, 1, GridFunction::delta(l, l.n_t - 2, 3).unwrap()).unwrap();
        assert!(matches!(
            op.green_apply(GreenDirection::Retarded, &late),
            Err(Error::SupportTouchesBoundary)
        ));
        let early = MultiComponentFunction::embed(l, 2, 1, GridFunction::delta(l, 1, 3).unwrap()).unwrap();
        assert!(matches!(
            op.green_apply(GreenDirection::Advanced, &early),
            Err(Error::SupportTouchesBoundary)
        ));
        // a tall narrow lattice wraps
        let tall = Lattice::new(40, 8, 0.7, 1.0).unwrap();
        let opt = CoupledOperator::free_scalar(tall, 0.8).unwrap();
        let f = MultiComponentFunction::embed(tall, 1, 0, GridFunction::delta(tall, 30, 3).unwrap()).unwrap();
        assert!(matches!(opt.green_apply(GreenDirection::Advanced, &f), Err(Error::ConeWrap)));
    }
}
