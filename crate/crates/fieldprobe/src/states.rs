//! Gaussian (quasifree) states of the free field bank.
//!
//! A state is fixed by a one-point functional V and a truncated two-point
//! functional S; Weyl generators evaluate to exp(i V(F) - S(F,F)/2). The
//! vacuum realizes S by spatial mode sums whose time phases Omega_k solve
//! the discrete dispersion relation cos(Omega_k dt) = 1 - omega_k^2
//! dt^2 / 2 of the leapfrog update, normalized by the discrete frequency
//! sin(Omega_k dt)/dt. With that choice the antisymmetric part of the
//! two-point function reproduces the marching-solve commutator pairing to
//! roundoff, which is what ties the state to the dynamics.
//!
//! Coherent displacements add a one-point functional V(F) = pairing(F, j)
//! for a real source j, leaving the truncated two-point part untouched.

use num_complex::Complex64 as C64;

use crate::algebra::{canonical_data_slices, AlgebraContext, PolyObservable, SmearingClass, WeylSum};
use crate::error::{Error, Result};
use crate::green::CoupledOperator;
use crate::grid::{GridFunction, MultiComponentFunction};
use crate::lattice::Lattice;

/// Mode table of one free field component on the lattice.
#[derive(Debug, Clone)]
struct ModeTable {
    /// 1 / (2 sin(Omega_k dt)/dt) per mode.
    weight: Vec<f64>,
    /// Positive-frequency mode data at the two canonical slices:
    /// u_k(t, x) = exp(i 2 pi k x / n_x) exp(-i Omega_k t dt),
    /// flattened as [k][slice][x].
    mode_data: Vec<C64>,
}

impl ModeTable {
    fn build(lattice: Lattice, mass: f64) -> Result<Self> {
        let n_x = lattice.n_x;
        let (mid, _) = canonical_data_slices(lattice);
        let mut weight = Vec::with_capacity(n_x);
        let mut mode_data = vec![C64::ZERO; n_x * 2 * n_x];
        for k in 0..n_x {
            let s = (std::f64::consts::PI * k as f64 / n_x as f64).sin();
            let omega_sq = 4.0 * s * s / (lattice.dx * lattice.dx) + mass * mass;
            let omega_dt = omega_sq.sqrt() * lattice.dt;
            if omega_dt >= 2.0 {
                return Err(Error::ModeInstability { mode: k, omega_dt });
            }
            let cos_big = 1.0 - omega_sq * lattice.dt * lattice.dt / 2.0;
            let big_omega = cos_big.acos() / lattice.dt;
            let s_hat = (big_omega * lattice.dt).sin() / lattice.dt;
            weight.push(1.0 / (2.0 * s_hat));
            for slice in 0..2 {
                let t = (mid + slice) as f64;
                let time_phase = C64::from_polar(1.0, -big_omega * t * lattice.dt);
                for x in 0..n_x {
                    let spatial = C64::from_polar(
                        1.0,
                        2.0 * std::f64::consts::PI * (k as f64) * (x as f64) / n_x as f64,
                    );
                    mode_data[(k * 2 + slice) * n_x + x] = spatial * time_phase;
                }
            }
        }
        Ok(Self { weight, mode_data })
    }

    #[inline]
    fn mode(&self, n_x: usize, k: usize, slice: usize, x: usize) -> C64 {
        self.mode_data[(k * 2 + slice) * n_x + x]
    }
}

/// One component of a quasifree state: a mass fixing the vacuum mode
/// table, plus an optional coherent displacement.
#[derive(Debug, Clone)]
struct StateComponent {
    mass: f64,
    table: ModeTable,
    /// The classical solution generated by the displacement source,
    /// absent for the vacuum. Its restriction to the canonical slices
    /// feeds the one-point flux; pointwise values feed the kernel.
    displacement: Option<GridFunction>,
}

/// A Gaussian state over one or more field components.
#[derive(Debug, Clone)]
pub struct QuasifreeState {
    lattice: Lattice,
    components: Vec<StateComponent>,
}

impl QuasifreeState {
    /// The lattice vacuum of a single field of the given mass.
    ///
    /// Every spatial mode must satisfy the leapfrog stability bound
    /// omega_k dt < 2; the periodic zero mode makes this fail for
    /// nonpositive masses, which are rejected.
    pub fn vacuum(lattice: Lattice, mass: f64) -> Result<Self> {
        if mass <= 0.0 || mass.is_nan() {
            return Err(Error::NonpositiveMass(mass));
        }
        let table = ModeTable::build(lattice, mass)?;
        Ok(Self {
            lattice,
            components: vec![StateComponent { mass, table, displacement: None }],
        })
    }

    /// A coherent state: the vacuum displaced by the classical solution
    /// generated from a real compactly supported source.
    pub fn coherent(lattice: Lattice, mass: f64, source: &GridFunction) -> Result<Self> {
        if !source.is_real() {
            return Err(Error::RealInputRequired);
        }
        let mut state = Self::vacuum(lattice, mass)?;
        let op = CoupledOperator::free_scalar(lattice, mass)?;
        let src = MultiComponentFunction::new(vec![source.clone()])?;
        let sol = op.propagator_unchecked(&src)?;
        state.components[0].displacement = Some(sol.component(0).clone());
        Ok(state)
    }

    /// Product state of independent component states, concatenated in
    /// order; V and S become block-diagonal.
    pub fn product(parts: Vec<QuasifreeState>) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::LayoutMismatch);
        };
        let lattice = first.lattice;
        let mut components = Vec::new();
        for p in parts {
            if p.lattice != lattice {
                return Err(Error::LatticeMismatch);
            }
            components.extend(p.components);
        }
        Ok(Self { lattice, components })
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.mass).collect()
    }

    /// True when every component has a vanishing one-point function.
    pub fn is_centered(&self) -> bool {
        self.components.iter().all(|c| c.displacement.is_none())
    }

    /// True when one component has a vanishing one-point function.
    pub fn component_is_centered(&self, i: usize) -> bool {
        self.components[i].displacement.is_none()
    }

    fn check_context(&self, ctx: &AlgebraContext) -> Result<()> {
        if ctx.lattice() != self.lattice
            || ctx.n_components() != self.components.len()
            || ctx.op().masses() != self.masses().as_slice()
        {
            return Err(Error::LayoutMismatch);
        }
        Ok(())
    }

    /// Two-slice flux of class data against an exact lattice solution,
    /// restricted to one component. Equals the smeared integral of the
    /// representative against the solution.
    fn component_flux(
        &self,
        class_data: &[C64],
        component: usize,
        mode: impl Fn(usize, usize) -> C64,
    ) -> C64 {
        let n_x = self.lattice.n_x;
        let base = component * 2 * n_x;
        let mut acc = C64::ZERO;
        for x in 0..n_x {
            let f0 = class_data[base + x];
            let f1 = class_data[base + n_x + x];
            acc += f0 * mode(1, x) - f1 * mode(0, x);
        }
        acc * (self.lattice.dx / self.lattice.dt)
    }

    /// One-point functional V on a smearing class.
    pub fn one_point(&self, ctx: &AlgebraContext, f: &SmearingClass) -> Result<C64> {
        self.check_context(ctx)?;
        let (mid, _) = canonical_data_slices(self.lattice);
        let mut acc = C64::ZERO;
        for (a, comp) in self.components.iter().enumerate() {
            if let Some(disp) = &comp.displacement {
                acc += self.component_flux(f.data(), a, |slice, x| disp.value(mid + slice, x));
            }
        }
        Ok(acc)
    }

    /// Truncated two-point functional S(f, g); bilinear, no conjugation.
    pub fn two_point(&self, ctx: &AlgebraContext, f: &SmearingClass, g: &SmearingClass) -> Result<C64> {
        self.check_context(ctx)?;
        let n_x = self.lattice.n_x;
        let norm = 1.0 / (n_x as f64 * self.lattice.dx);
        let mut acc = C64::ZERO;
        for (a, comp) in self.components.iter().enumerate() {
            for k in 0..n_x {
                let pf = self.component_flux(f.data(), a, |slice, x| comp.table.mode(n_x, k, slice, x));
                if pf == C64::ZERO {
                    continue;
                }
                let pg = self.component_flux(g.data(), a, |slice, x| {
                    comp.table.mode(n_x, k, slice, x).conj()
                });
                acc += pf * pg * comp.table.weight[k];
            }
        }
        Ok(acc * norm)
    }

    /// Symmetrized truncated two-point (S(f,g) + S(g,f)) / 2.
    pub fn two_point_sym(&self, ctx: &AlgebraContext, f: &SmearingClass, g: &SmearingClass) -> Result<C64> {
        Ok((self.two_point(ctx, f, g)? + self.two_point(ctx, g, f)?) / 2.0)
    }

    /// Full two-point functional W = S + V (x) V.
    pub fn full_two_point(&self, ctx: &AlgebraContext, f: &SmearingClass, g: &SmearingClass) -> Result<C64> {
        Ok(self.two_point(ctx, f, g)? + self.one_point(ctx, f)? * self.one_point(ctx, g)?)
    }

    /// Expectation of a single Weyl generator exp(i X(F)).
    pub fn weyl_generator_expectation(&self, ctx: &AlgebraContext, f: &SmearingClass) -> Result<C64> {
        let v = self.one_point(ctx, f)?;
        let s = self.two_point(ctx, f, f)?;
        Ok((C64::i() * v - s / 2.0).exp())
    }

    /// Expectation of a Weyl sum: the linear extension of the generator
    /// formula exp(i V(F) - S(F,F)/2).
    pub fn expectation_weyl(&self, ctx: &AlgebraContext, a: &WeylSum) -> Result<C64> {
        let mut acc = C64::ZERO;
        for (c, f) in a.terms() {
            acc += c * self.weyl_generator_expectation(ctx, f)?;
        }
        Ok(acc)
    }

    /// Expectation of a degree <= 2 polynomial by Wick evaluation:
    /// E[X(f)] = V(f), E[X(f) X(g)] = S(f,g) + V(f) V(g).
    pub fn expectation_poly(&self, ctx: &AlgebraContext, p: &PolyObservable) -> Result<C64> {
        let mut acc = p.constant_part();
        for (c, f) in p.linear_terms() {
            acc += c * self.one_point(ctx, f)?;
        }
        for (c, f, g) in p.quadratic_terms() {
            // symmetric pair: expectation of (X(f)X(g) + X(g)X(f)) / 2
            let sym = self.two_point_sym(ctx, f, g)? + self.one_point(ctx, f)? * self.one_point(ctx, g)?;
            acc += c * sym;
        }
        Ok(acc)
    }

    /// Variance of the field smeared with a class.
    pub fn variance(&self, ctx: &AlgebraContext, f: &SmearingClass) -> Result<f64> {
        Ok(self.two_point(ctx, f, f)?.re)
    }

    /// First moment against a Weyl generator:
    /// E[X(F) exp(i X(G))] = mu(F, G) E[exp(i X(G))] with
    /// mu = V(F) - E(F,G)/2 + i (S(F,G) + S(G,F))/2.
    pub fn moment1_weyl(
        &self,
        ctx: &AlgebraContext,
        f: &SmearingClass,
        g: &SmearingClass,
    ) -> Result<C64> {
        let mu = self.mu(ctx, f, g)?;
        Ok(mu * self.weyl_generator_expectation(ctx, g)?)
    }

    fn mu(&self, ctx: &AlgebraContext, f: &SmearingClass, g: &SmearingClass) -> Result<C64> {
        let v = self.one_point(ctx, f)?;
        let e = ctx.pairing(f, g)?;
        let s_sym = self.two_point_sym(ctx, f, g)?;
        Ok(v - e / 2.0 + C64::i() * s_sym)
    }

    /// Second moment against a Weyl generator:
    /// E[X(F1) X(F2) exp(i X(G))] =
    /// (mu(F1,G) mu(F2,G) + i E(F1,F2)/2 + S_sym(F1,F2))
    /// * E[exp(i X(G))].
    pub fn moment2_weyl(
        &self,
        ctx: &AlgebraContext,
        f1: &SmearingClass,
        f2: &SmearingClass,
        g: &SmearingClass,
    ) -> Result<C64> {
        let mu1 = self.mu(ctx, f1, g)?;
        let mu2 = self.mu(ctx, f2, g)?;
        let e12 = ctx.pairing(f1, f2)?;
        let s12 = self.two_point_sym(ctx, f1, f2)?;
        Ok((mu1 * mu2 + C64::i() * e12 / 2.0 + s12) * self.weyl_generator_expectation(ctx, g)?)
    }

    /// Two-point kernel value W((t, x), (t', x')) for unsmeared cells, by
    /// direct mode summation. Used by the worldline response integral.
    pub fn kernel(&self, component: usize, t: usize, x: usize, t2: usize, x2: usize) -> C64 {
        let comp = &self.components[component];
        let n_x = self.lattice.n_x;
        let mut acc = C64::ZERO;
        for k in 0..n_x {
            let s = (std::f64::consts::PI * k as f64 / n_x as f64).sin();
            let omega_sq = 4.0 * s * s / (self.lattice.dx * self.lattice.dx) + comp.mass * comp.mass;
            let cos_big = 1.0 - omega_sq * self.lattice.dt * self.lattice.dt / 2.0;
            let big_omega = cos_big.acos() / self.lattice.dt;
            let phase = C64::from_polar(
                1.0,
                2.0 * std::f64::consts::PI * k as f64 * (x as f64 - x2 as f64) / n_x as f64
                    - big_omega * (t as f64 - t2 as f64) * self.lattice.dt,
            );
            acc += phase * comp.table.weight[k];
        }
        let mut w = acc / (n_x as f64 * self.lattice.dx);
        if let Some(disp) = &comp.displacement {
            w += disp.value(t, x) * disp.value(t2, x2);
        }
        w
    }
}
