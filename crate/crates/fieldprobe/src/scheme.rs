//! The scattering map of the probe-coupled model and everything derived
//! from it: scattered smearing pairs, induced system observables,
//! variance decomposition, the presymplectic form on probe classes and
//! the deformed product that makes the induced-observable map a
//! homomorphism.
//!
//! The scattering map acts on smearings as F -> F - R E_T^- F, where R
//! is the off-diagonal coupling and E_T^- the advanced Green operator of
//! the coupled dynamics. Inputs not supported in the out region are
//! first replaced by equivalent smearings on a canonical two-slice band
//! just after the coupling region; the replacement leaves the smeared
//! field unchanged, so results are reproducible bit for bit.

use num_complex::Complex64 as C64;

use crate::algebra::{AlgebraContext, PolyObservable, SmearingClass, WeylSum};
use crate::error::{Error, Result};
use crate::green::CoupledOperator;
use crate::grid::{GridFunction, MultiComponentFunction};
use crate::lattice::{Lattice, Region};
use crate::states::QuasifreeState;

/// Scattering data of one coupled model: the free bank, the coupled
/// operator, and the coupling region with its causal past.
#[derive(Debug, Clone)]
pub struct ScatteringContext {
    algebra: AlgebraContext,
    coupled: CoupledOperator,
    coupling_region: Region,
    past_of_coupling: Option<Region>,
}

impl ScatteringContext {
    /// Builds the context from a coupled operator; the free part and the
    /// coupling region are derived from it.
    pub fn new(coupled: CoupledOperator) -> Result<Self> {
        let algebra = AlgebraContext::new(coupled.free_part())?;
        let coupling_region = coupled.coupling_region();
        let past_of_coupling = if coupling_region.is_empty() {
            None
        } else {
            Some(coupling_region.causal_past()?)
        };
        Ok(Self { algebra, coupled, coupling_region, past_of_coupling })
    }

    /// Two-component system-probe model with one coupling profile.
    pub fn system_probe(
        lattice: Lattice,
        system_mass: f64,
        probe_mass: f64,
        coupling: &GridFunction,
    ) -> Result<Self> {
        let op = CoupledOperator::free(lattice, vec![system_mass, probe_mass])?
            .with_coupling(0, 1, coupling)?;
        Self::new(op)
    }

    pub fn algebra(&self) -> &AlgebraContext {
        &self.algebra
    }

    pub fn coupled_op(&self) -> &CoupledOperator {
        &self.coupled
    }

    pub fn lattice(&self) -> Lattice {
        self.algebra.lattice()
    }

    pub fn n_components(&self) -> usize {
        self.algebra.n_components()
    }

    /// The coupling region K.
    pub fn coupling_region(&self) -> &Region {
        &self.coupling_region
    }

    /// The out region M^+: complement of the causal past of K.
    pub fn out_region(&self) -> Result<Region> {
        match &self.past_of_coupling {
            None => Ok(Region::full(self.lattice())),
            Some(past) => Region::full(self.lattice()).difference(past),
        }
    }

    /// True when the support of `f` lies in the out region.
    pub fn is_out_supported(&self, f: &MultiComponentFunction) -> bool {
        match &self.past_of_coupling {
            None => true,
            Some(past) => f.support().cells().all(|c| !past.contains(c)),
        }
    }

    /// Canonical band start for auto-pushed inputs: the first slice after
    /// the coupling region.
    fn canonical_band(&self) -> Result<usize> {
        let t_max = self.coupling_region.t_max().ok_or(Error::EmptyRegion)?;
        let s = t_max + 1;
        if s + 3 > self.lattice().n_t {
            return Err(Error::TargetLacksSlices);
        }
        Ok(s)
    }

    /// Replaces F by an equivalent smearing supported in the out region,
    /// on the canonical band just after the coupling region. Inputs
    /// already out-supported are returned unchanged.
    pub fn ensure_out(&self, f: &MultiComponentFunction) -> Result<MultiComponentFunction> {
        if self.is_out_supported(f) {
            return Ok(f.clone());
        }
        let band = self.canonical_band()?;
        self.algebra.op().push_to_band(f, band)
    }

    /// The scattering map on smearings: F - R E_T^- F, after moving F to
    /// the out region if necessary.
    pub fn scatter(&self, f: &MultiComponentFunction) -> Result<MultiComponentFunction> {
        let out = self.ensure_out(f)?;
        let advanced = self.coupled.green_apply(crate::green::GreenDirection::Advanced, &out)?;
        let correction = self.coupled.coupling_apply(&advanced)?;
        out.sub(&correction)
    }

    /// Scatters a smearing class.
    pub fn scatter_class(&self, class: &SmearingClass) -> Result<SmearingClass> {
        self.algebra.class_of(&self.scatter(class.representative())?)
    }

    /// Scatters every term of a Weyl sum; the map preserves the CCR
    /// phases, so coefficients pass through unchanged.
    pub fn scatter_weyl(&self, a: &WeylSum) -> Result<WeylSum> {
        let mut terms = Vec::with_capacity(a.terms().len());
        for (c, f) in a.terms() {
            terms.push((*c, self.scatter_class(f)?));
        }
        self.algebra.weyl_sum(terms)
    }

    /// The scattered pair (f^-, h^-) of a probe smearing h: system and
    /// probe components of the scattered (0, h). Two-component models
    /// only.
    pub fn scattered_pair(&self, h: &GridFunction) -> Result<ScatteredPair> {
        if self.n_components() != 2 {
            return Err(Error::LayoutMismatch);
        }
        let src = MultiComponentFunction::embed(self.lattice(), 2, 1, h.clone())?;
        let scattered = self.scatter(&src)?;
        Ok(ScatteredPair {
            f_minus: scattered.component(0).clone(),
            h_minus: scattered.component(1).clone(),
        })
    }

    /// Restricts a class to a single component block, zeroing the rest.
    pub fn restrict_class(&self, class: &SmearingClass, component: usize) -> Result<SmearingClass> {
        let rep = MultiComponentFunction::embed(
            self.lattice(),
            self.n_components(),
            component,
            class.representative().component(component).clone(),
        )?;
        self.algebra.class_of(&rep)
    }

    /// Restricts a class to the probe block (all components except 0).
    pub fn restrict_probe_block(&self, class: &SmearingClass) -> Result<SmearingClass> {
        let mut rep = class.representative().clone();
        *rep.component_mut(0) = GridFunction::zeros(self.lattice());
        self.algebra.class_of(&rep)
    }

    /// Embeds a single-component function as a smearing class.
    pub fn embed_class(&self, component: usize, g: &GridFunction) -> Result<SmearingClass> {
        let rep = MultiComponentFunction::embed(self.lattice(), self.n_components(), component, g.clone())?;
        self.algebra.class_of(&rep)
    }

    /// The system observable induced by a probe Weyl sum, given the probe
    /// preparation carried by `prep`: termwise,
    /// c exp(i Psi(h)) maps to c sigma(exp(i Psi(h^-))) exp(i Phi(f^-)).
    pub fn induced_observable(&self, prep: &QuasifreeState, b: &WeylSum) -> Result<WeylSum> {
        let mut terms = Vec::with_capacity(b.terms().len());
        for (c, h) in b.terms() {
            if !h.component_is_zero(&self.algebra, 0) {
                return Err(Error::LayoutMismatch);
            }
            let scattered = self.scatter_class(h)?;
            let probe_part = self.restrict_probe_block(&scattered)?;
            let system_part = self.restrict_class(&scattered, 0)?;
            let sigma_factor = prep.weyl_generator_expectation(&self.algebra, &probe_part)?;
            terms.push((c * sigma_factor, system_part));
        }
        self.algebra.weyl_sum(terms)
    }

    /// The induced observable of a degree <= 2 probe polynomial, in
    /// closed form. A linear term maps to Phi(f^-) + V(h^-) 1; a
    /// symmetric quadratic pair maps to
    /// sym(Phi(f1^-), Phi(f2^-)) + V(h2^-) Phi(f1^-) + V(h1^-) Phi(f2^-)
    /// + (S_sym(h1^-, h2^-) + V(h1^-) V(h2^-)) 1.
    pub fn induced_poly(&self, prep: &QuasifreeState, p: &PolyObservable) -> Result<PolyObservable> {
        let ctx = &self.algebra;
        let mut out = PolyObservable::constant(p.constant_part());
        for (c, h) in p.linear_terms() {
            if !h.component_is_zero(ctx, 0) {
                return Err(Error::LayoutMismatch);
            }
            let scattered = self.scatter_class(h)?;
            let h_minus = self.restrict_probe_block(&scattered)?;
            let f_minus = self.restrict_class(&scattered, 0)?;
            let v = prep.one_point(ctx, &h_minus)?;
            out = out.add(&PolyObservable::field(f_minus).scaled(*c));
            out = out.add(&PolyObservable::constant(c * v));
        }
        for (c, h1, h2) in p.quadratic_terms() {
            for h in [h1, h2] {
                if !h.component_is_zero(ctx, 0) {
                    return Err(Error::LayoutMismatch);
                }
            }
            let s1 = self.scatter_class(h1)?;
            let s2 = self.scatter_class(h2)?;
            let h1m = self.restrict_probe_block(&s1)?;
            let h2m = self.restrict_probe_block(&s2)?;
            let f1m = self.restrict_class(&s1, 0)?;
            let f2m = self.restrict_class(&s2, 0)?;
            let v1 = prep.one_point(ctx, &h1m)?;
            let v2 = prep.one_point(ctx, &h2m)?;
            let s_sym = prep.two_point_sym(ctx, &h1m, &h2m)?;
            let mut quad = PolyObservable::constant(C64::ZERO);
            quad.push_quadratic(*c, f1m.clone(), f2m.clone());
            out = out.add(&quad);
            out = out.add(&PolyObservable::field(f1m).scaled(c * v2));
            out = out.add(&PolyObservable::field(f2m).scaled(c * v1));
            out = out.add(&PolyObservable::constant(c * (s_sym + v1 * v2)));
        }
        Ok(out)
    }

    /// Variance decomposition of the measurement of Psi(h): the total
    /// variance, computed independently through the induced polynomials,
    /// equals Var(Phi(f^-)) in the system state plus Var(Psi(h^-)) in the
    /// probe state.
    pub fn variance_report(&self, prep: &QuasifreeState, h: &GridFunction) -> Result<VarianceReport> {
        if !h.is_real() {
            return Err(Error::RealInputRequired);
        }
        let ctx = &self.algebra;
        let h_class = self.embed_class(1, h)?;
        let scattered = self.scatter_class(&h_class)?;
        let f_minus = self.restrict_class(&scattered, 0)?;
        let h_minus = self.restrict_probe_block(&scattered)?;
        let var_system = prep.variance(ctx, &f_minus)?;
        let var_probe = prep.variance(ctx, &h_minus)?;
        // independent path through the induced polynomials
        let linear = PolyObservable::field(h_class.clone());
        let mut square = PolyObservable::constant(C64::ZERO);
        square.push_quadratic(C64::ONE, h_class.clone(), h_class);
        let first = prep.expectation_poly(ctx, &self.induced_poly(prep, &linear)?)?;
        let second = prep.expectation_poly(ctx, &self.induced_poly(prep, &square)?)?;
        let var_total = (second - first * first).re;
        Ok(VarianceReport { var_total, var_system, var_probe })
    }

    /// Both sides of the characteristic-function factorization at one
    /// lambda: the measured expectation
    /// (omega (x) sigma)(Theta(1 (x) exp(i lambda Psi(h)))) and the
    /// product sigma(exp(i lambda Psi(h^-))) omega(exp(i lambda Phi(f^-))).
    pub fn characteristic_pair(
        &self,
        prep: &QuasifreeState,
        h: &GridFunction,
        lambda: f64,
    ) -> Result<(C64, C64)> {
        let ctx = &self.algebra;
        let h_class = self.embed_class(1, h)?.scale(C64::from(lambda));
        let measured = prep.expectation_weyl(
            ctx,
            &self.scatter_weyl(&ctx.weyl_generator(C64::ONE, h_class.clone())?)?,
        )?;
        let scattered = self.scatter_class(&h_class)?;
        let probe_factor = prep.weyl_generator_expectation(ctx, &self.restrict_probe_block(&scattered)?)?;
        let system_factor = prep.weyl_generator_expectation(ctx, &self.restrict_class(&scattered, 0)?)?;
        Ok((measured, probe_factor * system_factor))
    }

    /// The presymplectic form on probe classes: nu(h, h') = E(f^-, f'^-),
    /// the commutator pairing of the induced linear observables.
    pub fn presymplectic_nu(&self, h: &GridFunction, h2: &GridFunction) -> Result<f64> {
        if !h.is_real() || !h2.is_real() {
            return Err(Error::RealInputRequired);
        }
        let value = self.nu_class(&self.embed_class(1, h)?, &self.embed_class(1, h2)?)?;
        Ok(value.re)
    }

    /// nu on probe classes, complex-bilinear.
    pub fn nu_class(&self, h: &SmearingClass, h2: &SmearingClass) -> Result<C64> {
        let f1 = self.restrict_class(&self.scatter_class(h)?, 0)?;
        let f2 = self.restrict_class(&self.scatter_class(h2)?, 0)?;
        self.algebra.pairing(&f1, &f2)
    }

    /// Deformed product on probe Weyl sums making the induced-observable
    /// map a homomorphism. On generators:
    /// exp(i Psi(h)) * exp(i Psi(h')) =
    /// exp(S_sym(h^-, h'^-) - i E(f^-, f'^-)/2) exp(i Psi(h + h')).
    /// The G-factor combination collapses to exp(S_sym) for every
    /// quasifree preparation, centered or not.
    pub fn star_product(&self, prep: &QuasifreeState, a: &WeylSum, b: &WeylSum) -> Result<WeylSum> {
        let ctx = &self.algebra;
        let mut terms = Vec::with_capacity(a.terms().len() * b.terms().len());
        for (ca, ha) in a.terms() {
            if !ha.component_is_zero(ctx, 0) {
                return Err(Error::LayoutMismatch);
            }
            let sa = self.scatter_class(ha)?;
            let ha_m = self.restrict_probe_block(&sa)?;
            let fa_m = self.restrict_class(&sa, 0)?;
            for (cb, hb) in b.terms() {
                if !hb.component_is_zero(ctx, 0) {
                    return Err(Error::LayoutMismatch);
                }
                let sb = self.scatter_class(hb)?;
                let hb_m = self.restrict_probe_block(&sb)?;
                let fb_m = self.restrict_class(&sb, 0)?;
                let s_sym = prep.two_point_sym(ctx, &ha_m, &hb_m)?;
                let nu = self.algebra.pairing(&fa_m, &fb_m)?;
                let factor = (s_sym - C64::i() * nu / 2.0).exp();
                terms.push((ca * cb * factor, ha.add(hb)?));
            }
        }
        self.algebra.weyl_sum(terms)
    }
}

/// Report of the variance decomposition.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct VarianceReport {
    pub var_total: f64,
    pub var_system: f64,
    pub var_probe: f64,
}

/// The scattered components of a probe smearing.
#[derive(Debug, Clone)]
pub struct ScatteredPair {
    f_minus: GridFunction,
    h_minus: GridFunction,
}

impl ScatteredPair {
    pub fn f_minus(&self) -> &GridFunction {
        &self.f_minus
    }

    pub fn h_minus(&self) -> &GridFunction {
        &self.h_minus
    }
}
