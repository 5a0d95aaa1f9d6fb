//! Pre-instruments, post-selected and non-selective state updates,
//! two-probe composite measurements, and the causal factorization of the
//! scattering map.
//!
//! A pre-instrument sends the prepared system state to the unnormalized
//! functional A -> (omega (x) sigma)(Theta(A (x) B)) conditioned on the
//! probe element B. Post-selection normalizes it; composing instruments
//! for causally orderable coupling regions agrees with the single
//! combined instrument of the joined probe, which is the consistency
//! property the factorization identity encodes.

use num_complex::Complex64 as C64;

use crate::algebra::{PolyObservable, WeylSum};
use crate::error::{Error, Result};
use crate::green::{CoupledOperator, GreenDirection};
use crate::grid::{GridFunction, MultiComponentFunction};
use crate::lattice::{causal_orderability, CausalOrder};
use crate::scheme::ScatteringContext;
use crate::states::QuasifreeState;

/// A measurement context: coupled model, prepared product state (system
/// block = omega, probe block = sigma), and measured probe element.
#[derive(Debug, Clone)]
pub struct PreInstrument {
    ctx: ScatteringContext,
    prep: QuasifreeState,
    effect: WeylSum,
}

impl PreInstrument {
    pub fn new(ctx: ScatteringContext, prep: QuasifreeState, effect: WeylSum) -> Result<Self> {
        for (_, h) in effect.terms() {
            if !h.component_is_zero(ctx.algebra(), 0) {
                return Err(Error::LayoutMismatch);
            }
        }
        Ok(Self { ctx, prep, effect })
    }

    pub fn context(&self) -> &ScatteringContext {
        &self.ctx
    }

    pub fn preparation(&self) -> &QuasifreeState {
        &self.prep
    }

    pub fn effect(&self) -> &WeylSum {
        &self.effect
    }

    /// The unnormalized updated functional on a system Weyl sum:
    /// (omega (x) sigma)(Theta(A (x) B)).
    pub fn apply(&self, a_system: &WeylSum) -> Result<C64> {
        let alg = self.ctx.algebra();
        let embedded = alg.tensor_embed(a_system, &self.effect)?;
        let scattered = self.ctx.scatter_weyl(&embedded)?;
        self.prep.expectation_weyl(alg, &scattered)
    }

    /// The unnormalized functional on a degree <= 2 system polynomial,
    /// evaluated through exact Gaussian moments of polynomial times
    /// exponential.
    pub fn apply_poly(&self, p: &PolyObservable) -> Result<C64> {
        let alg = self.ctx.algebra();
        let mut acc = C64::ZERO;
        for (b_coeff, h) in self.effect.terms() {
            let scattered_h = self.ctx.scatter_class(h)?;
            // constant part
            acc += b_coeff
                * p.constant_part()
                * self.prep.weyl_generator_expectation(alg, &scattered_h)?;
            for (c, f) in p.linear_terms() {
                let sf = self.ctx.scatter_class(&self.embed_system(f)?)?;
                acc += b_coeff * c * self.prep.moment1_weyl(alg, &sf, &scattered_h)?;
            }
            for (c, f1, f2) in p.quadratic_terms() {
                let s1 = self.ctx.scatter_class(&self.embed_system(f1)?)?;
                let s2 = self.ctx.scatter_class(&self.embed_system(f2)?)?;
                let m12 = self.prep.moment2_weyl(alg, &s1, &s2, &scattered_h)?;
                let m21 = self.prep.moment2_weyl(alg, &s2, &s1, &scattered_h)?;
                acc += b_coeff * c * (m12 + m21) / 2.0;
            }
        }
        Ok(acc)
    }

    fn embed_system(&self, f: &crate::algebra::SmearingClass) -> Result<crate::algebra::SmearingClass> {
        if !f
            .representative()
            .components()
            .iter()
            .enumerate()
            .all(|(i, g)| i == 0 || g.is_zero())
        {
            return Err(Error::LayoutMismatch);
        }
        Ok(f.clone())
    }

    /// The normalization (omega (x) sigma)(Theta(1 (x) B)) =
    /// omega(epsilon_sigma(B)).
    pub fn normalization(&self) -> Result<C64> {
        self.apply(&self.ctx.algebra().weyl_unit())
    }

    /// Normalizes into the post-selected state; fails when the effect has
    /// vanishing amplitude in the prepared state.
    pub fn post_select(self) -> Result<UpdatedState> {
        let normalization = self.normalization()?;
        if normalization.norm() <= 1e-12 {
            return Err(Error::VanishingNormalization);
        }
        Ok(UpdatedState { inst: self, normalization })
    }
}

/// The non-selective update: the instrument of the unit effect. Always
/// normalized.
pub fn nonselective_update(ctx: ScatteringContext, prep: QuasifreeState) -> Result<UpdatedState> {
    let unit = ctx.algebra().weyl_unit();
    PreInstrument::new(ctx, prep, unit)?.post_select()
}

/// A normalized updated system state, evaluated in closed form.
#[derive(Debug, Clone)]
pub struct UpdatedState {
    inst: PreInstrument,
    normalization: C64,
}

impl UpdatedState {
    pub fn normalization(&self) -> C64 {
        self.normalization
    }

    /// Expectation of a system Weyl sum in the updated state.
    pub fn expectation_weyl(&self, a_system: &WeylSum) -> Result<C64> {
        Ok(self.inst.apply(a_system)? / self.normalization)
    }

    /// Expectation of a degree <= 2 system polynomial.
    pub fn expectation_poly(&self, p: &PolyObservable) -> Result<C64> {
        Ok(self.inst.apply_poly(p)? / self.normalization)
    }

    /// The shortcut formula omega(A epsilon_sigma(B)) / omega(epsilon_sigma(B)),
    /// valid when A is localisable in the causal complement of the
    /// coupling region. The caller vouches for the localisation.
    pub fn expectation_shortcut(&self, a_system: &WeylSum) -> Result<C64> {
        let alg = self.inst.ctx.algebra();
        let eps = self.inst.ctx.induced_observable(&self.inst.prep, &self.inst.effect)?;
        let prod = alg.weyl_product(a_system, &eps)?;
        Ok(self.inst.prep.expectation_weyl(alg, &prod)? / self.normalization)
    }

    /// Expectation of the same observable in the original preparation,
    /// for before/after comparisons.
    pub fn original_expectation(&self, a_system: &WeylSum) -> Result<C64> {
        self.inst.prep.expectation_weyl(self.inst.ctx.algebra(), a_system)
    }
}

/// Residual of the causal factorization identity for the Green operators
/// of two couplings against their common free part:
/// advanced: (1 - R E^-) f = (1 - R1 E1^-)(1 - R2 E2^-) f for f outside
/// the causal past of both coupling regions, where the combined operator
/// carries both couplings; retarded: factors in the opposite order, for
/// f outside the causal future. Requires the second coupling region to
/// be nowhere in the causal past of the first.
pub fn factorization_residual(
    q1: &CoupledOperator,
    q2: &CoupledOperator,
    f: &MultiComponentFunction,
    direction: GreenDirection,
) -> Result<f64> {
    Ok(factorization_defect(q1, q2, f, direction)?.norm_inf())
}

/// The cellwise defect field of the factorization identity; its max norm
/// is the residual.
pub fn factorization_defect(
    q1: &CoupledOperator,
    q2: &CoupledOperator,
    f: &MultiComponentFunction,
    direction: GreenDirection,
) -> Result<MultiComponentFunction> {
    if q1.free_part() != q2.free_part() {
        return Err(Error::ContextMismatch);
    }
    let k1 = q1.coupling_region();
    let k2 = q2.coupling_region();
    if !k1.is_empty() && !k2.is_empty() {
        match causal_orderability(&k1, &k2)? {
            CausalOrder::Disjoint | CausalOrder::SecondNotInPastOfFirst => {}
            _ => return Err(Error::NotOrderable),
        }
    }
    let k = k1.union(&k2)?;
    if !k.is_empty() {
        let excluded = match direction {
            GreenDirection::Advanced => k.causal_past()?,
            GreenDirection::Retarded => k.causal_future()?,
        };
        if f.support().cells().any(|c| excluded.contains(c)) {
            return Err(Error::SupportTouchesBoundary);
        }
    }
    let mut combined = q1.clone();
    for profile in q2.couplings() {
        combined = combined.with_coupling_profile(profile)?;
    }
    let scatter_map = |op: &CoupledOperator, g: &MultiComponentFunction| -> Result<MultiComponentFunction> {
        let sol = op.green_apply(direction, g)?;
        g.sub(&op.coupling_apply(&sol)?)
    };
    let lhs = scatter_map(&combined, f)?;
    let rhs = match direction {
        GreenDirection::Advanced => scatter_map(q1, &scatter_map(q2, f)?)?,
        GreenDirection::Retarded => scatter_map(q2, &scatter_map(q1, f)?)?,
    };
    lhs.sub(&rhs)
}

/// One probe of a composite measurement: its mass, coupling profile,
/// preparation (a single-component state) and measured Weyl element,
/// given context-independently as (coefficient, smearing) pairs.
#[derive(Debug, Clone)]
pub struct ProbeSpec {
    pub mass: f64,
    pub coupling: GridFunction,
    pub preparation: QuasifreeState,
    pub effect: Vec<(C64, GridFunction)>,
}

/// Values of the composed measurements.
#[derive(Debug, Clone, Copy)]
pub struct CompositionOutcome {
    /// Instrument of probe 1 first, then probe 2.
    pub sequential: C64,
    /// The single combined three-component instrument.
    pub combined: C64,
    /// Instrument of probe 2 first, then probe 1; present only when the
    /// coupling regions are causally disjoint.
    pub reversed: Option<C64>,
}

/// Evaluates the composition of two probe instruments on a system Weyl
/// element, both sequentially and as one combined instrument.
///
/// The coupling region of probe 2 must be nowhere in the causal past of
/// the coupling region of probe 1; when the regions are causally
/// disjoint the reversed order is evaluated as well.
pub fn compose_instruments(
    system_mass: f64,
    system_state: &QuasifreeState,
    probe1: &ProbeSpec,
    probe2: &ProbeSpec,
    a_system: &[(C64, GridFunction)],
) -> Result<CompositionOutcome> {
    let lattice = probe1.coupling.lattice();
    if probe2.coupling.lattice() != lattice {
        return Err(Error::LatticeMismatch);
    }
    let k1 = probe1.coupling.support();
    let k2 = probe2.coupling.support();
    let order = if k1.is_empty() || k2.is_empty() {
        CausalOrder::Disjoint
    } else {
        causal_orderability(&k1, &k2)?
    };
    match order {
        CausalOrder::Disjoint | CausalOrder::SecondNotInPastOfFirst => {}
        _ => return Err(Error::NotOrderable),
    }

    let sequential = sequential_value(system_mass, system_state, probe1, probe2, a_system)?;
    let combined = combined_value(system_mass, system_state, probe1, probe2, a_system)?;
    let reversed = if order == CausalOrder::Disjoint {
        Some(sequential_value(system_mass, system_state, probe2, probe1, a_system)?)
    } else {
        None
    };
    Ok(CompositionOutcome { sequential, combined, reversed })
}

/// Applies the instrument of `first`, then the instrument of `second`:
/// I_second(B2)(I_first(B1)(omega))(A).
fn sequential_value(
    system_mass: f64,
    system_state: &QuasifreeState,
    first: &ProbeSpec,
    second: &ProbeSpec,
    a_system: &[(C64, GridFunction)],
) -> Result<C64> {
    let lattice = first.coupling.lattice();
    // stage of the later probe: scatter A (x) B2 in its two-component model
    let ctx2 = ScatteringContext::system_probe(lattice, system_mass, second.mass, &second.coupling)?;
    let prep2 = QuasifreeState::product(vec![system_state.clone(), second.preparation.clone()])?;
    let a_sum = build_block_sum(&ctx2, 0, a_system)?;
    let b2 = build_block_sum(&ctx2, 1, &second.effect)?;
    let embedded = ctx2.algebra().tensor_embed(&a_sum, &b2)?;
    let scattered = ctx2.scatter_weyl(&embedded)?;

    // stage of the earlier probe: the intermediate functional evaluated on
    // the system parts of the scattered terms
    let ctx1 = ScatteringContext::system_probe(lattice, system_mass, first.mass, &first.coupling)?;
    let prep1 = QuasifreeState::product(vec![system_state.clone(), first.preparation.clone()])?;
    let b1 = build_block_sum(&ctx1, 1, &first.effect)?;
    let inst1 = PreInstrument::new(ctx1.clone(), prep1, b1)?;

    let mut acc = C64::ZERO;
    for (c, class) in scattered.terms() {
        let probe_part = ctx2.restrict_probe_block(class)?;
        let sigma2_factor = prep2.weyl_generator_expectation(ctx2.algebra(), &probe_part)?;
        let system_rep = class.representative().component(0).clone();
        let system_term = ctx1
            .algebra()
            .weyl_generator(C64::ONE, ctx1.embed_class(0, &system_rep)?)?;
        acc += c * sigma2_factor * inst1.apply(&system_term)?;
    }
    Ok(acc)
}

/// The combined three-component instrument value
/// I_{sigma1 (x) sigma2}(B1 (x) B2)(omega)(A).
fn combined_value(
    system_mass: f64,
    system_state: &QuasifreeState,
    probe1: &ProbeSpec,
    probe2: &ProbeSpec,
    a_system: &[(C64, GridFunction)],
) -> Result<C64> {
    let lattice = probe1.coupling.lattice();
    let op = CoupledOperator::free(lattice, vec![system_mass, probe1.mass, probe2.mass])?
        .with_coupling(0, 1, &probe1.coupling)?
        .with_coupling(0, 2, &probe2.coupling)?;
    let ctx = ScatteringContext::new(op)?;
    let prep = QuasifreeState::product(vec![
        system_state.clone(),
        probe1.preparation.clone(),
        probe2.preparation.clone(),
    ])?;
    let a_sum = build_block_sum(&ctx, 0, a_system)?;
    let b1 = build_block_sum(&ctx, 1, &probe1.effect)?;
    let b2 = build_block_sum(&ctx, 2, &probe2.effect)?;
    let probe_joint = ctx.algebra().weyl_product(&b1, &b2)?;
    let embedded = ctx.algebra().tensor_embed(&a_sum, &probe_joint)?;
    let scattered = ctx.scatter_weyl(&embedded)?;
    prep.expectation_weyl(ctx.algebra(), &scattered)
}

fn build_block_sum(
    ctx: &ScatteringContext,
    component: usize,
    terms: &[(C64, GridFunction)],
) -> Result<WeylSum> {
    let mut out = Vec::with_capacity(terms.len());
    for (c, g) in terms {
        out.push((*c, ctx.embed_class(component, g)?));
    }
    ctx.algebra().weyl_sum(out)
}
