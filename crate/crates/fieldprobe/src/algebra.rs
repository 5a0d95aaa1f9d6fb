//! Weyl generators and degree-two field polynomials over the test
//! function space of a free operator bank.
//!
//! A smearing class is a test function modulo the image of the operator:
//! two smearings give the same smeared field iff their propagator
//! solutions agree. The canonical form stored here is the solution
//! restricted to two consecutive mid-lattice time slices, which doubles
//! as Cauchy data. The commutator pairing is evaluated directly on this
//! data through the conserved two-slice flux of the leapfrog scheme, so
//! algebra products never re-run a marching solve.

use std::hash::{Hash, Hasher};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::green::CoupledOperator;
use crate::grid::MultiComponentFunction;
use crate::lattice::Lattice;


/// Relative tolerance deciding equality of two smearing classes.
pub const CLASS_EQ_TOL: f64 = 1e-10;

/// Evaluation context for the uncoupled field algebra: the free operator
/// bank and the canonical data slices.
#[derive(Debug, Clone)]
pub struct AlgebraContext {
    op: CoupledOperator,
    mid: usize,
    fingerprint: u64,
}

fn op_fingerprint(op: &CoupledOperator) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    let lat = op.lattice();
    lat.n_t.hash(&mut h);
    lat.n_x.hash(&mut h);
    lat.dt.to_bits().hash(&mut h);
    lat.dx.to_bits().hash(&mut h);
    for m in op.masses() {
        m.to_bits().hash(&mut h);
    }
    h.finish()
}

/// The canonical pair of consecutive time slices carrying class data and
/// state mode tables.
pub(crate) fn canonical_data_slices(lattice: Lattice) -> (usize, usize) {
    let mid = lattice.n_t / 2 - 1;
    (mid, mid + 1)
}

impl AlgebraContext {
    /// Wraps a free operator bank. The lattice must have at least six
    /// time slices so the canonical data slices are interior.
    pub fn new(op: CoupledOperator) -> Result<Self> {
        if !op.is_free() {
            return Err(Error::ContextMismatch);
        }
        let n_t = op.lattice().n_t;
        if n_t < 6 {
            return Err(Error::InvalidLattice("algebra context needs n_t >= 6".into()));
        }
        let fingerprint = op_fingerprint(&op);
        let (mid, _) = canonical_data_slices(op.lattice());
        Ok(Self { op, mid, fingerprint })
    }

    pub fn op(&self) -> &CoupledOperator {
        &self.op
    }

    pub fn lattice(&self) -> Lattice {
        self.op.lattice()
    }

    pub fn n_components(&self) -> usize {
        self.op.n_components()
    }

    /// The pair of consecutive slices carrying canonical class data.
    pub fn data_slices(&self) -> (usize, usize) {
        (self.mid, self.mid + 1)
    }

    fn data_len(&self) -> usize {
        2 * self.op.n_components() * self.lattice().n_x
    }

    #[inline]
    fn data_index(&self, component: usize, slice: usize, x: usize) -> usize {
        (component * 2 + slice) * self.lattice().n_x + x
    }

    /// Builds the class of a compactly supported smearing. The support
    /// must avoid the first and last two time slices.
    pub fn class_of(&self, rep: &MultiComponentFunction) -> Result<SmearingClass> {
        if rep.lattice() != self.lattice() || rep.n_components() != self.n_components() {
            return Err(Error::LayoutMismatch);
        }
        let support = rep.support();
        if !support.is_empty() {
            let n_t = self.lattice().n_t;
            if support.t_min().unwrap() < 2 || support.t_max().unwrap() + 3 > n_t {
                return Err(Error::SupportTouchesBoundary);
            }
        }
        let sol = self.op.propagator_unchecked(rep)?;
        let mut data = vec![C64::ZERO; self.data_len()];
        for a in 0..self.n_components() {
            for (s, t) in [(0, self.mid), (1, self.mid + 1)] {
                for x in 0..self.lattice().n_x {
                    data[self.data_index(a, s, x)] = sol.component(a).value(t, x);
                }
            }
        }
        // One marching step turns a source of size s into field values of
        // size s dt^2, so rep_norm * dt^2 bounds the roundoff floor of the
        // data: below it a class is indistinguishable from zero.
        let dt = self.lattice().dt;
        let scale = data
            .iter()
            .map(|v| v.norm())
            .fold(rep.norm_inf() * dt * dt, f64::max);
        Ok(SmearingClass { rep: rep.clone(), data, scale, fingerprint: self.fingerprint })
    }

    /// The class of the zero smearing.
    pub fn zero_class(&self) -> SmearingClass {
        SmearingClass {
            rep: MultiComponentFunction::zeros(self.lattice(), self.n_components()),
            data: vec![C64::ZERO; self.data_len()],
            scale: 0.0,
            fingerprint: self.fingerprint,
        }
    }

    fn check_class(&self, c: &SmearingClass) -> Result<()> {
        if c.fingerprint != self.fingerprint || c.data.len() != self.data_len() {
            return Err(Error::ContextMismatch);
        }
        Ok(())
    }

    /// Conserved two-slice flux between two propagator solutions given by
    /// their canonical data. For two classes this equals the pairing
    /// dt*dx*sum F (E G), exactly up to roundoff.
    pub fn flux(&self, a: &[C64], b: &[C64]) -> C64 {
        let n_x = self.lattice().n_x;
        let mut acc = C64::ZERO;
        for comp in 0..self.n_components() {
            for x in 0..n_x {
                let a0 = a[self.data_index(comp, 0, x)];
                let a1 = a[self.data_index(comp, 1, x)];
                let b0 = b[self.data_index(comp, 0, x)];
                let b1 = b[self.data_index(comp, 1, x)];
                acc += a0 * b1 - a1 * b0;
            }
        }
        acc * (self.lattice().dx / self.lattice().dt)
    }

    /// Commutator pairing of two classes.
    pub fn pairing(&self, a: &SmearingClass, b: &SmearingClass) -> Result<C64> {
        self.check_class(a)?;
        self.check_class(b)?;
        Ok(self.flux(&a.data, &b.data))
    }

    /// The unit element.
    pub fn weyl_unit(&self) -> WeylSum {
        WeylSum { terms: vec![(C64::ONE, self.zero_class())] }
    }

    /// A single Weyl generator with coefficient.
    pub fn weyl_generator(&self, coeff: C64, smearing: SmearingClass) -> Result<WeylSum> {
        self.check_class(&smearing)?;
        let mut w = WeylSum { terms: vec![(coeff, smearing)] };
        w.canonicalize();
        Ok(w)
    }

    /// Builds a Weyl sum from terms, merging equal classes.
    pub fn weyl_sum(&self, terms: Vec<(C64, SmearingClass)>) -> Result<WeylSum> {
        for (_, c) in &terms {
            self.check_class(c)?;
        }
        let mut w = WeylSum { terms };
        w.canonicalize();
        Ok(w)
    }

    /// CCR product of two Weyl sums: generators compose as
    /// exp(i X(F)) exp(i X(G)) = exp(-i E(F,G)/2) exp(i X(F+G)).
    pub fn weyl_product(&self, a: &WeylSum, b: &WeylSum) -> Result<WeylSum> {
        let mut terms = Vec::with_capacity(a.terms.len() * b.terms.len());
        for (ca, fa) in &a.terms {
            self.check_class(fa)?;
            for (cb, fb) in &b.terms {
                self.check_class(fb)?;
                let phase = (-C64::i() * self.flux(&fa.data, &fb.data) / 2.0).exp();
                terms.push((ca * cb * phase, fa.add(fb)?));
            }
        }
        let mut w = WeylSum { terms };
        w.canonicalize();
        Ok(w)
    }

    /// Adjoint: coefficients conjugate, smearings conjugate-negate.
    pub fn weyl_adjoint(&self, a: &WeylSum) -> WeylSum {
        let terms = a
            .terms
            .iter()
            .map(|(c, f)| (c.conj(), f.conj_neg()))
            .collect();
        let mut w = WeylSum { terms };
        w.canonicalize();
        w
    }

    /// Embeds a system-block sum and a probe-block sum into one sum over
    /// the full layout. The factors must occupy disjoint component
    /// blocks; since the free pairing is block-diagonal the embedding
    /// introduces no phase.
    pub fn tensor_embed(&self, a_system: &WeylSum, b_probe: &WeylSum) -> Result<WeylSum> {
        for (_, f) in &a_system.terms {
            self.check_class(f)?;
            for comp in 1..self.n_components() {
                if !f.component_is_zero(self, comp) {
                    return Err(Error::LayoutMismatch);
                }
            }
        }
        for (_, f) in &b_probe.terms {
            self.check_class(f)?;
            if !f.component_is_zero(self, 0) {
                return Err(Error::LayoutMismatch);
            }
        }
        self.weyl_product(a_system, b_probe)
    }

    /// Expands scalar * exp(i lambda X(F)) around lambda = 0: the first
    /// derivative is i X(F), the second is -X(F)^2.
    pub fn weyl_derivative(&self, smearing: &SmearingClass, order: usize) -> Result<PolyObservable> {
        self.check_class(smearing)?;
        match order {
            1 => Ok(PolyObservable {
                constant: C64::ZERO,
                linear: vec![(C64::i(), smearing.clone())],
                quadratic: Vec::new(),
            }),
            2 => Ok(PolyObservable {
                constant: C64::ZERO,
                linear: Vec::new(),
                quadratic: vec![(-C64::ONE, smearing.clone(), smearing.clone())],
            }),
            _ => Err(Error::DegreeOverflow),
        }
    }

    /// Product of degree <= 2 polynomials. A linear-linear product picks
    /// up the commutator constant: X(F) X(G) = sym(F,G) + i E(F,G)/2.
    /// Products whose degrees sum past two raise `DegreeOverflow` unless
    /// `truncate` is set, in which case only the part pairs with total
    /// degree <= 2 are kept.
    pub fn poly_product(&self, p: &PolyObservable, q: &PolyObservable, truncate: bool) -> Result<PolyObservable> {
        if p.degree() + q.degree() > 2 && !truncate {
            return Err(Error::DegreeOverflow);
        }
        let mut out = PolyObservable::constant(p.constant * q.constant);
        for (c, f) in &q.linear {
            out.linear.push((p.constant * c, f.clone()));
        }
        for (c, f, g) in &q.quadratic {
            out.quadratic.push((p.constant * c, f.clone(), g.clone()));
        }
        for (c, f) in &p.linear {
            out.linear.push((c * q.constant, f.clone()));
            for (d, g) in &q.linear {
                let coeff = c * d;
                out.quadratic.push((coeff, f.clone(), g.clone()));
                out.constant += coeff * C64::i() * self.flux(&f.data, &g.data) / 2.0;
            }
        }
        for (c, f, g) in &p.quadratic {
            out.quadratic.push((c * q.constant, f.clone(), g.clone()));
        }
        out.canonicalize();
        Ok(out)
    }

    /// Adjoint of a polynomial.
    pub fn poly_adjoint(&self, p: &PolyObservable) -> PolyObservable {
        let mut out = PolyObservable {
            constant: p.constant.conj(),
            linear: p.linear.iter().map(|(c, f)| (c.conj(), f.conj())).collect(),
            quadratic: p
                .quadratic
                .iter()
                .map(|(c, f, g)| (c.conj(), f.conj(), g.conj()))
                .collect(),
        };
        out.canonicalize();
        out
    }
}

/// A smearing modulo the operator image, carried by a representative and
/// its canonical two-slice solution data.
#[derive(Debug, Clone)]
pub struct SmearingClass {
    rep: MultiComponentFunction,
    data: Vec<C64>,
    scale: f64,
    fingerprint: u64,
}

impl SmearingClass {
    pub fn representative(&self) -> &MultiComponentFunction {
        &self.rep
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    /// True when the canonical data vanishes to within the roundoff floor
    /// of the inputs that built the class.
    pub fn is_zero(&self) -> bool {
        let norm = self.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
        norm <= CLASS_EQ_TOL * self.scale
    }

    /// Class equality: canonical data agree to `CLASS_EQ_TOL`, relative to
    /// the larger data norm or input scale.
    pub fn same_class(&self, other: &SmearingClass) -> bool {
        if self.fingerprint != other.fingerprint {
            return false;
        }
        let diff = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        diff <= CLASS_EQ_TOL * self.scale.max(other.scale)
    }

    pub fn add(&self, other: &SmearingClass) -> Result<SmearingClass> {
        if self.fingerprint != other.fingerprint {
            return Err(Error::ContextMismatch);
        }
        Ok(SmearingClass {
            rep: self.rep.add(&other.rep)?,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
            scale: self.scale.max(other.scale),
            fingerprint: self.fingerprint,
        })
    }

    pub fn scale(&self, c: C64) -> SmearingClass {
        SmearingClass {
            rep: self.rep.scaled(c),
            data: self.data.iter().map(|v| v * c).collect(),
            scale: self.scale * c.norm(),
            fingerprint: self.fingerprint,
        }
    }

    /// Complex conjugate of the smearing.
    pub fn conj(&self) -> SmearingClass {
        SmearingClass {
            rep: self.rep.conj(),
            data: self.data.iter().map(|v| v.conj()).collect(),
            scale: self.scale,
            fingerprint: self.fingerprint,
        }
    }

    /// Negated conjugate, the smearing map of the Weyl adjoint.
    pub fn conj_neg(&self) -> SmearingClass {
        self.conj().scale(-C64::ONE)
    }

    /// True when both representative and data vanish on one component.
    pub fn component_is_zero(&self, ctx: &AlgebraContext, component: usize) -> bool {
        let n_x = ctx.lattice().n_x;
        let data_zero = (0..2).all(|s| {
            (0..n_x).all(|x| self.data[ctx.data_index(component, s, x)] == C64::ZERO)
        });
        data_zero && self.rep.component(component).is_zero()
    }
}

/// Finite linear combination of Weyl generators exp(i X(F)).
#[derive(Debug, Clone)]
pub struct WeylSum {
    terms: Vec<(C64, SmearingClass)>,
}

impl WeylSum {
    pub fn terms(&self) -> &[(C64, SmearingClass)] {
        &self.terms
    }

    /// Merges terms with equal class and prunes zero coefficients.
    fn canonicalize(&mut self) {
        let mut merged: Vec<(C64, SmearingClass)> = Vec::with_capacity(self.terms.len());
        for (c, f) in self.terms.drain(..) {
            if let Some(slot) = merged.iter_mut().find(|(_, g)| g.same_class(&f)) {
                slot.0 += c;
            } else {
                merged.push((c, f));
            }
        }
        merged.retain(|(c, _)| *c != C64::ZERO);
        self.terms = merged;
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Scales every coefficient.
    pub fn scaled(&self, c: C64) -> WeylSum {
        let mut w = WeylSum {
            terms: self.terms.iter().map(|(a, f)| (a * c, f.clone())).collect(),
        };
        w.canonicalize();
        w
    }

    pub fn add(&self, other: &WeylSum) -> WeylSum {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        let mut w = WeylSum { terms };
        w.canonicalize();
        w
    }

    pub fn sub(&self, other: &WeylSum) -> WeylSum {
        self.add(&other.scaled(-C64::ONE))
    }

    /// True when the sum is a multiple of the unit generator.
    pub fn is_multiple_of_unit(&self) -> bool {
        match self.terms.len() {
            0 => true,
            1 => self.terms[0].1.is_zero(),
            _ => false,
        }
    }

    /// Coefficientwise max difference against another sum, pairing terms
    /// by class; unmatched terms count with their full magnitude.
    pub fn coefficient_distance(&self, other: &WeylSum) -> f64 {
        let mut dist: f64 = 0.0;
        let mut used = vec![false; other.terms.len()];
        for (c, f) in &self.terms {
            let mut matched = false;
            for (i, (d, g)) in other.terms.iter().enumerate() {
                if !used[i] && f.same_class(g) {
                    dist = dist.max((c - d).norm());
                    used[i] = true;
                    matched = true;
                    break;
                }
            }
            if !matched {
                dist = dist.max(c.norm());
            }
        }
        for (i, (d, _)) in other.terms.iter().enumerate() {
            if !used[i] {
                dist = dist.max(d.norm());
            }
        }
        dist
    }
}

/// Field polynomial of degree at most two, in symmetric canonical form.
#[derive(Debug, Clone)]
pub struct PolyObservable {
    pub(crate) constant: C64,
    pub(crate) linear: Vec<(C64, SmearingClass)>,
    pub(crate) quadratic: Vec<(C64, SmearingClass, SmearingClass)>,
}

impl PolyObservable {
    pub fn constant(c: C64) -> Self {
        Self { constant: c, linear: Vec::new(), quadratic: Vec::new() }
    }

    pub fn unit() -> Self {
        Self::constant(C64::ONE)
    }

    /// The smeared field X(F).
    pub fn field(smearing: SmearingClass) -> Self {
        Self { constant: C64::ZERO, linear: vec![(C64::ONE, smearing)], quadratic: Vec::new() }
    }

    pub fn degree(&self) -> usize {
        if !self.quadratic.is_empty() {
            2
        } else if !self.linear.is_empty() {
            1
        } else {
            0
        }
    }

    pub fn constant_part(&self) -> C64 {
        self.constant
    }

    pub fn linear_terms(&self) -> &[(C64, SmearingClass)] {
        &self.linear
    }

    pub fn quadratic_terms(&self) -> &[(C64, SmearingClass, SmearingClass)] {
        &self.quadratic
    }

    pub fn add(&self, other: &PolyObservable) -> PolyObservable {
        let mut out = self.clone();
        out.constant += other.constant;
        out.linear.extend(other.linear.iter().cloned());
        out.quadratic.extend(other.quadratic.iter().cloned());
        out.canonicalize();
        out
    }

    /// Appends a symmetric quadratic term c * sym(X(f), X(g)).
    pub fn push_quadratic(&mut self, c: C64, f: SmearingClass, g: SmearingClass) {
        self.quadratic.push((c, f, g));
        self.canonicalize();
    }

    pub fn scaled(&self, c: C64) -> PolyObservable {
        let mut out = PolyObservable {
            constant: self.constant * c,
            linear: self.linear.iter().map(|(a, f)| (a * c, f.clone())).collect(),
            quadratic: self.quadratic.iter().map(|(a, f, g)| (a * c, f.clone(), g.clone())).collect(),
        };
        out.canonicalize();
        out
    }

    fn canonicalize(&mut self) {
        // merge linear terms by class
        let mut linear: Vec<(C64, SmearingClass)> = Vec::new();
        for (c, f) in self.linear.drain(..) {
            if let Some(slot) = linear.iter_mut().find(|(_, g)| g.same_class(&f)) {
                slot.0 += c;
            } else {
                linear.push((c, f));
            }
        }
        linear.retain(|(c, _)| *c != C64::ZERO);
        self.linear = linear;
        // merge symmetric pairs in either orientation
        let mut quadratic: Vec<(C64, SmearingClass, SmearingClass)> = Vec::new();
        for (c, f, g) in self.quadratic.drain(..) {
            if let Some(slot) = quadratic
                .iter_mut()
                .find(|(_, u, v)| (u.same_class(&f) && v.same_class(&g)) || (u.same_class(&g) && v.same_class(&f)))
            {
                slot.0 += c;
            } else {
                quadratic.push((c, f, g));
            }
        }
        quadratic.retain(|(c, _, _)| *c != C64::ZERO);
        self.quadratic = quadratic;
    }
}
