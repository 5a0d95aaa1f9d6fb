//! Perturbative detector response: the weak-coupling expansion of the
//! measured probe excitation, the smearings h1 = rho E_Q^- h and
//! h2 = rho E_P^- rho E_Q^- h that carry it, and the response integral
//! of a static worldline detector with an energy gap.
//!
//! With coupling scale lambda, the scattered pair expands as
//! f^- = -lambda h1 + O(lambda^3) and h^- = h + lambda^2 h2 +
//! O(lambda^4), so the measured expectation of Psi(h)* Psi(h) is
//! S(conj h, h) + lambda^2 (W(conj h1, h1) + 2 Re S(conj h, h2)) up to
//! O(lambda^4), for a centered probe preparation. The leading term is
//! the probe's own spontaneous excitation; the lambda^2 coefficient is
//! the field's contribution, which the worldline integral reproduces
//! when the coupling concentrates on a single spatial site.

use num_complex::Complex64 as C64;

use crate::algebra::PolyObservable;
use crate::error::{Error, Result};
use crate::green::{CoupledOperator, GreenDirection};
use crate::grid::{GridFunction, MultiComponentFunction};
use crate::scheme::ScatteringContext;
use crate::states::QuasifreeState;

/// A static worldline detector: a fixed spatial site, a real switching
/// window over time slices, and an energy gap.
#[derive(Debug, Clone)]
pub struct Worldline {
    pub site: usize,
    /// Window amplitude per time slice.
    pub window: Vec<f64>,
    pub gap: f64,
}

/// A weak-coupling detector scenario. The context carries the coupling
/// profile at unit scale; `lambda` multiplies it wherever the exact
/// coupled dynamics enters.
#[derive(Debug, Clone)]
pub struct DetectorScenario {
    pub context: ScatteringContext,
    pub lambda: f64,
    pub h: GridFunction,
    pub prep: QuasifreeState,
    pub worldline: Option<Worldline>,
}

impl DetectorScenario {
    pub fn new(
        context: ScatteringContext,
        lambda: f64,
        h: GridFunction,
        prep: QuasifreeState,
        worldline: Option<Worldline>,
    ) -> Result<Self> {
        if lambda < 0.0 {
            return Err(Error::Config("lambda must be nonnegative".into()));
        }
        if context.n_components() != 2 {
            return Err(Error::LayoutMismatch);
        }
        Ok(Self { context, lambda, h, prep, worldline })
    }
}

/// The first two perturbative smearings h1 = rho E_Q^- h and
/// h2 = rho E_P^- h1, both supported inside the coupling support.
pub fn h1_h2(ctx: &ScatteringContext, h: &GridFunction) -> Result<(GridFunction, GridFunction)> {
    if ctx.n_components() != 2 {
        return Err(Error::LayoutMismatch);
    }
    let lattice = ctx.lattice();
    let masses = ctx.coupled_op().masses();
    let rho: Vec<f64> = match ctx.coupled_op().couplings() {
        [] => vec![0.0; lattice.cells()],
        [single] => single.values().to_vec(),
        _ => return Err(Error::LayoutMismatch),
    };
    let probe_op = CoupledOperator::free_scalar(lattice, masses[1])?;
    let system_op = CoupledOperator::free_scalar(lattice, masses[0])?;
    let h_in = MultiComponentFunction::new(vec![h.clone()])?;
    let eq_h = probe_op.green_apply(GreenDirection::Advanced, &h_in)?;
    let h1 = eq_h.component(0).mul_profile(&rho);
    let h1_in = MultiComponentFunction::new(vec![h1.clone()])?;
    let ep_h1 = system_op.green_apply(GreenDirection::Advanced, &h1_in)?;
    let h2 = ep_h1.component(0).mul_profile(&rho);
    Ok((h1, h2))
}

/// The perturbative measured expectation of Psi(h)* Psi(h):
/// S(conj h, h) + lambda^2 (W(conj h1, h1) + 2 Re S(conj h, h2)).
/// Requires a centered probe preparation.
pub fn perturbative_expectation(scenario: &DetectorScenario) -> Result<f64> {
    if !scenario.prep.component_is_centered(1) {
        return Err(Error::CenteredStateRequired);
    }
    let ctx = &scenario.context;
    let alg = ctx.algebra();
    let (h1, h2) = h1_h2(ctx, &scenario.h)?;
    let h_class = ctx.embed_class(1, &scenario.h)?;
    let h2_class = ctx.embed_class(1, &h2)?;
    let h1_sys = ctx.embed_class(0, &h1)?;
    let noise = scenario.prep.two_point(alg, &h_class.conj(), &h_class)?;
    let field_term = scenario
        .prep
        .full_two_point(alg, &h1_sys.conj(), &h1_sys)?;
    let cross = scenario.prep.two_point(alg, &h_class.conj(), &h2_class)?;
    let value = noise + scenario.lambda * scenario.lambda * (field_term + 2.0 * cross.re);
    Ok(value.re)
}

/// The exact measured expectation omega(epsilon_sigma(Psi(h)* Psi(h)))
/// at coupling scale lambda, through the induced polynomial. The ordered
/// product Psi(conj h) Psi(h) carries its commutator constant.
pub fn exact_expectation(scenario: &DetectorScenario) -> Result<f64> {
    let scaled = ScatteringContext::new(scenario.context.coupled_op().scaled_coupling(scenario.lambda))?;
    let h_class = scaled.embed_class(1, &scenario.h)?;
    let p = scaled.algebra().poly_product(
        &PolyObservable::field(h_class.conj()),
        &PolyObservable::field(h_class),
        false,
    )?;
    let induced = scaled.induced_poly(&scenario.prep, &p)?;
    Ok(scenario
        .prep
        .expectation_poly(scaled.algebra(), &induced)?
        .re)
}

/// One row of the weak-coupling sweep.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub exact: f64,
    pub perturbative: f64,
    pub difference: f64,
}

/// Evaluates exact and perturbative expectations over a lambda grid.
pub fn born_sweep(scenario: &DetectorScenario, lambdas: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let s = DetectorScenario { lambda, ..scenario.clone() };
        let exact = exact_expectation(&s)?;
        let perturbative = perturbative_expectation(&s)?;
        rows.push(SweepRow { lambda, exact, perturbative, difference: exact - perturbative });
    }
    Ok(rows)
}

/// The worldline response integral
/// dt^2 sum over n, n' of exp(-i E (n - n') dt) w(n) w(n')
/// W((n, x0), (n', x0)), with W the system two-point kernel.
pub fn worldline_response(scenario: &DetectorScenario) -> Result<C64> {
    let Some(worldline) = &scenario.worldline else {
        return Err(Error::Config("scenario has no worldline".into()));
    };
    let lattice = scenario.context.lattice();
    if worldline.window.len() != lattice.n_t {
        return Err(Error::Config("window must give one value per time slice".into()));
    }
    let active: Vec<usize> = (0..lattice.n_t).filter(|&n| worldline.window[n] != 0.0).collect();
    if let (Some(&first), Some(&last)) = (active.first(), active.last()) {
        if first < 2 || last + 3 > lattice.n_t {
            return Err(Error::WindowTouchesBoundary);
        }
    }
    let site = worldline.site % lattice.n_x;
    let mut acc = C64::ZERO;
    for &n in &active {
        for &n2 in &active {
            let phase = C64::from_polar(
                1.0,
                -worldline.gap * (n as f64 - n2 as f64) * lattice.dt,
            );
            let kernel = scenario.prep.kernel(0, n, site, n2, site);
            acc += phase * worldline.window[n] * worldline.window[n2] * kernel;
        }
    }
    Ok(acc * lattice.dt * lattice.dt)
}

/// The same double sum evaluated through smeared grid functions: the
/// response equals W(conj u, u) for the complex worldline smearing
/// u(n, x) = w(n) exp(i E n dt) / dx at the detector site.
pub fn worldline_response_smeared(scenario: &DetectorScenario) -> Result<C64> {
    let Some(worldline) = &scenario.worldline else {
        return Err(Error::Config("scenario has no worldline".into()));
    };
    let lattice = scenario.context.lattice();
    let site = worldline.site % lattice.n_x;
    let mut u = GridFunction::zeros(lattice);
    for n in 0..lattice.n_t {
        if worldline.window[n] != 0.0 {
            let v = C64::from_polar(worldline.window[n] / lattice.dx, worldline.gap * n as f64 * lattice.dt);
            u.set(n, site, v);
        }
    }
    let ctx = &scenario.context;
    let u_class = ctx.embed_class(0, &u)?;
    scenario
        .prep
        .full_two_point(ctx.algebra(), &u_class.conj(), &u_class)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use crate::util::loglog_slope;

    fn lat() -> Lattice {
        Lattice::new(24, 64, 0.7, 1.0).unwrap()
    }

    fn rho(l: Lattice) -> GridFunction {
        GridFunction::from_fn(l, |t, x| {
            if (6..=8).contains(&t) && (28..=33).contains(&x) {
                C64::from(0.6)
            } else {
                C64::ZERO
            }
        })
    }

    fn ctx() -> ScatteringContext {
        ScatteringContext::system_probe(lat(), 0.9, 0.6, &rho(lat())).unwrap()
    }

    fn vacuum_prep(l: Lattice) -> QuasifreeState {
        QuasifreeState::product(vec![
            QuasifreeState::vacuum(l, 0.9).unwrap(),
            QuasifreeState::vacuum(l, 0.6).unwrap(),
        ])
        .unwrap()
    }

    /// A complex late-time probe smearing with cone over the coupling.
    fn mode_h(l: Lattice) -> GridFunction {
        let mut g = GridFunction::zeros(l);
        for (i, x) in (27..35).enumerate() {
            g.set(14, x, C64::from_polar(0.8, 0.4 * i as f64));
            g.set(15, x, C64::from_polar(0.5, -0.3 * i as f64));
        }
        g
    }

    #[test]
    fn h1_h2_supports_inside_coupling() {
        let sc = ctx();
        let (h1, h2) = h1_h2(&sc, &mode_h(sc.lattice())).unwrap();
        let k = sc.coupling_region();
        assert!(!h1.is_zero());
        assert!(!h2.is_zero());
        assert!(h1.support().is_subset(k));
        assert!(h2.support().is_subset(k));
        // zero coupling: both vanish
        let free = ScatteringContext::system_probe(sc.lattice(), 0.9, 0.6, &GridFunction::zeros(sc.lattice())).unwrap();
        let (z1, z2) = h1_h2(&free, &mode_h(sc.lattice())).unwrap();
        assert!(z1.is_zero() && z2.is_zero());
    }

    #[test]
    fn scattered_f_minus_approaches_minus_lambda_h1() {
        let sc = ctx();
        let h = mode_h(sc.lattice());
        let (h1, _) = h1_h2(&sc, &h).unwrap();
        let lambdas = [1e-2, 3e-3, 1e-3];
        let mut errs = Vec::new();
        for &lam in &lambdas {
            let scaled = ScatteringContext::new(sc.coupled_op().scaled_coupling(lam)).unwrap();
            let pair = scaled.scattered_pair(&h).unwrap();
            let expected = h1.scaled(C64::from(-lam));
            errs.push(pair.f_minus().sub(&expected).unwrap().norm_inf());
        }
        // the residual is O(lambda^3)
        let slope = loglog_slope(&lambdas, &errs);
        assert!((slope - 3.0).abs() < 0.15, "slope {slope}");
    }

    #[test]
    fn perturbative_requires_centered_probe() {
        let sc = ctx();
        let l = sc.lattice();
        let mut src = GridFunction::zeros(l);
        src.set(3, 40, C64::from(0.4));
        let displaced = QuasifreeState::product(vec![
            QuasifreeState::vacuum(l, 0.9).unwrap(),
            QuasifreeState::coherent(l, 0.6, &src).unwrap(),
        ])
        .unwrap();
        let scenario = DetectorScenario::new(sc.clone(), 0.1, mode_h(l), displaced, None).unwrap();
        assert!(matches!(
            perturbative_expectation(&scenario),
            Err(Error::CenteredStateRequired)
        ));
    }

    #[test]
    fn zero_coupling_reduces_to_noise_term() {
        let l = lat();
        let free = ScatteringContext::system_probe(l, 0.9, 0.6, &GridFunction::zeros(l)).unwrap();
        let prep = vacuum_prep(l);
        let h = mode_h(l);
        let scenario = DetectorScenario::new(free.clone(), 0.2, h.clone(), prep.clone(), None).unwrap();
        let pert = perturbative_expectation(&scenario).unwrap();
        let at_zero = perturbative_expectation(
            &DetectorScenario::new(free.clone(), 0.0, h.clone(), prep.clone(), None).unwrap(),
        )
        .unwrap();
        assert!((pert - at_zero).abs() < 1e-13);
        // and both equal S(conj h, h)
        let h_class = free.embed_class(1, &h).unwrap();
        let noise = prep.two_point(free.algebra(), &h_class.conj(), &h_class).unwrap().re;
        assert!((at_zero - noise).abs() < 1e-13 * noise.abs().max(1.0));
        let exact = exact_expectation(&scenario).unwrap();
        assert!((exact - noise).abs() < 1e-10 * noise.abs().max(1.0));
    }

    #[test]
    fn exact_minus_perturbative_scales_as_lambda_fourth() {
        let sc = ctx();
        let prep = vacuum_prep(sc.lattice());
        let scenario = DetectorScenario::new(sc, 0.0, mode_h(lat()), prep, None).unwrap();
        let lambdas = [1e-1, 3e-2, 1e-2];
        let rows = born_sweep(&scenario, &lambdas).unwrap();
        let errs: Vec<f64> = rows.iter().map(|r| r.difference.abs()).collect();
        let slope = loglog_slope(&lambdas, &errs);
        assert!((slope - 4.0).abs() < 0.2, "slope {slope}, errs {errs:?}");
    }

    #[test]
    fn lambda_square_coefficient_extracted_by_richardson() {
        let sc = ctx();
        let prep = vacuum_prep(sc.lattice());
        let h = mode_h(sc.lattice());
        let scenario = DetectorScenario::new(sc.clone(), 0.0, h.clone(), prep.clone(), None).unwrap();
        let noise = exact_expectation(&scenario).unwrap();
        let eval = |lam: f64| {
            exact_expectation(&DetectorScenario { lambda: lam, ..scenario.clone() }).unwrap()
        };
        let lam = 2e-2;
        let c2_coarse = (eval(lam) - noise) / (lam * lam);
        let c2_fine = (eval(lam / 2.0) - noise) / (lam * lam / 4.0);
        let c2 = (4.0 * c2_fine - c2_coarse) / 3.0;
        // reference: W(conj h1, h1) + 2 Re S(conj h, h2)
        let (h1, h2) = h1_h2(&sc, &h).unwrap();
        let alg = sc.algebra();
        let h1_sys = sc.embed_class(0, &h1).unwrap();
        let h_probe = sc.embed_class(1, &h).unwrap();
        let h2_probe = sc.embed_class(1, &h2).unwrap();
        let reference = (prep.full_two_point(alg, &h1_sys.conj(), &h1_sys).unwrap()
            + 2.0 * prep.two_point(alg, &h_probe.conj(), &h2_probe).unwrap().re)
            .re;
        assert!(
            (c2 - reference).abs() < 0.01 * reference.abs(),
            "extracted {c2} vs reference {reference}"
        );
    }

    #[test]
    fn worldline_paths_agree_and_are_positive() {
        let sc = ctx();
        let l = sc.lattice();
        let prep = vacuum_prep(l);
        let mut window = vec![0.0; l.n_t];
        for (n, w) in window.iter_mut().enumerate().take(16).skip(6) {
            let s = (n as f64 - 6.0) / 10.0;
            *w = (std::f64::consts::PI * s).sin().powi(2);
        }
        // gap zero (pure window smearing) and a finite gap
        for gap in [0.0, 0.9] {
            let worldline = Worldline { site: 30, window: window.clone(), gap };
            let scenario =
                DetectorScenario::new(sc.clone(), 0.05, mode_h(l), prep.clone(), Some(worldline)).unwrap();
            let direct = worldline_response(&scenario).unwrap();
            let smeared = worldline_response_smeared(&scenario).unwrap();
            assert!(
                (direct - smeared).norm() < 1e-10 * direct.norm().max(1e-30),
                "gap {gap}: {direct} vs {smeared}"
            );
            assert!(direct.re >= -1e-10);
            assert!(direct.im.abs() < 1e-10 * direct.norm().max(1e-30));
        }
        // displaced system state: the kernel picks up the classical field
        let mut src = GridFunction::zeros(l);
        src.set(3, 29, C64::from(0.7));
        let displaced = QuasifreeState::product(vec![
            QuasifreeState::coherent(l, 0.9, &src).unwrap(),
            QuasifreeState::vacuum(l, 0.6).unwrap(),
        ])
        .unwrap();
        let coh_scenario = DetectorScenario::new(
            sc.clone(),
            0.05,
            mode_h(l),
            displaced,
            Some(Worldline { site: 30, window: window.clone(), gap: 0.9 }),
        )
        .unwrap();
        let coh_direct = worldline_response(&coh_scenario).unwrap();
        let coh_smeared = worldline_response_smeared(&coh_scenario).unwrap();
        assert!(
            (coh_direct - coh_smeared).norm() < 1e-10 * coh_direct.norm().max(1e-30),
            "{coh_direct} vs {coh_smeared}"
        );
        assert!(coh_direct.re >= -1e-10);
        let vac_scenario = DetectorScenario::new(
            sc.clone(),
            0.05,
            mode_h(l),
            vacuum_prep(l),
            Some(Worldline { site: 30, window: window.clone(), gap: 0.9 }),
        )
        .unwrap();
        assert!(
            (coh_direct - worldline_response(&vac_scenario).unwrap()).norm() > 1e-8,
            "displacement should shift the response"
        );
        let worldline = Worldline { site: 30, window, gap: 0.9 };
        let scenario = DetectorScenario::new(sc, 0.05, mode_h(l), prep, Some(worldline)).unwrap();
        // empty window gives zero
        let empty = DetectorScenario {
            worldline: Some(Worldline { site: 30, window: vec![0.0; l.n_t], gap: 0.9 }),
            ..scenario.clone()
        };
        assert_eq!(worldline_response(&empty).unwrap(), C64::ZERO);
        // boundary-touching window is rejected
        let mut bad = vec![0.0; l.n_t];
        bad[0] = 1.0;
        let touching = DetectorScenario {
            worldline: Some(Worldline { site: 30, window: bad, gap: 0.9 }),
            ..scenario
        };
        assert!(matches!(worldline_response(&touching), Err(Error::WindowTouchesBoundary)));
    }

    #[test]
    fn one_site_coupling_with_tuned_mode_matches_worldline() {
        // rho concentrated on a single site with a temporal window, h tuned
        // so that E_Q^- h oscillates as exp(i Omega_0 t) along the site:
        // then W(conj h1, h1) equals the worldline response at gap Omega_0.
        let l = lat();
        let m_probe = 0.6;
        let site = 30usize;
        let mut window = vec![0.0; l.n_t];
        for (n, w) in window.iter_mut().enumerate().take(11).skip(5) {
            let s = (n as f64 - 5.0) / 6.0;
            *w = (std::f64::consts::PI * s).sin().powi(2);
        }
        let mut rho_line = GridFunction::zeros(l);
        for (n, w) in window.iter().enumerate() {
            if *w != 0.0 {
                rho_line.set(n, site, C64::from(w / l.dx));
            }
        }
        let sc = ScatteringContext::system_probe(l, 0.9, m_probe, &rho_line).unwrap();
        let prep = vacuum_prep(l);
        // spatially constant solution of the probe equation: the k = 0 mode
        let omega_sq = m_probe * m_probe;
        let big_omega = (1.0 - omega_sq * l.dt * l.dt / 2.0).acos() / l.dt;
        let solution = GridFunction::from_fn(l, |t, _| C64::from_polar(1.0, big_omega * t as f64 * l.dt));
        // cut it above the window to produce a compactly supported h: the
        // two-slice source with E_Q^- h equal to the solution below the cut
        let q_op = CoupledOperator::free_scalar(l, m_probe).unwrap();
        let cut = 16usize;
        let idt2 = 1.0 / (l.dt * l.dt);
        let h = GridFunction::from_fn(l, |t, x| {
            if t == cut {
                -solution.value(cut + 1, x) * idt2
            } else if t == cut + 1 {
                solution.value(cut, x) * idt2
            } else {
                C64::ZERO
            }
        });
        // check the tuning: E_Q^- h equals the solution on the window
        let eqh = q_op
            .green_apply(GreenDirection::Advanced, &MultiComponentFunction::new(vec![h.clone()]).unwrap())
            .unwrap();
        for (n, w) in window.iter().enumerate() {
            if *w != 0.0 {
                let diff = (eqh.component(0).value(n, site) - solution.value(n, site)).norm();
                assert!(diff < 1e-11, "tuning failed at slice {n}: {diff}");
            }
        }
        let worldline = Worldline { site, window, gap: big_omega };
        let scenario =
            DetectorScenario::new(sc.clone(), 0.05, h.clone(), prep.clone(), Some(worldline)).unwrap();
        let response = worldline_response(&scenario).unwrap();
        let (h1, _) = h1_h2(&sc, &h).unwrap();
        let h1_sys = sc.embed_class(0, &h1).unwrap();
        let field_term = prep
            .full_two_point(sc.algebra(), &h1_sys.conj(), &h1_sys)
            .unwrap();
        assert!(
            (field_term - response).norm() < 1e-9 * response.norm(),
            "{field_term} vs {response}"
        );
    }
}
