//! Linear time-optimal control: reachable sets through their support
//! functions, separation of two reachable sets, the first touching time of a
//! pair, and bang-bang synthesis.
//!
//! For `x' = M x + N u` with `u ∈ [-1, 1]^m`, the set reachable from `x0` at
//! time `t` has support function
//!
//! ```text
//! h(g) = g · X_t x0 + ∫₀ᵗ Σ_j |gᵀ X_{t-s} N_j| ds,   X_t = exp(t M)
//! ```
//!
//! and the maximizer in direction `g` is generated by the control
//! `u_j(s) = sgn(gᵀ X_{t-s} N_j)`. Set geometry is limited to state
//! dimensions 1 and 2, where a direction grid plus golden-section refinement
//! is accurate enough.

use std::f64::consts::PI;

use crate::dynamics::{
    expm, integrate_plant, linear_transition, normality_check, Dynamics, LinearSystem, PlantState,
    Trajectory,
};
use crate::{Error, Matrix, Result, Vector};

/// Settings for set geometry and the touching-time search.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryOptions {
    /// Quadrature step (s).
    pub h: f64,
    /// Direction grid size for planar sets.
    pub angles: usize,
    /// Bisection tolerance on time (s).
    pub tau_tol: f64,
    /// Give up doubling the bracket past this time (s).
    pub max_horizon: f64,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        GeometryOptions {
            h: 1e-3,
            angles: 720,
            tau_tol: 1e-4,
            max_horizon: 1024.0,
        }
    }
}

/// Settings for time-optimal synthesis.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOptions {
    /// Integration and quadrature step (s).
    pub h: f64,
    /// Normal-direction grid size for planar systems.
    pub angles: usize,
    /// Latest admissible arrival time (s).
    pub horizon: f64,
    /// Coarse time scan step before bisection (s).
    pub scan_step: f64,
    pub tau_tol: f64,
    /// Allowed distance (∞-norm) between the extremal trajectory's end and the target.
    pub landing_tol: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            h: 1e-3,
            angles: 1024,
            horizon: 20.0,
            scan_step: 0.05,
            tau_tol: 1e-7,
            landing_tol: 1e-3,
        }
    }
}

fn check_geometry_dim(n: usize) -> Result<()> {
    if n == 1 || n == 2 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(n))
    }
}

fn check_normal(sys: &LinearSystem) -> Result<()> {
    if normality_check(sys).normal {
        Ok(())
    } else {
        Err(Error::Precondition("system is not normal".into()))
    }
}

/// Unit vector at angle `theta` (planar) or the sign direction (scalar).
fn direction(n: usize, theta: f64) -> Vector {
    if n == 1 {
        Vector::from_element(1, if theta.cos() >= 0.0 { 1.0 } else { -1.0 })
    } else {
        Vector::from_column_slice(&[theta.cos(), theta.sin()])
    }
}

/// Maximizes `f` over unit directions: both signs for `n = 1`, an angle grid
/// refined by golden-section search for `n = 2`.
fn maximize_over_directions<F>(n: usize, angles: usize, mut f: F) -> (Vector, f64)
where
    F: FnMut(&Vector) -> f64,
{
    if n == 1 {
        let plus = Vector::from_element(1, 1.0);
        let minus = Vector::from_element(1, -1.0);
        let (fp, fm) = (f(&plus), f(&minus));
        return if fp >= fm { (plus, fp) } else { (minus, fm) };
    }
    let count = angles.max(8);
    let spacing = 2.0 * PI / count as f64;
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..count {
        let theta = k as f64 * spacing;
        let value = f(&direction(2, theta));
        if value > best.1 {
            best = (theta, value);
        }
    }

    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (best.0 - spacing, best.0 + spacing);
    let mut c = b - golden * (b - a);
    let mut d = a + golden * (b - a);
    let mut fc = f(&direction(2, c));
    let mut fd = f(&direction(2, d));
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - golden * (b - a);
            fc = f(&direction(2, c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + golden * (b - a);
            fd = f(&direction(2, d));
        }
    }
    let (theta, value) = if fc >= fd { (c, fc) } else { (d, fd) };
    if value >= best.1 {
        (direction(2, theta), value)
    } else {
        (direction(2, best.0), best.1)
    }
}

/// `K(t, x0)`, the set reachable at time `t`, held as precomputed quadrature
/// data for its support function.
#[derive(Debug, Clone)]
pub struct ReachableSet {
    origin: PlantState,
    horizon: f64,
    center: Vector,
    weights: Vec<f64>,
    /// `X_{t-s_k} N` at the quadrature nodes `s_k`, column-major, one `n × m` block per node.
    transported: Vec<f64>,
    controls: usize,
}

impl ReachableSet {
    pub fn new(sys: &LinearSystem, origin: &PlantState, horizon: f64, h: f64) -> Result<Self> {
        if origin.dim() != sys.state_dim() {
            return Err(Error::usage("origin dimension does not match the system"));
        }
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::usage(format!("horizon must be finite and >= 0, got {horizon}")));
        }
        if !(h > 0.0) {
            return Err(Error::usage("quadrature step must be positive"));
        }
        let center = linear_transition(sys, horizon) * origin.as_vector();
        if horizon == 0.0 {
            return Ok(ReachableSet {
                origin: origin.clone(),
                horizon,
                center,
                weights: Vec::new(),
                transported: Vec::new(),
                controls: sys.control_dim(),
            });
        }

        // composite Simpson on an even number of intervals
        let intervals = 2 * ((horizon / (2.0 * h) - 1e-9).ceil().max(1.0) as usize);
        let q = horizon / intervals as f64;
        let step = expm(&(sys.state_matrix() * q));
        let mut powers = Vec::with_capacity(intervals + 1);
        let mut p = sys.input_matrix().clone();
        for _ in 0..=intervals {
            powers.push(p.clone());
            p = &step * p;
        }
        // node s_k = k q needs exp((t - s_k) M) N = powers[intervals - k]
        let transported = powers.iter().rev().flat_map(|b| b.iter().copied()).collect();
        let weights = (0..=intervals)
            .map(|k| {
                let w = if k == 0 || k == intervals {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * q / 3.0
            })
            .collect();
        Ok(ReachableSet {
            origin: origin.clone(),
            horizon,
            center,
            weights,
            transported,
            controls: sys.control_dim(),
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn origin(&self) -> &PlantState {
        &self.origin
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `X_t x0`, the point reached with zero control.
    pub fn center(&self) -> &Vector {
        &self.center
    }

    /// `h(g) = max over the set of g · x`.
    pub fn support(&self, g: &Vector) -> f64 {
        let g = g.as_slice();
        let spread: f64 = self
            .weights
            .iter()
            .zip(self.transported.chunks_exact(g.len() * self.controls))
            .map(|(w, block)| {
                w * block
                    .chunks_exact(g.len())
                    .map(|col| dot(col, g).abs())
                    .sum::<f64>()
            })
            .sum();
        dot(self.center.as_slice(), g) + spread
    }

    /// A maximizer of `g · x` over the set.
    pub fn extremal_point(&self, g: &Vector) -> Vector {
        let n = g.len();
        let mut x = self.center.clone();
        for (w, block) in self.weights.iter().zip(self.transported.chunks_exact(n * self.controls)) {
            for col in block.chunks_exact(n) {
                let u = sgn_plus(dot(col, g.as_slice()));
                for (xi, ci) in x.iter_mut().zip(col) {
                    *xi += w * u * ci;
                }
            }
        }
        x
    }

    /// `[lo, hi]` for a one-dimensional set.
    pub fn interval(&self) -> Result<(f64, f64)> {
        if self.dim() != 1 {
            return Err(Error::UnsupportedDimension(self.dim()));
        }
        let plus = Vector::from_element(1, 1.0);
        Ok((-self.support(&-&plus), self.support(&plus)))
    }

    /// Boundary points of a planar set for `count` evenly spaced outward normals.
    pub fn boundary(&self, count: usize) -> Result<Vec<(f64, Vector)>> {
        if self.dim() != 2 {
            return Err(Error::UnsupportedDimension(self.dim()));
        }
        Ok((0..count)
            .map(|k| {
                let theta = 2.0 * PI * k as f64 / count as f64;
                (theta, self.extremal_point(&direction(2, theta)))
            })
            .collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sgn` with `sgn(0) = +1`.
fn sgn_plus(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Support function of `K(t, x0)` in direction `g`.
pub fn support(sys: &LinearSystem, x0: &PlantState, t: f64, g: &Vector, h: f64) -> Result<f64> {
    if g.len() != sys.state_dim() || g.iter().all(|v| *v == 0.0) {
        return Err(Error::usage("direction must be non-zero and match the state dimension"));
    }
    Ok(ReachableSet::new(sys, x0, t, h)?.support(g))
}

/// Outcome of a separating-hyperplane search between two sets.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationCertificate {
    pub disjoint: bool,
    /// Unit direction along which the first set lies below the second.
    pub direction: Vector,
    /// `min over K2 of g·x − max over K1 of g·x`, maximized over `g`; positive iff disjoint.
    pub margin: f64,
}

/// Searches for a hyperplane strictly separating two reachable sets.
pub fn separation(
    first: &ReachableSet,
    second: &ReachableSet,
    angles: usize,
) -> Result<SeparationCertificate> {
    let n = first.dim();
    if second.dim() != n {
        return Err(Error::usage("sets live in different dimensions"));
    }
    check_geometry_dim(n)?;
    let (direction, margin) =
        maximize_over_directions(n, angles, |g| -(first.support(g) + second.support(&-g)));
    Ok(SeparationCertificate {
        disjoint: margin > 0.0,
        direction,
        margin,
    })
}

/// First contact of two reachable sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Touching {
    pub tau: f64,
    /// Approximate common point of the two sets at `tau`.
    pub x_star: PlantState,
    /// Outward normal of the first set at the contact (the second has its negative).
    pub normal: Vector,
}

/// `τ^m = sup{τ : K(τ, x1) ∩ K(τ, x2) = ∅}` by bisection, and the touching point.
pub fn tau_m(
    sys: &LinearSystem,
    x1: &PlantState,
    x2: &PlantState,
    opts: &GeometryOptions,
) -> Result<Touching> {
    if x1 == x2 {
        return Err(Error::usage("touching time needs two distinct states"));
    }
    if x1.dim() != sys.state_dim() || x2.dim() != sys.state_dim() {
        return Err(Error::usage("state dimension does not match the system"));
    }
    check_geometry_dim(sys.state_dim())?;
    check_normal(sys)?;

    let separate = |tau: f64| -> Result<SeparationCertificate> {
        let k1 = ReachableSet::new(sys, x1, tau, opts.h)?;
        let k2 = ReachableSet::new(sys, x2, tau, opts.h)?;
        separation(&k1, &k2, opts.angles)
    };

    let mut lo = 0.0;
    let mut lo_cert = separate(0.0)?;
    let mut hi = 1.0;
    loop {
        let cert = separate(hi)?;
        if !cert.disjoint {
            break;
        }
        lo = hi;
        lo_cert = cert;
        hi *= 2.0;
        if hi > opts.max_horizon {
            return Err(Error::Unreachable {
                horizon: opts.max_horizon,
            });
        }
    }
    while hi - lo > opts.tau_tol {
        let mid = 0.5 * (lo + hi);
        let cert = separate(mid)?;
        if cert.disjoint {
            lo = mid;
            lo_cert = cert;
        } else {
            hi = mid;
        }
    }

    let tau = 0.5 * (lo + hi);
    let g = lo_cert.direction;
    let p1 = ReachableSet::new(sys, x1, tau, opts.h)?.extremal_point(&g);
    let p2 = ReachableSet::new(sys, x2, tau, opts.h)?.extremal_point(&-&g);
    Ok(Touching {
        tau,
        x_star: PlantState::new((p1 + p2) * 0.5)?,
        normal: g,
    })
}

/// Bang-bang control `sgn(ηᵀ X_{τ*} X_t^{-1} N)` per input, with `sgn(0) = +1`.
pub fn extremal_control(sys: &LinearSystem, eta: &Vector, tau_star: f64, t: f64) -> Result<Vector> {
    if eta.len() != sys.state_dim() || eta.iter().all(|v| *v == 0.0) {
        return Err(Error::usage("η must be non-zero and match the state dimension"));
    }
    if !(0.0..=tau_star).contains(&t) {
        return Err(Error::usage(format!("t = {t} outside [0, {tau_star}]")));
    }
    Ok(switching_function(sys, eta, tau_star - t).map(sgn_plus))
}

/// `Nᵀ X_{τ*-t}ᵀ η`, one entry per input.
fn switching_function(sys: &LinearSystem, eta: &Vector, time_to_go: f64) -> Vector {
    (linear_transition(sys, time_to_go) * sys.input_matrix()).tr_mul(eta)
}

/// Mean of the extremal control over `[a, b]`, evaluated at `pieces`
/// sub-interval midpoints. Holding this mean over the step keeps a switch
/// that falls inside the step from being rounded to the grid.
pub fn extremal_control_mean(
    sys: &LinearSystem,
    eta: &Vector,
    tau_star: f64,
    a: f64,
    b: f64,
    pieces: usize,
) -> Vector {
    let pieces = pieces.max(1);
    let width = (b - a) / pieces as f64;
    let mut sum = Vector::zeros(sys.control_dim());
    for i in 0..pieces {
        let s = (a + (i as f64 + 0.5) * width).clamp(0.0, tau_star);
        sum += switching_function(sys, eta, tau_star - s).map(sgn_plus);
    }
    sum / pieces as f64
}

/// Bang-bang control described by its switch times.
#[derive(Debug, Clone, PartialEq)]
struct BangProfile {
    tau: f64,
    /// Per input: the sign on `[0, first switch)`.
    initial: Vec<f64>,
    /// Per input: ascending switch times in `(0, tau)`.
    switches: Vec<Vec<f64>>,
}

impl BangProfile {
    /// Locates the sign changes of the switching function on a grid of
    /// spacing about `h` and pins each one down by bisection.
    fn new(sys: &LinearSystem, eta: &Vector, tau: f64, h: f64) -> Self {
        let m = sys.control_dim();
        let intervals = ((tau / h).ceil() as usize).max(1);
        let q = tau / intervals as f64;
        let step = expm(&(sys.state_matrix() * q));
        // phi[k] = switching function at s_k = tau - k q (time to go k q)
        let mut phi = Vec::with_capacity(intervals + 1);
        let mut transported = sys.input_matrix().clone();
        for _ in 0..=intervals {
            phi.push(transported.tr_mul(eta));
            transported = &step * transported;
        }
        let exact = |j: usize, s: f64| switching_function(sys, eta, tau - s)[j];

        let mut initial = Vec::with_capacity(m);
        let mut switches = Vec::with_capacity(m);
        for j in 0..m {
            initial.push(sgn_plus(phi[intervals][j]));
            let mut found = Vec::new();
            for k in (1..=intervals).rev() {
                // s runs forward as k runs down
                let (sa, sb) = ((intervals - k) as f64 * q, (intervals - k + 1) as f64 * q);
                let (fa, fb) = (phi[k][j], phi[k - 1][j]);
                if sgn_plus(fa) == sgn_plus(fb) {
                    continue;
                }
                let (mut lo, mut hi) = (sa, sb);
                let sign_lo = sgn_plus(fa);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if sgn_plus(exact(j, mid)) == sign_lo {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                found.push(0.5 * (lo + hi));
            }
            switches.push(found);
        }
        BangProfile { tau, initial, switches }
    }

    fn at(&self, t: f64) -> Vector {
        Vector::from_iterator(
            self.initial.len(),
            self.initial.iter().zip(&self.switches).map(|(s0, sw)| {
                let flips = sw.partition_point(|s| *s <= t);
                if flips % 2 == 0 {
                    *s0
                } else {
                    -s0
                }
            }),
        )
    }

    /// `∫_a^b u ds` for `0 <= a <= b <= tau`.
    fn integral(&self, a: f64, b: f64) -> Vector {
        Vector::from_iterator(
            self.initial.len(),
            self.initial.iter().zip(&self.switches).map(|(s0, sw)| {
                let mut total = 0.0;
                let mut sign = *s0;
                let mut left = 0.0f64;
                for edge in sw.iter().copied().chain(std::iter::once(self.tau)) {
                    let (lo, hi) = (left.max(a), edge.min(b));
                    if hi > lo {
                        total += sign * (hi - lo);
                    }
                    sign = -sign;
                    left = edge;
                }
                total
            }),
        )
    }

    /// Exact end state from `x0`: each constant piece contributes
    /// `±(Γ(τ − a) − Γ(τ − b)) N_j` with `Γ(r) = ∫₀ʳ exp(σ M) dσ`.
    fn landing(&self, sys: &LinearSystem, x0: &Vector) -> Vector {
        let mut x = linear_transition(sys, self.tau) * x0;
        for (j, (s0, sw)) in self.initial.iter().zip(&self.switches).enumerate() {
            let column = sys.input_matrix().column(j).into_owned();
            let mut sign = *s0;
            let mut prev = integrated_transition(sys, self.tau) * &column;
            for edge in sw.iter().copied().chain(std::iter::once(self.tau)) {
                let next = integrated_transition(sys, self.tau - edge) * &column;
                x += (&prev - &next) * sign;
                prev = next;
                sign = -sign;
            }
        }
        x
    }
}

/// `∫₀ʳ exp(σ M) dσ`, the upper-right block of `exp(r [[M, I], [0, 0]])`.
fn integrated_transition(sys: &LinearSystem, r: f64) -> Matrix {
    let n = sys.state_dim();
    let mut aug = Matrix::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(sys.state_matrix());
    aug.view_mut((0, n), (n, n)).fill_with_identity();
    expm(&(aug * r)).view((0, n), (n, n)).into_owned()
}

/// Landing residual as a function of the shooting parameters: `(τ)` for a
/// scalar system with the sign of `η` fixed, `(θ, τ)` with `η = (cos θ, sin θ)` for a planar one.
struct Shooting<'a> {
    sys: &'a LinearSystem,
    x0: &'a Vector,
    target: &'a Vector,
    h: f64,
    scalar_sign: f64,
}

impl Shooting<'_> {
    fn eta(&self, p: &[f64]) -> Vector {
        if p.len() == 1 {
            Vector::from_element(1, self.scalar_sign)
        } else {
            direction(2, p[0])
        }
    }

    fn residual(&self, p: &[f64]) -> Option<Vector> {
        let tau = *p.last()?;
        if !(tau > 0.0) {
            return None;
        }
        let profile = BangProfile::new(self.sys, &self.eta(p), tau, self.h);
        Some(profile.landing(self.sys, self.x0) - self.target)
    }

    /// Damped Newton with a forward-difference Jacobian.
    fn refine(&self, mut p: Vec<f64>) -> Vec<f64> {
        let Some(mut r) = self.residual(&p) else {
            return p;
        };
        for _ in 0..30 {
            if r.amax() < 1e-12 {
                break;
            }
            let k = p.len();
            let mut jac = Matrix::zeros(k, k);
            for i in 0..k {
                let delta = 1e-7 * p[i].abs().max(1.0);
                let mut q = p.clone();
                q[i] += delta;
                let Some(rq) = self.residual(&q) else {
                    return p;
                };
                jac.set_column(i, &((rq - &r) / delta));
            }
            let Some(step) = jac.lu().solve(&-&r) else {
                return p;
            };
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..20 {
                let q: Vec<f64> = p.iter().zip(step.iter()).map(|(a, d)| a + scale * d).collect();
                if let Some(rq) = self.residual(&q) {
                    if rq.amax() < r.amax() {
                        p = q;
                        r = rq;
                        accepted = true;
                        break;
                    }
                }
                scale *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        p
    }
}

/// A time-optimal transfer found by [`synthesize_time_optimal`].
#[derive(Debug, Clone)]
pub struct TimeOptimalSolution {
    pub tau: f64,
    /// Outward normal at the target of the reachable set at time `tau`.
    pub eta: Option<Vector>,
    /// Playback of the step-averaged control on the integrator grid.
    pub trajectory: Trajectory,
    /// ∞-norm distance between the trajectory's end and the target.
    pub landing_error: f64,
    profile: Option<BangProfile>,
}

impl TimeOptimalSolution {
    /// Bang-bang law at time `t ∈ [0, tau]`; `None` for the trivial zero-time transfer.
    pub fn control_at(&self, t: f64) -> Option<Vector> {
        Some(self.profile.as_ref()?.at(t.clamp(0.0, self.tau)))
    }

    /// Switch times of each input, ascending.
    pub fn switch_times(&self) -> Vec<Vec<f64>> {
        self.profile.as_ref().map_or_else(Vec::new, |p| p.switches.clone())
    }

    /// `∫_a^b u ds` with the control taken as zero outside `[0, tau]`.
    pub fn control_integral(&self, a: f64, b: f64) -> Option<Vector> {
        let profile = self.profile.as_ref()?;
        let (a, b) = (a.clamp(0.0, self.tau), b.clamp(0.0, self.tau));
        Some(profile.integral(a, b.max(a)))
    }

    /// Control to hold over the grid step `[a, a + h)`: the exact mean of the
    /// bang-bang law over the part of the step before `tau`. `None` once `a >= tau`.
    pub fn step_control(&self, a: f64, h: f64) -> Option<Vector> {
        if a >= self.tau {
            return None;
        }
        let b = (a + h).min(self.tau);
        let profile = self.profile.as_ref()?;
        let mean = self.control_integral(a, b)? / (b - a);
        // inputs that do not switch inside the step hold their sign exactly
        Some(Vector::from_fn(mean.len(), |j, _| {
            if profile.switches[j].iter().any(|s| *s > a && *s < b) {
                mean[j]
            } else {
                profile.at(0.5 * (a + b))[j]
            }
        }))
    }
}

/// `max over unit g of (g · target − h(g))`: non-positive iff the target is in the set.
fn membership_gap(set: &ReachableSet, target: &Vector, angles: usize) -> (Vector, f64) {
    maximize_over_directions(set.dim(), angles, |g| g.dot(target) - set.support(g))
}

/// Minimum-time transfer from `x0` to `x_star` with a bang-bang control.
///
/// The arrival time is the first `τ` with `x_star ∈ K(τ, x0)`, found by a
/// coarse scan then bisection on the support-function membership gap. The
/// normal `η` is the gap's maximizing direction at that time. `(η, τ)` is
/// then polished by Newton shooting on the exact landing state of the
/// bang-bang control, and the step-averaged control is integrated on the
/// grid to confirm the landing.
pub fn synthesize_time_optimal(
    sys: &LinearSystem,
    x0: &PlantState,
    x_star: &PlantState,
    opts: &SynthesisOptions,
) -> Result<TimeOptimalSolution> {
    let n = sys.state_dim();
    if x0.dim() != n || x_star.dim() != n {
        return Err(Error::usage("state dimension does not match the system"));
    }
    check_geometry_dim(n)?;
    check_normal(sys)?;

    if x0 == x_star {
        let mut trajectory = Trajectory::with_capacity(sys.control_dim(), 1);
        trajectory.times.push(0.0);
        trajectory.states.push(x0.clone());
        return Ok(TimeOptimalSolution {
            tau: 0.0,
            eta: None,
            trajectory,
            landing_error: 0.0,
            profile: None,
        });
    }

    let target = x_star.as_vector();
    let gap_at = |tau: f64| -> Result<(Vector, f64)> {
        let set = ReachableSet::new(sys, x0, tau, opts.h)?;
        Ok(membership_gap(&set, target, opts.angles))
    };

    let mut lo = 0.0;
    let mut hi = None;
    let mut t = 0.0;
    while t < opts.horizon {
        let next = (t + opts.scan_step).min(opts.horizon);
        if gap_at(next)?.1 <= 0.0 {
            lo = t;
            hi = Some(next);
            break;
        }
        t = next;
    }
    let Some(mut hi) = hi else {
        return Err(Error::Unreachable {
            horizon: opts.horizon,
        });
    };
    while hi - lo > opts.tau_tol {
        let mid = 0.5 * (lo + hi);
        if gap_at(mid)?.1 <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (eta, _) = gap_at(hi)?;

    let shooting = Shooting {
        sys,
        x0: x0.as_vector(),
        target,
        h: opts.h,
        scalar_sign: sgn_plus(eta[0]),
    };
    let start = if n == 1 { vec![hi] } else { vec![eta[1].atan2(eta[0]), hi] };
    let refined = shooting.refine(start);
    let tau = *refined.last().expect("at least one parameter");
    let eta = shooting.eta(&refined);
    let profile = BangProfile::new(sys, &eta, tau, opts.h);

    let mut solution = TimeOptimalSolution {
        tau,
        eta: Some(eta),
        trajectory: Trajectory::with_capacity(sys.control_dim(), 0),
        landing_error: f64::INFINITY,
        profile: Some(profile),
    };
    let h = opts.h;
    let signal = |t: f64| {
        solution
            .step_control(t, h)
            .unwrap_or_else(|| Vector::zeros(sys.control_dim()))
    };
    let trajectory = integrate_plant(sys, x0, &signal, 0.0, tau, h)?;
    let landing_error = (trajectory.final_state().as_vector() - target).amax();
    if landing_error > opts.landing_tol {
        return Err(Error::Precondition(format!(
            "extremal trajectory missed the target by {landing_error:.3e}"
        )));
    }
    solution.trajectory = trajectory;
    solution.landing_error = landing_error;
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar() -> LinearSystem {
        LinearSystem::scalar_decay()
    }

    fn s(v: f64) -> PlantState {
        PlantState::scalar(v)
    }

    #[test]
    fn support_examples() {
        let sys = scalar();
        let plus = Vector::from_element(1, 1.0);
        assert_eq!(support(&sys, &s(0.3), 0.0, &plus, 1e-3).unwrap(), 0.3);
        for t in [0.1, 0.5, 2.0] {
            let expected = 1.0 - (-t as f64).exp();
            assert!((support(&sys, &s(0.0), t, &plus, 1e-3).unwrap() - expected).abs() < 1e-8);
            assert!((support(&sys, &s(0.0), t, &-&plus, 1e-3).unwrap() - expected).abs() < 1e-8);
        }
        assert!(support(&sys, &s(0.0), 1.0, &Vector::zeros(1), 1e-3).is_err());
    }

    #[test]
    fn double_integrator_support_matches_closed_form() {
        // h(g) = g·(p + v t, v) + ∫₀ᵗ |g1 r + g2| dr
        let sys = LinearSystem::double_integrator();
        let x0 = PlantState::from_slice(&[0.2, -0.4]).unwrap();
        let t = 1.5;
        let set = ReachableSet::new(&sys, &x0, t, 1e-3).unwrap();
        let antiderivative = |g1: f64, g2: f64, r: f64| {
            // ∫₀ʳ |g1 ρ + g2| dρ, splitting at the sign change
            let f = |a: f64, b: f64| (0.5 * g1 * (b * b - a * a) + g2 * (b - a)).abs();
            let root = if g1 != 0.0 { -g2 / g1 } else { -1.0 };
            if root > 0.0 && root < r {
                f(0.0, root) + f(root, r)
            } else {
                f(0.0, r)
            }
        };
        for k in 0..16 {
            let theta = 2.0 * PI * k as f64 / 16.0 + 0.1;
            let g = direction(2, theta);
            let center = g[0] * (x0[0] + x0[1] * t) + g[1] * x0[1];
            let expected = center + antiderivative(g[0], g[1], t);
            assert!((set.support(&g) - expected).abs() < 1e-6, "theta {theta}");
        }
    }

    #[test]
    fn separation_examples() {
        let sys = scalar();
        let k1 = ReachableSet::new(&sys, &s(-0.5), 0.2, 1e-3).unwrap();
        let k2 = ReachableSet::new(&sys, &s(0.5), 0.2, 1e-3).unwrap();
        let cert = separation(&k1, &k2, 720).unwrap();
        assert!(cert.disjoint && cert.margin > 0.0);
        assert_eq!(cert.direction[0], 1.0);

        let same = separation(&k1, &k1, 720).unwrap();
        assert!(!same.disjoint && same.margin <= 0.0);

        let k1 = ReachableSet::new(&sys, &s(-0.5), 0.5, 1e-3).unwrap();
        let k2 = ReachableSet::new(&sys, &s(0.5), 0.5, 1e-3).unwrap();
        assert!(!separation(&k1, &k2, 720).unwrap().disjoint);

        let three = LinearSystem::from_rows(
            &[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]],
            &[vec![0.0], vec![0.0], vec![1.0]],
        )
        .unwrap();
        let x = PlantState::from_slice(&[0.0, 0.0, 0.0]).unwrap();
        let k = ReachableSet::new(&three, &x, 0.1, 1e-2).unwrap();
        assert!(matches!(separation(&k, &k, 8), Err(Error::UnsupportedDimension(3))));
    }

    #[test]
    fn interval_and_boundary() {
        let sys = scalar();
        let k = ReachableSet::new(&sys, &s(0.5), 1.0, 1e-3).unwrap();
        let (lo, hi) = k.interval().unwrap();
        let decay = (-1f64).exp();
        assert!((lo - (0.5 * decay - (1.0 - decay))).abs() < 1e-8);
        assert!((hi - (0.5 * decay + (1.0 - decay))).abs() < 1e-8);
        assert!(k.boundary(8).is_err());

        let di = LinearSystem::double_integrator();
        let k = ReachableSet::new(&di, &PlantState::from_slice(&[0.0, 0.0]).unwrap(), 1.0, 1e-3).unwrap();
        let pts = k.boundary(64).unwrap();
        assert_eq!(pts.len(), 64);
        for (theta, p) in pts {
            let g = direction(2, theta);
            assert!((g.dot(&p) - k.support(&g)).abs() < 1e-6);
        }
    }

    #[test]
    fn tau_m_scalar_examples() {
        let sys = scalar();
        let opts = GeometryOptions::default();
        let touch = tau_m(&sys, &s(-0.5), &s(0.5), &opts).unwrap();
        assert!((touch.tau - 1.5f64.ln()).abs() < 1e-3);
        assert!(touch.x_star[0].abs() < 1e-3);
        for sep in [0.2, 0.8] {
            let touch = tau_m(&sys, &s(-sep), &s(sep), &opts).unwrap();
            assert!((touch.tau - (1.0 + sep as f64).ln()).abs() < 1e-3);
            assert!(touch.x_star[0].abs() < 1e-3);
        }
        assert!(tau_m(&sys, &s(0.1), &s(0.1), &opts).is_err());
        let degenerate = LinearSystem::scalar(-1.0, 0.0);
        assert!(matches!(
            tau_m(&degenerate, &s(0.0), &s(1.0), &opts),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn extremal_control_examples() {
        let sys = scalar();
        let up = Vector::from_element(1, 1.0);
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(extremal_control(&sys, &up, 1.0, t).unwrap()[0], 1.0);
            assert_eq!(extremal_control(&sys, &-&up, 1.0, t).unwrap()[0], -1.0);
        }
        let di = LinearSystem::double_integrator();
        let eta = Vector::from_column_slice(&[0.0, 1.0]);
        for t in [0.0, 0.5, 0.99] {
            assert_eq!(extremal_control(&di, &eta, 1.0, t).unwrap()[0], 1.0);
        }
        assert!(extremal_control(&sys, &up, 1.0, 1.5).is_err());
        assert!(extremal_control(&sys, &Vector::zeros(1), 1.0, 0.5).is_err());
    }

    #[test]
    fn synthesis_scalar_examples() {
        let sys = scalar();
        let opts = SynthesisOptions::default();
        let sol = synthesize_time_optimal(&sys, &s(0.0), &s(0.5), &opts).unwrap();
        assert!((sol.tau - 2f64.ln()).abs() < 1e-3);
        assert!(sol.trajectory.controls.iter().all(|u| u[0] == 1.0));
        assert_eq!(sol.control_at(0.0).unwrap()[0], 1.0);

        let sol = synthesize_time_optimal(&sys, &s(0.0), &s(-0.5), &opts).unwrap();
        assert!((sol.tau - 2f64.ln()).abs() < 1e-3);
        assert_eq!(sol.control_at(0.0).unwrap()[0], -1.0);

        let sol = synthesize_time_optimal(&sys, &s(0.2), &s(0.2), &opts).unwrap();
        assert_eq!(sol.tau, 0.0);
        assert!(sol.trajectory.controls.is_empty());

        // |x| < 1 is all the scalar plant can reach
        let short = SynthesisOptions {
            horizon: 3.0,
            ..SynthesisOptions::default()
        };
        assert!(matches!(
            synthesize_time_optimal(&sys, &s(0.0), &s(1.5), &short),
            Err(Error::Unreachable { .. })
        ));
    }

    #[test]
    fn synthesis_double_integrator_rest_to_rest() {
        // bang-bang from (-1, 0) to the origin: switch at 1 s, arrive at 2 s
        let di = LinearSystem::double_integrator();
        let x0 = PlantState::from_slice(&[-1.0, 0.0]).unwrap();
        let target = PlantState::from_slice(&[0.0, 0.0]).unwrap();
        let sol = synthesize_time_optimal(&di, &x0, &target, &SynthesisOptions::default()).unwrap();
        assert!((sol.tau - 2.0).abs() < 1e-3, "tau {}", sol.tau);
        assert!(sol.landing_error < 1e-4, "landing {}", sol.landing_error);
        assert_eq!(sol.control_at(0.2).unwrap()[0], 1.0);
        assert_eq!(sol.control_at(1.8).unwrap()[0], -1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn support_is_positively_homogeneous(theta in 0.0f64..(2.0 * PI), scale in 0.1f64..10.0, t in 0.0f64..2.0) {
            let di = LinearSystem::double_integrator();
            let x0 = PlantState::from_slice(&[0.3, -0.1]).unwrap();
            let set = ReachableSet::new(&di, &x0, t, 1e-2).unwrap();
            let g = direction(2, theta);
            let lhs = set.support(&(&g * scale));
            prop_assert!((lhs - scale * set.support(&g)).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }

        #[test]
        fn scalar_reachable_set_grows(t in 0.0f64..3.0, dt in 0.0f64..1.0) {
            let sys = scalar();
            for g in [1.0, -1.0] {
                let g = Vector::from_element(1, g);
                let a = support(&sys, &s(0.0), t, &g, 1e-3).unwrap();
                let b = support(&sys, &s(0.0), t + dt, &g, 1e-3).unwrap();
                prop_assert!(b >= a - 1e-12);
            }
        }

        #[test]
        fn extremal_trajectories_end_on_the_boundary(x0 in -0.9f64..0.9, eta in prop::sample::select(vec![1.0, -1.0]), tau in 0.05f64..2.0) {
            let sys = scalar();
            let eta = Vector::from_element(1, eta);
            let signal = |t: f64| extremal_control(&sys, &eta, tau, t.min(tau)).unwrap();
            let traj = integrate_plant(&sys, &s(x0), &signal, 0.0, tau, 1e-3).unwrap();
            let h = support(&sys, &s(x0), tau, &eta, 1e-3).unwrap();
            prop_assert!((eta.dot(traj.final_state().as_vector()) - h).abs() <= 1e-6);
        }
    }
}
