//! Free-energy densities and their convex/concave splitting.
//!
//! Every density is written as `F = β̂ + π̂` with `β̂` convex (possibly
//! singular at ±1) and `π̂` smooth and concave. `β = β̂'` and `π = π̂'`.
//! The normalization `β̂(0) = β(0) = 0` holds for every kind.
//!
//! | kind             | β̂(r)                               | π̂(r)             |
//! |------------------|------------------------------------|------------------|
//! | `Logarithmic`    | (Θ/2)[(1+r)ln(1+r) + (1−r)ln(1−r)] | −(Θc/2) r²       |
//! | `Quartic`        | r⁴/4                               | −r²/2 + 1/4      |
//! | `DoubleObstacle` | indicator of [−1, 1]               | −(Θc/2) r²       |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest double strictly below one.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    /// Flory-Huggins potential at absolute temperature `theta` with critical
    /// temperature `theta_c`.
    Logarithmic { theta: f64, theta_c: f64 },
    /// `(r² − 1)² / 4`.
    Quartic,
    /// Indicator of `[−1, 1]` minus `(theta_c/2) r²`.
    DoubleObstacle { theta_c: f64 },
}

impl Potential {
    pub fn logarithmic(theta: f64, theta_c: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "theta must be > 0, got {theta}"
            )));
        }
        if !(theta_c > 0.0 && theta_c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "theta_c must be > 0, got {theta_c}"
            )));
        }
        Ok(Potential::Logarithmic { theta, theta_c })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Potential::Logarithmic { theta, theta_c } => {
                Potential::logarithmic(theta, theta_c).map(|_| ())
            }
            Potential::Quartic => Ok(()),
            Potential::DoubleObstacle { theta_c } => {
                if theta_c > 0.0 && theta_c.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "theta_c must be > 0, got {theta_c}"
                    )))
                }
            }
        }
    }

    /// True for kinds confined to `[−1, 1]`.
    pub fn is_singular(&self) -> bool {
        !matches!(self, Potential::Quartic)
    }

    /// Lower bound `ϖ` on `β'`, when one exists.
    pub fn monotonicity_floor(&self) -> Option<f64> {
        match *self {
            Potential::Logarithmic { theta, .. } => Some(theta),
            _ => None,
        }
    }

    /// Lipschitz constant of `π`.
    pub fn pi_lipschitz(&self) -> f64 {
        match *self {
            Potential::Logarithmic { theta_c, .. } | Potential::DoubleObstacle { theta_c } => {
                theta_c
            }
            Potential::Quartic => 1.0,
        }
    }

    fn check_open(&self, what: &'static str, r: f64) -> Result<()> {
        if self.is_singular() && !(r.abs() < 1.0) {
            return Err(Error::Domain { what, value: r });
        }
        Ok(())
    }

    /// Convex part `β̂(r)`.
    pub fn beta_hat(&self, r: f64) -> Result<f64> {
        self.check_open("beta_hat", r)?;
        Ok(match *self {
            Potential::Logarithmic { theta, .. } => 0.5 * theta * f0_primitive(r),
            Potential::Quartic => 0.25 * r.powi(4),
            Potential::DoubleObstacle { .. } => 0.0,
        })
    }

    /// Monotone part `β(r)`. Set-valued for the double obstacle, so that
    /// kind is rejected.
    pub fn beta(&self, r: f64) -> Result<f64> {
        match *self {
            Potential::Logarithmic { theta, .. } => {
                self.check_open("beta", r)?;
                Ok(0.5 * theta * f0(r))
            }
            Potential::Quartic => Ok(r * r * r),
            Potential::DoubleObstacle { .. } => Err(Error::KindMismatch(
                "the double-obstacle subgradient is set-valued; use subgradient_indicator".into(),
            )),
        }
    }

    pub fn beta_prime(&self, r: f64) -> Result<f64> {
        match *self {
            Potential::Logarithmic { theta, .. } => {
                self.check_open("beta_prime", r)?;
                Ok(theta / ((1.0 - r) * (1.0 + r)))
            }
            Potential::Quartic => Ok(3.0 * r * r),
            Potential::DoubleObstacle { .. } => Err(Error::KindMismatch(
                "the double-obstacle subgradient is set-valued".into(),
            )),
        }
    }

    /// Concave part `π̂(r)`, defined on all of ℝ.
    pub fn pi_hat(&self, r: f64) -> f64 {
        match *self {
            Potential::Logarithmic { theta_c, .. } | Potential::DoubleObstacle { theta_c } => {
                -0.5 * theta_c * r * r
            }
            Potential::Quartic => -0.5 * r * r + 0.25,
        }
    }

    pub fn pi(&self, r: f64) -> f64 {
        match *self {
            Potential::Logarithmic { theta_c, .. } | Potential::DoubleObstacle { theta_c } => {
                -theta_c * r
            }
            Potential::Quartic => -r,
        }
    }

    /// `F(r) = β̂(r) + π̂(r)`.
    pub fn density(&self, r: f64) -> Result<f64> {
        Ok(self.beta_hat(r)? + self.pi_hat(r))
    }

    /// `F'(r) = β(r) + π(r)`.
    pub fn derivative(&self, r: f64) -> Result<f64> {
        Ok(self.beta(r)? + self.pi(r))
    }
}

/// `F0(r) = (1+r)ln(1+r) + (1−r)ln(1−r)`, continuous on `[−1, 1]`.
pub fn f0_primitive(r: f64) -> f64 {
    let a = if r == -1.0 {
        0.0
    } else {
        (1.0 + r) * r.ln_1p()
    };
    let b = if r == 1.0 {
        0.0
    } else {
        (1.0 - r) * (-r).ln_1p()
    };
    a + b
}

/// `f0(r) = F0'(r) = ln((1+r)/(1−r))`, written to be exactly odd.
pub fn f0(r: f64) -> f64 {
    let a = r.abs();
    let v = (2.0 * a / (1.0 - a)).ln_1p();
    if r < 0.0 {
        -v
    } else {
        v
    }
}

/// Moreau-Yosida regularization of the monotone part of a potential.
///
/// With `λ = ε·ϱ`, the resolvent `J(r)` solves `J + λβ(J) = r` and
/// `β_ε(r) = (r − J(r))/λ`. The surface regularization uses `ϱ ≥ 1`; the bulk
/// one uses `ϱ = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YosidaApprox {
    pub base: Potential,
    pub epsilon: f64,
    pub rho: f64,
}

const RESOLVENT_BUDGET: usize = 200;

impl YosidaApprox {
    pub fn new(base: Potential, epsilon: f64) -> Result<Self> {
        Self::with_rho(base, epsilon, 1.0)
    }

    pub fn with_rho(base: Potential, epsilon: f64, rho: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "yosida epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        if !(rho >= 1.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "yosida rho must be >= 1, got {rho}"
            )));
        }
        base.validate()?;
        Ok(Self { base, epsilon, rho })
    }

    fn lambda(&self) -> f64 {
        self.epsilon * self.rho
    }

    /// Resolvent `J_ε(r) = (I + λβ)⁻¹(r)`.
    pub fn resolvent(&self, r: f64) -> Result<f64> {
        if !r.is_finite() {
            return Err(Error::Convergence { iterations: 0, r });
        }
        let lambda = self.lambda();
        match self.base {
            Potential::DoubleObstacle { .. } => Ok(r.clamp(-1.0, 1.0)),
            base => solve_resolvent(base, lambda, r),
        }
    }

    /// Returns `(β_ε(r), J_ε(r))`.
    pub fn eval(&self, r: f64) -> Result<(f64, f64)> {
        let j = self.resolvent(r)?;
        Ok(((r - j) / self.lambda(), j))
    }

    pub fn beta(&self, r: f64) -> Result<f64> {
        self.eval(r).map(|(b, _)| b)
    }

    /// `β_ε'(r) = β'(J)/(1 + λβ'(J))`.
    pub fn beta_prime(&self, r: f64) -> Result<f64> {
        let lambda = self.lambda();
        match self.base {
            Potential::DoubleObstacle { .. } => Ok(if r.abs() > 1.0 { 1.0 / lambda } else { 0.0 }),
            base => {
                let j = self.resolvent(r)?;
                if base.is_singular() && j.abs() >= BELOW_ONE {
                    return Ok(1.0 / lambda);
                }
                let bp = base.beta_prime(j)?;
                Ok(bp / (1.0 + lambda * bp))
            }
        }
    }

    /// Moreau envelope `β̂_ε(r) = |r − J|²/(2λ) + β̂(J)`.
    pub fn envelope(&self, r: f64) -> Result<f64> {
        let j = self.resolvent(r)?;
        let d = r - j;
        let inner = match self.base {
            Potential::DoubleObstacle { .. } => 0.0,
            base => base.beta_hat(j)?,
        };
        Ok(d * d / (2.0 * self.lambda()) + inner)
    }
}

/// Safeguarded Newton on `h(J) = J + λβ(J) − r`, bracketed by `[0, r]`.
fn solve_resolvent(base: Potential, lambda: f64, r: f64) -> Result<f64> {
    if r == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = if r > 0.0 { (0.0, r) } else { (r, 0.0) };
    if base.is_singular() {
        lo = lo.max(-BELOW_ONE);
        hi = hi.min(BELOW_ONE);
    }
    let h = |j: f64| -> Result<f64> { Ok(j + lambda * base.beta(j)? - r) };
    let dh = |j: f64| -> Result<f64> { Ok(1.0 + lambda * base.beta_prime(j)?) };

    let mut j = r.clamp(lo, hi);
    let mut polished = false;
    for _ in 0..RESOLVENT_BUDGET {
        let hj = h(j)?;
        if hj == 0.0 {
            return Ok(j);
        }
        if hj < 0.0 {
            lo = j;
        } else {
            hi = j;
        }
        let newton = j - hj / dh(j)?;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - j).abs();
        j = next;
        // Relative to the iterate: near ±1 the root is only resolved in ulps.
        let ulp = f64::EPSILON * j.abs().max(f64::MIN_POSITIVE);
        if step <= 2.0 * ulp || hi - lo <= 2.0 * ulp {
            // one extra Newton pass brings the iterate to full precision
            if polished || hi - lo <= 2.0 * ulp {
                return Ok(j);
            }
            polished = true;
        }
    }
    Err(Error::Convergence {
        iterations: RESOLVENT_BUDGET,
        r,
    })
}

pub fn eval_beta(p: &Potential, r: f64) -> Result<f64> {
    p.beta(r)
}

pub fn eval_pi(p: &Potential, r: f64) -> f64 {
    p.pi(r)
}

pub fn eval_yosida(y: &YosidaApprox, r: f64) -> Result<(f64, f64)> {
    y.eval(r)
}

pub fn eval_moreau_envelope(y: &YosidaApprox, r: f64) -> Result<f64> {
    y.envelope(r)
}

/// Default band within which `r` counts as touching ±1.
pub const CONTACT_THRESHOLD: f64 = 1e-8;

/// Membership of `candidate` in the subdifferential of the indicator of
/// `[−1, 1]` at `r`.
pub fn subgradient_indicator(r: f64, candidate: f64) -> Result<bool> {
    subgradient_indicator_with(r, candidate, CONTACT_THRESHOLD)
}

/// As [`subgradient_indicator`] with an explicit contact band `tol`.
pub fn subgradient_indicator_with(r: f64, candidate: f64, tol: f64) -> Result<bool> {
    if r.abs() > 1.0 + tol || r.is_nan() {
        return Err(Error::Domain {
            what: "subgradient_indicator",
            value: r,
        });
    }
    Ok(if r >= 1.0 - tol {
        candidate >= -tol
    } else if r <= -1.0 + tol {
        candidate <= tol
    } else {
        candidate.abs() <= tol
    })
}

/// Constants `(c_m, c'_m)` with `f0(r)(r − m) ≥ c_m|f0(r)| − c'_m` on the
/// sampled points. `c_m = (1 − |m|)/2`; `c'_m` is the smallest admissible
/// offset on the samples.
pub fn coercivity_constants(m: f64, samples: &[f64]) -> Result<(f64, f64)> {
    if !(m.abs() < 1.0) {
        return Err(Error::Domain {
            what: "coercivity mean",
            value: m,
        });
    }
    let c_m = 0.5 * (1.0 - m.abs());
    let mut offset = 0.0_f64;
    for &r in samples {
        if !(r.abs() < 1.0) {
            return Err(Error::Domain {
                what: "coercivity sample",
                value: r,
            });
        }
        let f = f0(r);
        offset = offset.max(c_m * f.abs() - f * (r - m));
    }
    Ok((c_m, offset))
}

/// Points of `(−1, 1)` clustered toward ±1: `1 − |r|` is geometric between
/// `min_gap` and 1. Sorted ascending, always contains 0.
pub fn clustered_samples(samples: usize, min_gap: f64) -> Vec<f64> {
    let half = (samples / 2).max(2);
    let mut pos = Vec::with_capacity(half);
    let lg = min_gap.ln();
    for k in 0..half {
        let s = k as f64 / (half - 1) as f64;
        let gap = (lg * s).exp();
        pos.push(1.0 - gap);
    }
    let mut out: Vec<f64> = pos.iter().rev().filter(|&&r| r > 0.0).map(|r| -r).collect();
    out.extend(pos.iter().copied());
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneCheck {
    /// β nondecreasing on the samples.
    pub monotone: bool,
    /// Smallest sampled `β'`.
    pub varpi: f64,
    /// `β → ±∞` at ±1 (checked as `|β| ≥ 10` at the outermost samples).
    pub blows_up: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationFit {
    pub rho: f64,
    pub c0: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzCheck {
    pub gamma: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentialBoundFit {
    pub c_sharp: f64,
    pub gamma_sharp: f64,
    /// R² of the least-squares fit of `ln β'` against `|β|^γ♯`.
    pub r_squared: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub kappa_right: f64,
    pub kappa_left: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialChecks {
    pub monotonicity: MonotoneCheck,
    pub lipschitz: LipschitzCheck,
    pub growth: ExponentialBoundFit,
    pub decay: DecayFit,
}

/// Fitted constants and pass/fail per structural assumption.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub bulk: PotentialChecks,
    pub surf: PotentialChecks,
    /// Surface potential dominates the bulk one: `|β| ≤ ϱ|β_Γ| + c₀`.
    pub domination: DominationFit,
    /// The reverse domination `|β_Γ| ≤ ϱ'|β| + c₀'`, reported only.
    pub domination_reverse: DominationFit,
}

impl AssumptionReport {
    /// Monotone, dominated and Lipschitz, plus either the growth or the decay
    /// bound, for both potentials.
    pub fn all_pass(&self) -> bool {
        let one = |c: &PotentialChecks| {
            c.monotonicity.pass && c.lipschitz.pass && (c.growth.pass || c.decay.pass)
        };
        one(&self.bulk) && one(&self.surf) && self.domination.pass
    }
}

const MIN_GAP: f64 = 1e-12;

pub fn validate_assumptions(
    p_bulk: &Potential,
    p_surf: &Potential,
    samples: usize,
) -> Result<AssumptionReport> {
    if samples < 100 {
        return Err(Error::InvalidParameter(format!(
            "validate_assumptions needs >= 100 samples, got {samples}"
        )));
    }
    let rs = clustered_samples(samples, MIN_GAP);
    let bulk = check_potential(p_bulk, &rs)?;
    let surf = check_potential(p_surf, &rs)?;
    let b: Vec<f64> = rs.iter().map(|&r| p_bulk.beta(r)).collect::<Result<_>>()?;
    let bg: Vec<f64> = rs.iter().map(|&r| p_surf.beta(r)).collect::<Result<_>>()?;
    Ok(AssumptionReport {
        bulk,
        surf,
        domination: fit_domination(&b, &bg),
        domination_reverse: fit_domination(&bg, &b),
    })
}

/// Smallest `ϱ` (ratio over samples with `|dominant| ≥ 1`) and then the
/// smallest `c₀ ≥ 0` making `|dominated| ≤ ϱ|dominant| + c₀` hold.
fn fit_domination(dominated: &[f64], dominant: &[f64]) -> DominationFit {
    let mut rho = 0.0_f64;
    for (&a, &b) in dominated.iter().zip(dominant) {
        if b.abs() >= 1.0 {
            rho = rho.max(a.abs() / b.abs());
        }
    }
    let mut c0 = 0.0_f64;
    for (&a, &b) in dominated.iter().zip(dominant) {
        c0 = c0.max(a.abs() - rho * b.abs());
    }
    DominationFit {
        rho,
        c0,
        pass: rho.is_finite() && rho > 0.0 && c0.is_finite(),
    }
}

fn check_potential(p: &Potential, rs: &[f64]) -> Result<PotentialChecks> {
    let beta: Vec<f64> = rs.iter().map(|&r| p.beta(r)).collect::<Result<_>>()?;
    let dbeta: Vec<f64> = rs.iter().map(|&r| p.beta_prime(r)).collect::<Result<_>>()?;

    let monotone = beta.windows(2).all(|w| w[1] >= w[0]);
    let varpi = dbeta.iter().copied().fold(f64::INFINITY, f64::min);
    let blows_up = p.is_singular() && beta[0] <= -10.0 && beta[beta.len() - 1] >= 10.0;
    let monotonicity = MonotoneCheck {
        monotone,
        varpi,
        blows_up,
        pass: monotone && varpi > 0.0 && blows_up,
    };

    // π is affine for every kind here, so the sampled difference quotient over
    // a range wider than the domain is its Lipschitz constant.
    let wide: Vec<f64> = (0..=400).map(|k| -2.0 + 4.0 * k as f64 / 400.0).collect();
    let mut gamma = 0.0_f64;
    for w in wide.windows(2) {
        gamma = gamma.max((p.pi(w[1]) - p.pi(w[0])).abs() / (w[1] - w[0]));
    }
    let lipschitz = LipschitzCheck {
        gamma,
        pass: gamma.is_finite() && (gamma - p.pi_lipschitz()).abs() <= 1e-9 * gamma.max(1.0),
    };

    let growth = fit_exponential_bound(&beta, &dbeta);
    let decay = fit_log_decay(p)?;
    Ok(PotentialChecks {
        monotonicity,
        lipschitz,
        growth,
        decay,
    })
}

/// Least squares of `ln β'` against `|β|^γ` on the tail `|β| ≥ 1`, trying
/// `γ = 1.0, 1.1, …, 1.9` and keeping the first with R² ≥ 0.999. Then the
/// smallest `C♯` with `β' ≤ C♯ exp(C♯|β|^γ♯)` on every sample.
fn fit_exponential_bound(beta: &[f64], dbeta: &[f64]) -> ExponentialBoundFit {
    let tail: Vec<(f64, f64)> = beta
        .iter()
        .zip(dbeta)
        .filter(|(b, d)| b.abs() >= 1.0 && **d > 0.0)
        .map(|(b, d)| (b.abs(), d.ln()))
        .collect();
    let failed = ExponentialBoundFit {
        c_sharp: f64::INFINITY,
        gamma_sharp: f64::NAN,
        r_squared: 0.0,
        pass: false,
    };
    if tail.len() < 3 {
        return failed;
    }
    for step in 0..10 {
        let gamma = 1.0 + 0.1 * step as f64;
        let xs: Vec<f64> = tail.iter().map(|(b, _)| b.powf(gamma)).collect();
        let ys: Vec<f64> = tail.iter().map(|(_, l)| *l).collect();
        let (_, _, r2) = linear_fit(&xs, &ys);
        if r2 >= 0.999 {
            let c = smallest_exp_constant(beta, dbeta, gamma);
            return ExponentialBoundFit {
                c_sharp: c,
                gamma_sharp: gamma,
                r_squared: r2,
                pass: c.is_finite(),
            };
        }
    }
    failed
}

fn smallest_exp_constant(beta: &[f64], dbeta: &[f64], gamma: f64) -> f64 {
    let ok = |c: f64| {
        beta.iter()
            .zip(dbeta)
            .all(|(b, d)| *d <= c * (c * b.abs().powf(gamma)).exp())
    };
    let mut hi = 1.0;
    while !ok(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Slope of `ln|β(±(1 − 2δ))|` against `ln|ln δ|` for `δ = 10⁻², …, 10⁻¹⁰`.
fn fit_log_decay(p: &Potential) -> Result<DecayFit> {
    let deltas: Vec<f64> = (2..=10).map(|k| 10f64.powi(-k)).collect();
    let xs: Vec<f64> = deltas.iter().map(|d| d.ln().abs().ln()).collect();
    let mut kappa = [0.0; 2];
    for (slot, sign) in [1.0, -1.0].into_iter().enumerate() {
        let ys: Vec<f64> = deltas
            .iter()
            .map(|d| p.beta(sign * (1.0 - 2.0 * d)).map(|b| b.abs().ln()))
            .collect::<Result<_>>()?;
        kappa[slot] = linear_fit(&xs, &ys).1;
    }
    Ok(DecayFit {
        kappa_right: kappa[0],
        kappa_left: kappa[1],
        pass: kappa[0] > 0.5 && kappa[1] > 0.5,
    })
}

/// Ordinary least squares `y ≈ a + b x`; returns `(a, b, R²)`.
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let r2 = if syy > 0.0 {
        (sxy * sxy) / (sxx * syy)
    } else {
        1.0
    };
    (a, b, r2)
}
