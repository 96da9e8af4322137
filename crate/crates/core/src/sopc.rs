//! Sequential orthogonal projection combining (SOPC) for the per-transmitter
//! RZF beam design problem, restricted to real combining coefficients.
//!
//! The solver allocates transmit power greedily: it walks along the
//! normalized projection of the own channel onto the complement of the
//! interference channels appended so far, until either the power budget or
//! one of the leakage constraints is hit with equality. A hit constraint is
//! appended to the span and the walk continues in the shrunken subspace.
//! Termination is either `PowerExhausted` (full power committed) or
//! `DirectionsExhausted` (the span filled the whole space first, which can
//! only happen when `K > N`).
//!
//! Two- and three-user closed forms of the same construction are provided in
//! [`closed_form_two_user`] and [`closed_form_three_user`]; the exact
//! complex-coefficient optimum lives in the [`oracle`](crate::oracle) module.

use std::fmt;

use crate::channel::MisoChannelSet;
use crate::miso::{BeamVector, LeakageBudget};
use crate::projection::{ProjectionError, SpanAccumulator};
use crate::{CVector, Cpx};

/// `|h^H u|^2` below this makes a constraint unreachable along `u` and its
/// step size is treated as infinite.
pub const UNREACHABLE_TOL: f64 = 1e-14;

/// How the greedy allocation stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Full power committed; `power_used == P_i`.
    PowerExhausted,
    /// All `N` directions consumed before the power ran out (`K > N` only).
    DirectionsExhausted,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::PowerExhausted => write!(f, "power_exhausted"),
            Termination::DirectionsExhausted => write!(f, "directions_exhausted"),
        }
    }
}

/// Result of an SOPC design for one transmitter.
#[derive(Debug, Clone)]
pub struct SopcSolution {
    pub beam: BeamVector,
    /// Receivers whose leakage constraints were hit, in hit order.
    pub gamma_tilde: Vec<usize>,
    /// Committed step size per direction. One entry per hit constraint plus,
    /// on `PowerExhausted`, the final step that used up the power. Entries
    /// are zero exactly for constraints with `alpha == 0`.
    pub coeffs: Vec<f64>,
    pub power_used: f64,
    pub terminated_by: Termination,
}

/// Intermediate scalars of the three-user closed form.
#[derive(Debug, Clone)]
pub struct ThreeUserCoefficients {
    pub beta0: f64,
    pub beta1: f64,
    pub beta1_prime: Option<f64>,
    pub beta2: Option<f64>,
    /// `<v_mf, w>` where `w` is the normalized complement of the own channel
    /// against the first-hit interference channel.
    pub a: f64,
    /// `|h_s^H v_mf|^2` for the second receiver `s`.
    pub b: f64,
    /// `|h_s^H w|^2`.
    pub c: f64,
    /// `Re{ (h_s^H v_mf)* (h_s^H w) }`.
    pub d: f64,
    /// `<w, v_zf>`.
    pub e: f64,
    /// `<v_mf, v_zf>`.
    pub f: f64,
    pub branch: PsiBranch,
}

/// Which power regime the three-user closed form landed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiBranch {
    /// Budget too small to hit any constraint: pure matched filter.
    Psi1,
    /// First constraint hit, power exhausted before the second.
    Psi2,
    /// Both constraints hit, remainder on the ZF direction.
    Psi3,
}

/// Errors from the SOPC solver and its closed forms.
#[derive(Debug, Clone, PartialEq)]
pub enum SopcError {
    /// Own channel vanished or a projection became ill posed.
    Degenerate { tx: usize, detail: String },
    /// The closed form was called with the wrong pair count.
    WrongUserCount { expected: usize, got: usize },
    /// Three-user ordering condition fails for the given role assignment;
    /// the caller should swap the two interfered receivers.
    OrderingMismatch,
    /// Budget entries must be nonnegative.
    NegativeAlpha { j: usize, i: usize, value: f64 },
}

impl fmt::Display for SopcError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SopcError::Degenerate { tx, detail } => {
                write!(f, "degenerate SOPC state at transmitter {tx}: {detail}")
            }
            SopcError::WrongUserCount { expected, got } => {
                write!(f, "closed form needs K = {expected}, got K = {got}")
            }
            SopcError::OrderingMismatch => {
                write!(f, "ordering condition violated; swap the interfered receivers")
            }
            SopcError::NegativeAlpha { j, i, value } => {
                write!(f, "alpha({j}, {i}) = {value} is negative")
            }
        }
    }
}

impl std::error::Error for SopcError {}

impl From<ProjectionError> for SopcError {
    fn from(e: ProjectionError) -> Self {
        SopcError::Degenerate { tx: usize::MAX, detail: e.to_string() }
    }
}

fn validate_budget(ch: &MisoChannelSet, i: usize, budget: &LeakageBudget) -> Result<(), SopcError> {
    for j in 0..ch.k() {
        if j != i {
            let a = budget.alpha(j, i);
            if a < 0.0 || !a.is_finite() {
                return Err(SopcError::NegativeAlpha { j, i, value: a });
            }
        }
    }
    Ok(())
}

/// Greedy SOPC design for transmitter `i` under `budget`.
pub fn sopc_design(
    ch: &MisoChannelSet,
    i: usize,
    budget: &LeakageBudget,
) -> Result<SopcSolution, SopcError> {
    sopc_design_counted(ch, i, budget).map(|(sol, _)| sol)
}

/// Like [`sopc_design`], additionally reporting the number of length-`N`
/// complex inner products the solver performed.
pub fn sopc_design_counted(
    ch: &MisoChannelSet,
    i: usize,
    budget: &LeakageBudget,
) -> Result<(SopcSolution, u64), SopcError> {
    validate_budget(ch, i, budget)?;
    let (k, n) = (ch.k(), ch.n());
    let h_ii = ch.h(i, i);
    if h_ii.norm() < 1e-300 {
        return Err(SopcError::Degenerate { tx: i, detail: "own channel is zero".into() });
    }
    let p_i = ch.power(i);
    let mut ops: u64 = 0;

    let mut acc = SpanAccumulator::new(n);
    let mut v = CVector::zeros(n);
    let mut norm2_v = 0.0f64;
    // remaining constraint set, ascending receiver index
    let mut phi: Vec<usize> = (0..k).filter(|&j| j != i).collect();
    // cached h_ji^H v per receiver, updated incrementally on each commit
    let mut hv = vec![Cpx::new(0.0, 0.0); k];
    let mut gamma = Vec::new();
    let mut coeffs = Vec::new();
    let mut terminated: Option<Termination> = None;

    let kmax = n.min(k);
    let mut scratch: Vec<(usize, Cpx, f64)> = Vec::with_capacity(k); // (j, h^H u, mu_j)

    for _step in 0..kmax {
        let residual = acc.project_complement(h_ii);
        ops += acc.rank() as u64 + 1;
        let res_norm = residual.norm();
        if res_norm < 1e-12 * h_ii.norm() {
            return Err(SopcError::Degenerate {
                tx: i,
                detail: "own channel lies in the accumulated interference span".into(),
            });
        }
        let u = residual / Cpx::new(res_norm, 0.0);

        // step to the power boundary along u
        let rho_p = u.dotc(&v).re;
        ops += 1;
        let mu_p = -rho_p + (rho_p * rho_p + (p_i - norm2_v)).max(0.0).sqrt();

        // step to each remaining leakage boundary along u
        scratch.clear();
        let mut best: Option<(f64, usize)> = None;
        for &j in &phi {
            let huj = ch.h(j, i).dotc(&u);
            ops += 1;
            let gain = huj.norm_sqr();
            let bound = budget.alpha(j, i) * ch.sigma2(j);
            let mu_j = if gain < UNREACHABLE_TOL {
                f64::INFINITY
            } else {
                let rho_j = (hv[j].conj() * huj).re;
                let slack = hv[j].norm_sqr() - bound; // <= 0 while feasible
                let disc = (rho_j * rho_j - gain * slack).max(0.0);
                (-rho_j + disc.sqrt()) / gain
            };
            scratch.push((j, huj, mu_j));
            // strict `<` keeps the lowest receiver index on ties
            if best.map_or(true, |(mu, _)| mu_j < mu) {
                best = Some((mu_j, j));
            }
        }

        match best {
            Some((mu_star, j_star)) if mu_p > mu_star => {
                // commit up to the tight constraint, absorb it into the span
                v.axpy(Cpx::new(mu_star, 0.0), &u, Cpx::new(1.0, 0.0));
                norm2_v += 2.0 * mu_star * rho_p + mu_star * mu_star;
                for &(j, huj, _) in &scratch {
                    hv[j] += huj * mu_star;
                }
                coeffs.push(mu_star);
                gamma.push(j_star);
                acc.append(ch.h(j_star, i)).map_err(|e| SopcError::Degenerate {
                    tx: i,
                    detail: e.to_string(),
                })?;
                ops += acc.rank() as u64; // orthogonalization cost
                phi.retain(|&j| j != j_star);
            }
            _ => {
                // power boundary first (or no constraints left): finish
                v.axpy(Cpx::new(mu_p, 0.0), &u, Cpx::new(1.0, 0.0));
                norm2_v += 2.0 * mu_p * rho_p + mu_p * mu_p;
                coeffs.push(mu_p);
                terminated = Some(Termination::PowerExhausted);
                break;
            }
        }
    }

    let terminated_by = terminated.unwrap_or(Termination::DirectionsExhausted);
    let power_used = v.norm_squared();
    Ok((
        SopcSolution {
            beam: BeamVector::new(v, i),
            gamma_tilde: gamma,
            coeffs,
            power_used,
            terminated_by,
        },
        ops,
    ))
}

/// Exact two-user RZF solution: the matched filter when the budget permits
/// it at full power, otherwise `xi0 v_mf + xi1 v_zf` with the leakage
/// constraint tight and the power budget exhausted.
pub fn closed_form_two_user(
    ch: &MisoChannelSet,
    i: usize,
    budget: &LeakageBudget,
) -> Result<SopcSolution, SopcError> {
    if ch.k() != 2 {
        return Err(SopcError::WrongUserCount { expected: 2, got: ch.k() });
    }
    validate_budget(ch, i, budget)?;
    let o = 1 - i;
    let p_i = ch.power(i);
    let h_ii = ch.h(i, i);
    let norm_h = h_ii.norm();
    if norm_h < 1e-300 {
        return Err(SopcError::Degenerate { tx: i, detail: "own channel is zero".into() });
    }
    let v_mf = h_ii / Cpx::new(norm_h, 0.0);
    let leak_mf = ch.h(o, i).dotc(&v_mf).norm_sqr();
    let bound = budget.alpha(o, i) * ch.sigma2(o);

    // matched-filter branch: full power stays within the leakage budget
    if leak_mf < UNREACHABLE_TOL || p_i * leak_mf <= bound {
        let root_p = p_i.sqrt();
        return Ok(SopcSolution {
            beam: BeamVector::new(&v_mf * Cpx::new(root_p, 0.0), i),
            gamma_tilde: vec![],
            coeffs: vec![root_p],
            power_used: p_i,
            terminated_by: Termination::PowerExhausted,
        });
    }

    let mut acc = SpanAccumulator::new(ch.n());
    acc.append(ch.h(o, i))?;
    let res = acc.project_complement(h_ii);
    let res_norm = res.norm();
    if res_norm < 1e-12 * norm_h {
        return Err(SopcError::Degenerate {
            tx: i,
            detail: "cross channel is parallel to the own channel".into(),
        });
    }
    let v_zf = res / Cpx::new(res_norm, 0.0);
    let rho = res_norm / norm_h; // <v_mf, v_zf>, real positive
    let xi0 = (bound / leak_mf).sqrt();
    let xi1 = -rho * xi0 + (p_i - xi0 * xi0 * (1.0 - rho * rho)).max(0.0).sqrt();

    let v = &v_mf * Cpx::new(xi0, 0.0) + &v_zf * Cpx::new(xi1, 0.0);
    let power_used = v.norm_squared();
    Ok(SopcSolution {
        beam: BeamVector::new(v, i),
        gamma_tilde: vec![o],
        coeffs: vec![xi0, xi1],
        power_used,
        terminated_by: Termination::PowerExhausted,
    })
}

/// Three-user closed form with the canonical role assignment: of the two
/// interfered receivers (in ascending index order) the **second** one must
/// tighten first. Fails with [`SopcError::OrderingMismatch`] otherwise;
/// callers then swap roles via [`closed_form_three_user_ordered`].
pub fn closed_form_three_user(
    ch: &MisoChannelSet,
    i: usize,
    budget: &LeakageBudget,
) -> Result<SopcSolution, SopcError> {
    if ch.k() != 3 {
        return Err(SopcError::WrongUserCount { expected: 3, got: ch.k() });
    }
    let others: Vec<usize> = (0..3).filter(|&j| j != i).collect();
    closed_form_three_user_ordered(ch, i, others[1], others[0], budget).map(|(sol, _)| sol)
}

/// Three-user closed form with explicit roles: `first` is the receiver whose
/// leakage constraint tightens first, `second` the other one. Returns the
/// solution together with the intermediate coefficients.
pub fn closed_form_three_user_ordered(
    ch: &MisoChannelSet,
    i: usize,
    first: usize,
    second: usize,
    budget: &LeakageBudget,
) -> Result<(SopcSolution, ThreeUserCoefficients), SopcError> {
    if ch.k() != 3 {
        return Err(SopcError::WrongUserCount { expected: 3, got: ch.k() });
    }
    assert!(first != i && second != i && first != second, "invalid role assignment");
    validate_budget(ch, i, budget)?;

    let p_i = ch.power(i);
    let h_ii = ch.h(i, i);
    let norm_h = h_ii.norm();
    if norm_h < 1e-300 {
        return Err(SopcError::Degenerate { tx: i, detail: "own channel is zero".into() });
    }
    let v_mf = h_ii / Cpx::new(norm_h, 0.0);

    let leak_f = ch.h(first, i).dotc(&v_mf).norm_sqr();
    let leak_s = ch.h(second, i).dotc(&v_mf).norm_sqr();
    let bound_f = budget.alpha(first, i) * ch.sigma2(first);
    let bound_s = budget.alpha(second, i) * ch.sigma2(second);

    // ordering condition: `first` reaches its allowed level no later than
    // `second` when walking along the matched-filter direction
    if bound_f * leak_s > bound_s * leak_f {
        return Err(SopcError::OrderingMismatch);
    }

    let beta0 = if leak_f < UNREACHABLE_TOL { f64::INFINITY } else { (bound_f / leak_f).sqrt() };

    // complement of the own channel against the first-hit interference channel
    let mut acc = SpanAccumulator::new(ch.n());
    acc.append(ch.h(first, i))?;
    let res1 = acc.project_complement(h_ii);
    let res1_norm = res1.norm();
    if res1_norm < 1e-12 * norm_h {
        return Err(SopcError::Degenerate {
            tx: i,
            detail: "own channel is parallel to the first-hit interference channel".into(),
        });
    }
    let w = res1 / Cpx::new(res1_norm, 0.0);
    let a = res1_norm / norm_h;

    let hs_mf = ch.h(second, i).dotc(&v_mf);
    let hs_w = ch.h(second, i).dotc(&w);
    let b = hs_mf.norm_sqr();
    let c = hs_w.norm_sqr();
    let d = (hs_mf.conj() * hs_w).re;

    // full zero-forcing direction and its overlaps
    acc.append(ch.h(second, i))?;
    let res2 = acc.project_complement(h_ii);
    let res2_norm = res2.norm();
    if res2_norm < 1e-12 * norm_h {
        return Err(SopcError::Degenerate {
            tx: i,
            detail: "own channel lies in the interference span".into(),
        });
    }
    let v_zf = res2 / Cpx::new(res2_norm, 0.0);
    let f = res2_norm / norm_h;
    let e = res2_norm / res1_norm;

    let root_p = p_i.sqrt();
    if root_p <= beta0 {
        let coeffs = ThreeUserCoefficients {
            beta0,
            beta1: 0.0,
            beta1_prime: None,
            beta2: None,
            a,
            b,
            c,
            d,
            e,
            f,
            branch: PsiBranch::Psi1,
        };
        let sol = SopcSolution {
            beam: BeamVector::new(&v_mf * Cpx::new(root_p, 0.0), i),
            gamma_tilde: vec![],
            coeffs: vec![root_p],
            power_used: p_i,
            terminated_by: Termination::PowerExhausted,
        };
        return Ok((sol, coeffs));
    }

    let beta1 = -a * beta0 + (p_i - (1.0 - a * a) * beta0 * beta0).max(0.0).sqrt();
    let leak_second_at_full = (hs_mf * beta0 + hs_w * beta1).norm_sqr();

    if leak_second_at_full <= bound_s {
        let v = &v_mf * Cpx::new(beta0, 0.0) + &w * Cpx::new(beta1, 0.0);
        let power_used = v.norm_squared();
        let coeffs = ThreeUserCoefficients {
            beta0,
            beta1,
            beta1_prime: None,
            beta2: None,
            a,
            b,
            c,
            d,
            e,
            f,
            branch: PsiBranch::Psi2,
        };
        let sol = SopcSolution {
            beam: BeamVector::new(v, i),
            gamma_tilde: vec![first],
            coeffs: vec![beta0, beta1],
            power_used,
            terminated_by: Termination::PowerExhausted,
        };
        return Ok((sol, coeffs));
    }

    if c < UNREACHABLE_TOL {
        return Err(SopcError::Degenerate {
            tx: i,
            detail: "second constraint unreachable along the projected direction".into(),
        });
    }
    let disc = (d * d * beta0 * beta0 - c * (b * beta0 * beta0 - bound_s)).max(0.0);
    let beta1_prime = (-d * beta0 + disc.sqrt()) / c;
    let cross = f * beta0 + e * beta1_prime;
    let excess =
        (cross * cross - (2.0 * a * beta0 * beta1_prime + beta0 * beta0 + beta1_prime * beta1_prime - p_i))
            .max(0.0);
    let beta2 = -cross + excess.sqrt();

    let v = &v_mf * Cpx::new(beta0, 0.0)
        + &w * Cpx::new(beta1_prime, 0.0)
        + &v_zf * Cpx::new(beta2, 0.0);
    let power_used = v.norm_squared();
    let coeffs = ThreeUserCoefficients {
        beta0,
        beta1,
        beta1_prime: Some(beta1_prime),
        beta2: Some(beta2),
        a,
        b,
        c,
        d,
        e,
        f,
        branch: PsiBranch::Psi3,
    };
    let sol = SopcSolution {
        beam: BeamVector::new(v, i),
        gamma_tilde: vec![first, second],
        coeffs: vec![beta0, beta1_prime, beta2],
        power_used,
        terminated_by: Termination::PowerExhausted,
    };
    Ok((sol, coeffs))
}
