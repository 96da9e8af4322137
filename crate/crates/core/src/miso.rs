//! MISO baselines, rate functionals, and RZF feasibility machinery.
//!
//! Everything here is a pure function over immutable inputs. Rates use
//! base-2 logarithms; leakage and power comparisons use absolute tolerances
//! on powers (default [`FEASIBILITY_TOL`]).

use std::fmt;

use crate::channel::MisoChannelSet;
use crate::projection::SpanAccumulator;
use crate::{CVector, Cpx};

/// Default absolute tolerance on leakage/transmit powers.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Errors from baseline beam construction.
#[derive(Debug, Clone, PartialEq)]
pub enum BeamError {
    /// Own channel (or its projection) is numerically zero.
    DegenerateChannel { tx: usize },
    /// ZF requires at least as many transmit antennas as pairs.
    ZfInfeasible { k: usize, n: usize },
}

impl fmt::Display for BeamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BeamError::DegenerateChannel { tx } => {
                write!(f, "degenerate channel at transmitter {tx}")
            }
            BeamError::ZfInfeasible { k, n } => {
                write!(f, "zero forcing infeasible: N = {n} < K = {k}")
            }
        }
    }
}

impl std::error::Error for BeamError {}

/// A transmit beamforming vector together with its owner.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamVector {
    pub v: CVector,
    pub owner: usize,
}

impl BeamVector {
    pub fn new(v: CVector, owner: usize) -> Self {
        Self { v, owner }
    }

    pub fn power(&self) -> f64 {
        self.v.norm_squared()
    }
}

/// The matrix of interference relaxation levels.
///
/// `alpha(j, i)` is the allowed leakage power from transmitter `i` to
/// receiver `j`, relative to the noise power at receiver `j`; the diagonal
/// is unused. `epsilon(i)` is always recomputed from the entries.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakageBudget {
    k: usize,
    alpha: Vec<f64>, // receiver-major: alpha[j * k + i]
}

impl LeakageBudget {
    /// All-zero budget: the conventional ZF constraints.
    pub fn zeros(k: usize) -> Self {
        Self { k, alpha: vec![0.0; k * k] }
    }

    /// Same relaxation level for every cross pair.
    pub fn uniform(k: usize, alpha: f64) -> Self {
        assert!(alpha >= 0.0, "alpha must be nonnegative");
        let mut b = Self::zeros(k);
        for j in 0..k {
            for i in 0..k {
                if i != j {
                    b.alpha[j * k + i] = alpha;
                }
            }
        }
        b
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Allowed relative leakage from transmitter `i` to receiver `j`.
    pub fn alpha(&self, j: usize, i: usize) -> f64 {
        self.alpha[j * self.k + i]
    }

    pub fn set_alpha(&mut self, j: usize, i: usize, value: f64) {
        assert!(j != i, "diagonal entries are unused");
        assert!(value >= 0.0, "alpha must be nonnegative");
        self.alpha[j * self.k + i] = value;
    }

    /// Total relative interference budget at receiver `i`:
    /// `epsilon_i = sum_{j != i} alpha(i, j)`.
    pub fn epsilon(&self, i: usize) -> f64 {
        (0..self.k).filter(|&j| j != i).map(|j| self.alpha(i, j)).sum()
    }

    /// Entries in receiver-major `(j, i)` order, diagonal skipped.
    pub fn cross_entries(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.k * (self.k - 1));
        for j in 0..self.k {
            for i in 0..self.k {
                if i != j {
                    out.push(self.alpha(j, i));
                }
            }
        }
        out
    }

    /// Inverse of [`cross_entries`](Self::cross_entries).
    pub fn from_cross_entries(k: usize, entries: &[f64]) -> Option<Self> {
        if entries.len() != k * (k - 1) {
            return None;
        }
        let mut b = Self::zeros(k);
        let mut it = entries.iter();
        for j in 0..k {
            for i in 0..k {
                if i != j {
                    let v = *it.next().unwrap();
                    if v < 0.0 {
                        return None;
                    }
                    b.alpha[j * k + i] = v;
                }
            }
        }
        Some(b)
    }
}

/// A rate tuple in bits per channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub r: Vec<f64>,
}

impl RatePoint {
    pub fn sum(&self) -> f64 {
        self.r.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.r.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Matched-filter direction `h_ii / ||h_ii||` (unit norm; callers scale by
/// `sqrt(P_i)`).
pub fn mf_beam(ch: &MisoChannelSet, i: usize) -> Result<BeamVector, BeamError> {
    let h = ch.h(i, i);
    let norm = h.norm();
    if norm < 1e-300 {
        return Err(BeamError::DegenerateChannel { tx: i });
    }
    Ok(BeamVector::new(h / Cpx::new(norm, 0.0), i))
}

/// Full-power zero-forcing beam: `sqrt(P_i)` times the normalized projection
/// of `h_ii` onto the complement of all cross channels out of transmitter `i`.
pub fn zf_beam(ch: &MisoChannelSet, i: usize) -> Result<BeamVector, BeamError> {
    let (k, n) = (ch.k(), ch.n());
    if n < k {
        return Err(BeamError::ZfInfeasible { k, n });
    }
    let mut acc = SpanAccumulator::new(n);
    for j in 0..k {
        if j != i && acc.append(ch.h(j, i)).is_err() {
            return Err(BeamError::DegenerateChannel { tx: i });
        }
    }
    let res = acc.project_complement(ch.h(i, i));
    let norm = res.norm();
    if norm < 1e-12 {
        return Err(BeamError::DegenerateChannel { tx: i });
    }
    let scale = ch.power(i).sqrt() / norm;
    Ok(BeamVector::new(res * Cpx::new(scale, 0.0), i))
}

/// Interference power `|h^H v|^2`.
pub fn leakage_power(beam: &BeamVector, h: &CVector) -> f64 {
    h.dotc(&beam.v).norm_sqr()
}

/// True achievable rates under single-user decoding, one beam per
/// transmitter (`beams[i].owner == i`).
pub fn achievable_rates(ch: &MisoChannelSet, beams: &[BeamVector]) -> RatePoint {
    let k = ch.k();
    assert_eq!(beams.len(), k, "need one beam per transmitter");
    let r = (0..k)
        .map(|i| {
            let signal = ch.h(i, i).dotc(&beams[i].v).norm_sqr();
            let interference: f64 = (0..k)
                .filter(|&j| j != i)
                .map(|j| ch.h(i, j).dotc(&beams[j].v).norm_sqr())
                .sum();
            (1.0 + signal / (ch.sigma2(i) + interference)).log2()
        })
        .collect();
    RatePoint { r }
}

/// Interference-budget rate lower bound for user `i`, depending only on its
/// own beam: `log2(1 + |h_ii^H v_i|^2 / ((1 + eps_i) sigma_i^2))`.
pub fn rate_lower_bound(
    ch: &MisoChannelSet,
    i: usize,
    beam: &BeamVector,
    budget: &LeakageBudget,
) -> f64 {
    let signal = ch.h(i, i).dotc(&beam.v).norm_sqr();
    let eps = budget.epsilon(i);
    (1.0 + signal / ((1.0 + eps) * ch.sigma2(i))).log2()
}

/// Whether `beam` satisfies transmitter `i`'s RZF leakage constraints and the
/// transmit power constraint, within an absolute tolerance on powers.
pub fn check_rzf_feasible(
    ch: &MisoChannelSet,
    i: usize,
    beam: &BeamVector,
    budget: &LeakageBudget,
    tol: f64,
) -> bool {
    if beam.power() > ch.power(i) + tol {
        return false;
    }
    (0..ch.k()).filter(|&j| j != i).all(|j| {
        leakage_power(beam, ch.h(j, i)) <= budget.alpha(j, i) * ch.sigma2(j) + tol
    })
}

/// Worst constraint violation (0 when feasible).
pub fn rzf_violation(
    ch: &MisoChannelSet,
    i: usize,
    beam: &BeamVector,
    budget: &LeakageBudget,
) -> f64 {
    let mut worst: f64 = beam.power() - ch.power(i);
    for j in 0..ch.k() {
        if j != i {
            worst = worst.max(leakage_power(beam, ch.h(j, i)) - budget.alpha(j, i) * ch.sigma2(j));
        }
    }
    worst.max(0.0)
}

/// Full-power beam maximizing the signal-to-leakage-plus-noise ratio:
/// `v ∝ (sigma_i^2/P_i I + sum_{j != i} h_ji h_ji^H)^{-1} h_ii`.
pub fn virtual_sinr_beam(ch: &MisoChannelSet, i: usize) -> Result<BeamVector, BeamError> {
    let (k, n) = (ch.k(), ch.n());
    let mut q = crate::CMatrix::identity(n, n) * Cpx::new(ch.sigma2(i) / ch.power(i), 0.0);
    for j in 0..k {
        if j != i {
            let h = ch.h(j, i);
            q += h * h.adjoint();
        }
    }
    let chol = q.cholesky().ok_or(BeamError::DegenerateChannel { tx: i })?;
    let dir = chol.solve(ch.h(i, i));
    let norm = dir.norm();
    if norm < 1e-300 {
        return Err(BeamError::DegenerateChannel { tx: i });
    }
    let scale = ch.power(i).sqrt() / norm;
    Ok(BeamVector::new(dir * Cpx::new(scale, 0.0), i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::RngSpec;

    fn cv(entries: &[(f64, f64)]) -> CVector {
        CVector::from_vec(entries.iter().map(|&(re, im)| Cpx::new(re, im)).collect())
    }

    fn manual_ch(k: usize, n: usize, h: Vec<CVector>, sigma2: Vec<f64>, p: Vec<f64>) -> MisoChannelSet {
        MisoChannelSet::new(k, n, h, sigma2, p).unwrap()
    }

    #[test]
    fn mf_beam_normalizes() {
        let ch = manual_ch(1, 2, vec![cv(&[(3.0, 0.0), (0.0, 0.0)])], vec![1.0], vec![1.0]);
        let b = mf_beam(&ch, 0).unwrap();
        assert!((b.v[0] - Cpx::new(1.0, 0.0)).norm() < 1e-15);
        assert!(b.v[1].norm() < 1e-15);
        assert!((b.power() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mf_beam_is_phase_equivariant() {
        let ch = MisoChannelSet::sample(1, 4, &[1.0], &[1.0], &RngSpec::new(8)).unwrap();
        let b = mf_beam(&ch, 0).unwrap();
        let theta = Cpx::from_polar(1.0, 0.9);
        let rotated = manual_ch(1, 4, vec![ch.h(0, 0) * theta], vec![1.0], vec![1.0]);
        let br = mf_beam(&rotated, 0).unwrap();
        assert!((&br.v - &b.v * theta).norm() < 1e-14);
    }

    #[test]
    fn zf_beam_on_orthogonal_channels() {
        // h_11 = e1, h_21 = e2: already orthogonal, v = e1 at unit power.
        let ch = manual_ch(
            2,
            2,
            vec![
                cv(&[(1.0, 0.0), (0.0, 0.0)]), // h_11
                cv(&[(0.0, 0.0), (1.0, 0.0)]), // h_12 (unused here)
                cv(&[(0.0, 0.0), (1.0, 0.0)]), // h_21
                cv(&[(1.0, 0.0), (0.0, 0.0)]), // h_22 (unused)
            ],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
        );
        let b = zf_beam(&ch, 0).unwrap();
        assert!((b.v[0] - Cpx::new(1.0, 0.0)).norm() < 1e-14);
        assert!(b.v[1].norm() < 1e-14);
    }

    #[test]
    fn zf_beam_rejects_parallel_cross_channel() {
        let h11 = cv(&[(1.0, 0.0), (0.5, 0.2)]);
        let ch = manual_ch(
            2,
            2,
            vec![
                h11.clone(),
                cv(&[(0.0, 0.0), (1.0, 0.0)]),
                h11.clone() * Cpx::new(2.0, 0.0), // h_21 parallel to h_11
                cv(&[(1.0, 0.0), (0.0, 0.0)]),
            ],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
        );
        assert_eq!(zf_beam(&ch, 0), Err(BeamError::DegenerateChannel { tx: 0 }));
    }

    #[test]
    fn zf_beam_requires_enough_antennas() {
        let ch = MisoChannelSet::sample(3, 2, &[1.0; 3], &[1.0; 3], &RngSpec::new(1)).unwrap();
        assert_eq!(zf_beam(&ch, 0), Err(BeamError::ZfInfeasible { k: 3, n: 2 }));
    }

    #[test]
    fn zf_leakage_is_negligible() {
        for t in 0..20 {
            let ch = MisoChannelSet::sample(3, 4, &[1.0; 3], &[2.0; 3], &RngSpec::with_stream(21, t))
                .unwrap();
            for i in 0..3 {
                let b = zf_beam(&ch, i).unwrap();
                for j in 0..3 {
                    if j != i {
                        assert!(leakage_power(&b, ch.h(j, i)) <= 1e-18);
                    }
                }
                assert!((b.power() - 2.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn leakage_power_cases() {
        let v = BeamVector::new(cv(&[(1.0, 0.0), (0.0, 0.0)]), 0);
        assert_eq!(leakage_power(&v, &cv(&[(0.0, 0.0), (1.0, 0.0)])), 0.0);
        assert_eq!(leakage_power(&v, &cv(&[(2.0, 0.0), (0.0, 0.0)])), 4.0);
        let rotated = BeamVector::new(&v.v * Cpx::from_polar(1.0, 1.2), 0);
        let h = cv(&[(0.7, -0.3), (0.1, 0.9)]);
        assert!((leakage_power(&v, &h) - leakage_power(&rotated, &h)).abs() < 1e-14);
    }

    #[test]
    fn single_user_rate_is_one_bit() {
        let ch = manual_ch(1, 1, vec![cv(&[(1.0, 0.0)])], vec![1.0], vec![1.0]);
        let beams = vec![BeamVector::new(cv(&[(1.0, 0.0)]), 0)];
        let rates = achievable_rates(&ch, &beams);
        assert!((rates.r[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_user_rate_arithmetic() {
        // signal power 1, sigma^2 = 1, interference power 1 -> log2(1.5)
        let ch = manual_ch(
            2,
            1,
            vec![
                cv(&[(1.0, 0.0)]),
                cv(&[(1.0, 0.0)]),
                cv(&[(1.0, 0.0)]),
                cv(&[(1.0, 0.0)]),
            ],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
        );
        let beams = vec![
            BeamVector::new(cv(&[(1.0, 0.0)]), 0),
            BeamVector::new(cv(&[(1.0, 0.0)]), 1),
        ];
        let rates = achievable_rates(&ch, &beams);
        assert!((rates.r[0] - 1.5f64.log2()).abs() < 1e-15);
        assert!((rates.r[1] - 1.5f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn zero_beams_zero_rates() {
        let ch = MisoChannelSet::sample(2, 2, &[1.0; 2], &[1.0; 2], &RngSpec::new(4)).unwrap();
        let beams = vec![
            BeamVector::new(CVector::zeros(2), 0),
            BeamVector::new(CVector::zeros(2), 1),
        ];
        let rates = achievable_rates(&ch, &beams);
        assert_eq!(rates.sum(), 0.0);
    }

    #[test]
    fn rates_are_phase_invariant() {
        let ch = MisoChannelSet::sample(3, 3, &[1.0; 3], &[1.0; 3], &RngSpec::new(40)).unwrap();
        let beams: Vec<BeamVector> = (0..3).map(|i| virtual_sinr_beam(&ch, i).unwrap()).collect();
        let r0 = achievable_rates(&ch, &beams);
        let rotated: Vec<BeamVector> = beams
            .iter()
            .enumerate()
            .map(|(i, b)| BeamVector::new(&b.v * Cpx::from_polar(1.0, 0.3 + i as f64), i))
            .collect();
        let r1 = achievable_rates(&ch, &rotated);
        for i in 0..3 {
            assert!((r0.r[i] - r1.r[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn added_interference_never_raises_rates() {
        let ch = MisoChannelSet::sample(2, 2, &[1.0; 2], &[1.0; 2], &RngSpec::new(61)).unwrap();
        let quiet = vec![
            mf_beam(&ch, 0).unwrap(),
            BeamVector::new(CVector::zeros(2), 1),
        ];
        let loud = vec![
            mf_beam(&ch, 0).unwrap(),
            BeamVector::new(ch.h(0, 1) * Cpx::new(1.0, 0.0) / Cpx::new(ch.h(0, 1).norm(), 0.0), 1),
        ];
        let r_quiet = achievable_rates(&ch, &quiet);
        let r_loud = achievable_rates(&ch, &loud);
        assert!(r_loud.r[0] <= r_quiet.r[0] + 1e-15);
    }

    #[test]
    fn lower_bound_arithmetic() {
        // eps = 1, |h^H v|^2 = 2, sigma^2 = 1 -> log2(2) = 1
        let ch = manual_ch(
            2,
            1,
            vec![
                cv(&[(2.0f64.sqrt(), 0.0)]),
                cv(&[(1.0, 0.0)]),
                cv(&[(1.0, 0.0)]),
                cv(&[(1.0, 0.0)]),
            ],
            vec![1.0, 1.0],
            vec![4.0, 4.0],
        );
        let mut budget = LeakageBudget::zeros(2);
        budget.set_alpha(0, 1, 1.0); // eps_0 = alpha(0, 1) = 1
        let beam = BeamVector::new(cv(&[(1.0, 0.0)]), 0);
        assert!((rate_lower_bound(&ch, 0, &beam, &budget) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lower_bound_equals_rate_without_interference() {
        let ch = MisoChannelSet::sample(2, 3, &[1.0; 2], &[1.0; 2], &RngSpec::new(12)).unwrap();
        let budget = LeakageBudget::zeros(2);
        let beams: Vec<BeamVector> = (0..2).map(|i| zf_beam(&ch, i).unwrap()).collect();
        let rates = achievable_rates(&ch, &beams);
        for i in 0..2 {
            let lb = rate_lower_bound(&ch, i, &beams[i], &budget);
            assert!((lb - rates.r[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn lower_bound_dominated_by_true_rate_on_random_feasible_beams() {
        // random beams rescaled into the feasible set; bound must never exceed
        // the realized rate (checked exhaustively in the acceptance suite)
        let mut violations = 0;
        for t in 0..500 {
            let ch = MisoChannelSet::sample(3, 3, &[1.0; 3], &[2.0; 3], &RngSpec::with_stream(99, t))
                .unwrap();
            let budget = LeakageBudget::uniform(3, 0.3);
            let beams: Vec<BeamVector> = (0..3)
                .map(|i| {
                    let raw = crate::channel::test_support::random_cvector(3, &mut RngSpec::with_stream(100, t).rng());
                    feasible_scale(&ch, i, raw, &budget)
                })
                .collect();
            let rates = achievable_rates(&ch, &beams);
            for i in 0..3 {
                if rate_lower_bound(&ch, i, &beams[i], &budget) > rates.r[i] + 1e-12 {
                    violations += 1;
                }
            }
        }
        assert_eq!(violations, 0);
    }

    pub(crate) fn feasible_scale(
        ch: &MisoChannelSet,
        i: usize,
        raw: CVector,
        budget: &LeakageBudget,
    ) -> BeamVector {
        let mut scale: f64 = (ch.power(i) / raw.norm_squared()).sqrt();
        for j in 0..ch.k() {
            if j != i {
                let lk = ch.h(j, i).dotc(&raw).norm_sqr();
                if lk > 0.0 {
                    scale = scale.min((budget.alpha(j, i) * ch.sigma2(j) / lk).sqrt());
                }
            }
        }
        BeamVector::new(raw * Cpx::new(scale, 0.0), i)
    }

    #[test]
    fn feasibility_checks() {
        let ch = MisoChannelSet::sample(2, 2, &[1.0; 2], &[1.0; 2], &RngSpec::new(31)).unwrap();
        let budget = LeakageBudget::zeros(2);
        let zf = zf_beam(&ch, 0).unwrap();
        assert!(check_rzf_feasible(&ch, 0, &zf, &budget, FEASIBILITY_TOL));
        // full-power MF against zero budget on non-orthogonal channels
        let mf = mf_beam(&ch, 0).unwrap();
        let full = BeamVector::new(&mf.v * Cpx::new(ch.power(0).sqrt(), 0.0), 0);
        assert!(!check_rzf_feasible(&ch, 0, &full, &budget, FEASIBILITY_TOL));
    }

    #[test]
    fn boundary_leakage_is_feasible() {
        // leakage exactly alpha * sigma^2 passes at tol 1e-9
        let ch = manual_ch(
            2,
            2,
            vec![
                cv(&[(1.0, 0.0), (0.0, 0.0)]),
                cv(&[(0.0, 0.0), (1.0, 0.0)]),
                cv(&[(1.0, 0.0), (0.0, 0.0)]), // h_21 = e1
                cv(&[(0.0, 0.0), (1.0, 0.0)]),
            ],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
        );
        let mut budget = LeakageBudget::zeros(2);
        budget.set_alpha(1, 0, 0.25);
        let beam = BeamVector::new(cv(&[(0.5, 0.0), (0.5, 0.0)]), 0); // |h_21^H v|^2 = 0.25
        assert!(check_rzf_feasible(&ch, 0, &beam, &budget, FEASIBILITY_TOL));
    }

    #[test]
    fn budget_epsilon_recomputes() {
        let mut b = LeakageBudget::uniform(3, 0.2);
        assert!((b.epsilon(0) - 0.4).abs() < 1e-15);
        b.set_alpha(0, 2, 0.5);
        assert!((b.epsilon(0) - 0.7).abs() < 1e-15);
        let entries = b.cross_entries();
        let back = LeakageBudget::from_cross_entries(3, &entries).unwrap();
        assert_eq!(b, back);
    }

    #[test]
    fn virtual_sinr_reduces_to_mf_without_interference() {
        let ch = MisoChannelSet::sample(1, 3, &[1.0], &[2.0], &RngSpec::new(70)).unwrap();
        let vs = virtual_sinr_beam(&ch, 0).unwrap();
        let mf = mf_beam(&ch, 0).unwrap();
        let scaled = &mf.v * Cpx::new(2.0f64.sqrt(), 0.0);
        assert!((&vs.v - &scaled).norm() < 1e-10);
    }

    #[test]
    fn virtual_sinr_maximizes_slnr() {
        // SLNR(v) = |h_ii^H v|^2 / (sigma^2 + sum |h_ji^H v|^2) at ||v||^2 = P
        fn slnr(ch: &MisoChannelSet, i: usize, b: &BeamVector) -> f64 {
            let sig = ch.h(i, i).dotc(&b.v).norm_sqr();
            let leak: f64 = (0..ch.k())
                .filter(|&j| j != i)
                .map(|j| ch.h(j, i).dotc(&b.v).norm_sqr())
                .sum();
            sig / (ch.sigma2(i) + leak)
        }
        for t in 0..50 {
            let ch = MisoChannelSet::sample(2, 3, &[1.0; 2], &[1.5; 2], &RngSpec::with_stream(71, t))
                .unwrap();
            let vs = virtual_sinr_beam(&ch, 0).unwrap();
            let mf = mf_beam(&ch, 0).unwrap();
            let mf_full = BeamVector::new(&mf.v * Cpx::new(1.5f64.sqrt(), 0.0), 0);
            let zf = zf_beam(&ch, 0).unwrap();
            let s = slnr(&ch, 0, &vs);
            assert!(s >= slnr(&ch, 0, &mf_full) - 1e-10);
            assert!(s >= slnr(&ch, 0, &zf) - 1e-10);
        }
    }
}
