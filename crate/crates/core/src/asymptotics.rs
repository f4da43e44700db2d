//! Large-energy behaviour of Riesz projections and q-functions, and the
//! random-coefficient genericity check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numkernel::{self, CMatrix, C64};
use crate::operators::{BoundaryTriple, CoefficientTriple};
use crate::parallel::{map_indexed, Parallelism};
use crate::transfer::{self, IndexSet};
use crate::widom;

/// Relative modulus gap below which `R` or `T` is treated as non-simple.
pub const SIMPLE_TOL: f64 = 1e-10;

/// Spectral data of `R` and `T` with the labeling used at large energy:
/// `|r_1| < ... < |r_L|`, `|t_L| < ... < |t_1|`; the projector of `t_k`
/// carries index `L + k`.
#[derive(Debug, Clone)]
pub struct RTData {
    pub r_values: Vec<C64>,
    pub t_values: Vec<C64>,
    pub pr: Vec<CMatrix>,
    pub pt: Vec<CMatrix>,
}

fn sorted_projectors(
    m: &CMatrix,
    descending: bool,
    name: &'static str,
) -> Result<(Vec<C64>, Vec<CMatrix>)> {
    let dec = numkernel::eigenpairs(m)?;
    if dec.any_flagged() {
        return Err(Error::NotSimpleSpectrum(name));
    }
    let n = dec.values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dec.values[a].norm().total_cmp(&dec.values[b].norm()));
    if descending {
        order.reverse();
    }
    let scale = 1.0 + dec.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for w in order.windows(2) {
        if (dec.values[w[0]].norm() - dec.values[w[1]].norm()).abs() <= SIMPLE_TOL * scale {
            return Err(Error::NotSimpleSpectrum(name));
        }
    }
    let values = order.iter().map(|&i| dec.values[i]).collect();
    let projectors = order
        .iter()
        .map(|&i| {
            let r = dec.right_vectors.column(i);
            let l = dec.left_vectors.column(i);
            CMatrix::from_fn(n, n, |a, b| r[a] * l[b].conj())
        })
        .collect();
    Ok((values, projectors))
}

pub fn rt_spectral_data(r: &CMatrix, t: &CMatrix) -> Result<RTData> {
    numkernel::inverse(r)?;
    numkernel::inverse(t)?;
    let (r_values, pr) = sorted_projectors(r, false, "R")?;
    let (t_values, pt) = sorted_projectors(t, true, "T")?;
    Ok(RTData {
        r_values,
        t_values,
        pr,
        pt,
    })
}

impl RTData {
    pub fn dim(&self) -> usize {
        self.r_values.len()
    }

    /// `P^R_I = sum_{i in I, i <= L} P^R_i`.
    pub fn pr_set(&self, set: &IndexSet) -> CMatrix {
        let l = self.dim();
        set.members()
            .iter()
            .filter(|&&i| i <= l)
            .fold(CMatrix::zeros(l, l), |acc, &i| &acc + &self.pr[i - 1])
    }

    /// `P^T_I = sum_{i in I, i > L} P^T_i`.
    pub fn pt_set(&self, set: &IndexSet) -> CMatrix {
        let l = self.dim();
        set.members()
            .iter()
            .filter(|&&i| i > l)
            .fold(CMatrix::zeros(l, l), |acc, &i| &acc + &self.pt[i - l - 1])
    }

    /// `rk(P^R_I)`.
    pub fn rank_r(&self, set: &IndexSet) -> usize {
        set.members().iter().filter(|&&i| i <= self.dim()).count()
    }

    /// `rk(P^T_I)`.
    pub fn rank_t(&self, set: &IndexSet) -> usize {
        set.len() - self.rank_r(set)
    }
}

/// Frames `Phi`, `Phi_c` for `Ran P`, `Ran(1 - P)` and the dual frames with
/// `(Psi, Psi_c) = ((Phi, Phi_c)^{-1})^*`.
#[derive(Debug, Clone)]
pub struct FrameSet {
    pub phi: CMatrix,
    pub phi_c: CMatrix,
    pub psi: CMatrix,
    pub psi_c: CMatrix,
}

impl FrameSet {
    pub fn rank(&self) -> usize {
        self.phi.cols()
    }
}

pub fn frames_from_projection(p: &CMatrix, rank: usize) -> Result<FrameSet> {
    let l = p.rows();
    if !p.is_square() {
        return Err(Error::NonSquare {
            rows: p.rows(),
            cols: p.cols(),
        });
    }
    let defect = (&(p * p) - p).norm_fro();
    if defect > 1e-8 * (1.0 + p.norm_fro().powi(2)) {
        return Err(Error::NotAProjection(defect));
    }
    let found = numkernel::numerical_rank(p, 1e-8)?;
    if found != rank {
        return Err(Error::RankMismatch {
            expected: rank,
            found,
        });
    }
    let phi = numkernel::range_basis(p, rank);
    let phi_c = numkernel::range_basis(&(&CMatrix::identity(l) - p), l - rank);
    let both = phi.hstack(&phi_c);
    let dual = numkernel::inverse(&both)?.adjoint();
    Ok(FrameSet {
        psi: dual.block(0, 0, l, rank),
        psi_c: dual.block(0, rank, l, l - rank),
        phi,
        phi_c,
    })
}

/// Leading structure of `R_I^E`: diagonal blocks at order zero and the
/// off-diagonal blocks at order `1/E`.
#[derive(Debug, Clone)]
pub struct RieszLeading {
    pub pt: CMatrix,
    pub pr: CMatrix,
    /// `T (P^R_I - P^T_I) R`, the `1/E` coefficient of the upper-right block.
    pub upper_right: CMatrix,
    /// `-(P^R_I - P^T_I)`, the `1/E` coefficient of the lower-left block.
    pub lower_left: CMatrix,
}

impl RieszLeading {
    /// `[[P^T, UR/E], [LL/E, P^R]]`.
    pub fn approximate(&self, e: C64) -> CMatrix {
        let inv = e.inv();
        CMatrix::from_blocks(
            &self.pt,
            &self.upper_right.scale(inv),
            &self.lower_left.scale(inv),
            &self.pr,
        )
    }
}

pub fn riesz_leading(rt: &RTData, coeffs: &CoefficientTriple, set: &IndexSet) -> RieszLeading {
    let pt = rt.pt_set(set);
    let pr = rt.pr_set(set);
    let diff = &pr - &pt;
    RieszLeading {
        upper_right: &(coeffs.t() * &diff) * coeffs.r(),
        lower_left: -&diff,
        pt,
        pr,
    }
}

/// `coefficient * E^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeadingTerm {
    pub coefficient: C64,
    pub exponent: i32,
}

impl LeadingTerm {
    pub fn eval(&self, e: C64) -> C64 {
        self.coefficient * e.powi(self.exponent)
    }
}

/// `q~_I = det(P^T_I - P^R_I) E^{-L} + O(E^{-L-1})`.
pub fn q_tilde_leading(rt: &RTData, set: &IndexSet) -> Result<LeadingTerm> {
    let l = rt.dim();
    let coefficient = numkernel::determinant(&(&rt.pt_set(set) - &rt.pr_set(set)))?;
    Ok(LeadingTerm {
        coefficient,
        exponent: -(l as i32),
    })
}

/// `q^_I = det_{L-p}(Psi_c^* P^R_I (C - V) Phi_c) E^{p-L}`, `p = rk P^T_I`.
pub fn q_hat_leading(rt: &RTData, set: &IndexSet, c: &CMatrix, v: &CMatrix) -> Result<LeadingTerm> {
    let l = rt.dim();
    let p = rt.rank_t(set);
    let f = frames_from_projection(&rt.pt_set(set), p)?;
    let inner = &(&(&f.psi_c.adjoint() * &rt.pr_set(set)) * &(c - v)) * &f.phi_c;
    Ok(LeadingTerm {
        coefficient: numkernel::determinant(&inner)?,
        exponent: p as i32 - l as i32,
    })
}

/// `q_I = det_{L-p}(Psi_c^* B Phi_c) det_{p^}(Psi^^* A Phi^) / ((-1)^{p-p^} det B) E^{p-p^}`.
pub fn q_leading(rt: &RTData, boundary: &BoundaryTriple, set: &IndexSet) -> Result<LeadingTerm> {
    boundary.b_inv()?;
    let l = rt.dim();
    let p = rt.rank_t(set);
    let p_hat = rt.rank_r(set);
    let exponent = p as i32 - p_hat as i32;
    if set.len() > l + boundary.rank_a() {
        return Ok(LeadingTerm {
            coefficient: C64::new(0.0, 0.0),
            exponent,
        });
    }
    let ft = frames_from_projection(&rt.pt_set(set), p)?;
    let fr = frames_from_projection(&rt.pr_set(set), p_hat)?;
    let d1 = numkernel::determinant(&(&(&ft.psi_c.adjoint() * boundary.b()) * &ft.phi_c))?;
    let d2 = numkernel::determinant(&(&(&fr.psi.adjoint() * boundary.a()) * &fr.phi))?;
    let sign = if (p + p_hat).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    Ok(LeadingTerm {
        coefficient: d1 * d2 / (boundary.det_b() * sign),
        exponent,
    })
}

/// `det(E P + M0 + M1/E) / (det_{L-p}(Psi_c^* M0 Phi_c) E^p)`, which tends to
/// one as `|E|` grows.
pub fn lemma_ratio(p: &CMatrix, rank: usize, m0: &CMatrix, m1: &CMatrix, e: C64) -> Result<C64> {
    let f = frames_from_projection(p, rank)?;
    let lead = numkernel::determinant(&(&(&f.psi_c.adjoint() * m0) * &f.phi_c))?;
    let full = numkernel::determinant(&(&(&p.scale(e) + m0) + &m1.scale(e.inv())))?;
    Ok(full / (lead * e.powu(rank as u32)))
}

/// Adds `eps` times a complex Gaussian matrix drawn from `seed`. Intended for
/// exploring models whose `R` or `T` is not simple.
pub fn perturb(m: &CMatrix, eps: f64, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gaussian_matrix(&mut rng, m.rows(), m.cols());
    m + &g.scale(C64::new(eps, 0.0))
}

/// Matrix with independent standard complex Gaussian entries.
pub fn gaussian_matrix<G: Rng>(rng: &mut G, rows: usize, cols: usize) -> CMatrix {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        data.push(C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2);
    }
    CMatrix::from_row_major(rows, cols, data).expect("finite")
}

/// One random model together with the rank of `A` it claims.
#[derive(Debug, Clone)]
pub struct Draw {
    pub r: CMatrix,
    pub t: CMatrix,
    pub v: CMatrix,
    pub a: CMatrix,
    pub b: CMatrix,
    pub c: CMatrix,
    pub claimed_rank: usize,
}

/// Gaussian draws; `A` is Gaussian for `rank = L` and otherwise a product of
/// `L x r` and `r x L` Gaussian factors.
pub fn gaussian_draw(rng: &mut ChaCha8Rng, l: usize, rank: usize) -> Draw {
    let g = |rng: &mut ChaCha8Rng| gaussian_matrix(rng, l, l);
    let (r, t, v, b, c) = (g(rng), g(rng), g(rng), g(rng), g(rng));
    let a = if rank == l {
        g(rng)
    } else {
        &gaussian_matrix(rng, l, rank) * &gaussian_matrix(rng, rank, l)
    };
    Draw {
        r,
        t,
        v,
        a,
        b,
        c,
        claimed_rank: rank,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Nonzero,
    Zero,
    NotSimple,
    RankMismatch,
    Singular,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub status: TrialStatus,
    /// Smallest leading-coefficient modulus over the tested index sets.
    pub min_coefficient: Option<f64>,
    /// Count of direct q evaluations that came out numerically zero.
    pub direct_zeros: usize,
    pub sets_tested: usize,
}

#[derive(Debug, Clone, Default, Serialize, PartialEq, Eq)]
pub struct GenericityCounts {
    pub nonzero: usize,
    pub zero: usize,
    pub not_simple: usize,
    pub rank_mismatch: usize,
    pub singular: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenericityReport {
    pub root_seed: u64,
    pub trials: Vec<TrialRecord>,
    pub counts: GenericityCounts,
    /// Nonzero trials over simple-spectrum trials.
    pub nonzero_fraction: f64,
}

/// Per-trial seed derived from the root seed.
pub fn trial_seed(root: u64, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(trial as u64 + 1);
    rng.random()
}

const COEFF_FLOOR: f64 = 1e-12;

fn run_trial(draw: &Draw, seed: u64) -> TrialRecord {
    let record = |status, min_coefficient, direct_zeros, sets_tested| TrialRecord {
        seed,
        status,
        min_coefficient,
        direct_zeros,
        sets_tested,
    };
    let l = draw.r.rows();
    let rank = numkernel::numerical_rank(&draw.a, crate::operators::RANK_TOL).unwrap_or(usize::MAX);
    if rank != draw.claimed_rank {
        return record(TrialStatus::RankMismatch, None, 0, 0);
    }
    let rt = match rt_spectral_data(&draw.r, &draw.t) {
        Ok(rt) => rt,
        Err(Error::NotSimpleSpectrum(_)) => return record(TrialStatus::NotSimple, None, 0, 0),
        Err(_) => return record(TrialStatus::Singular, None, 0, 0),
    };
    let built =
        CoefficientTriple::new(draw.r.clone(), draw.t.clone(), draw.v.clone()).and_then(|m| {
            BoundaryTriple::perturbed(draw.a.clone(), draw.b.clone(), draw.c.clone())
                .map(|b| (m, b))
        });
    let Ok((coeffs, boundary)) = built else {
        return record(TrialStatus::Singular, None, 0, 0);
    };

    let mut min_coeff = f64::INFINITY;
    let mut tested = 0;
    let mut leading_q = Vec::new();
    for set in IndexSet::subsets_up_to(2 * l, l + rank) {
        // det of A compressed to a space of dimension above rank A vanishes identically.
        if rt.rank_r(&set) > rank {
            continue;
        }
        let Ok(term) = q_leading(&rt, &boundary, &set) else {
            return record(TrialStatus::Singular, None, 0, tested);
        };
        min_coeff = min_coeff.min(term.coefficient.norm());
        leading_q.push(set);
        tested += 1;
    }
    for set in IndexSet::subsets_of_size(2 * l, l) {
        let Ok(term) = q_hat_leading(&rt, &set, &draw.c, &draw.v) else {
            return record(TrialStatus::Singular, None, 0, tested);
        };
        min_coeff = min_coeff.min(term.coefficient.norm());
        tested += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut direct_zeros = 0;
    for _ in 0..3 {
        let e = C64::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        ) * 3.0;
        let Ok(spec) = transfer::ordered_spectrum(&coeffs, e) else {
            continue;
        };
        for set in &leading_q {
            if let Ok(q) = widom::q_perturbed(&spec, &boundary, e, set) {
                if q.value.is_some_and(|v| v.norm() <= COEFF_FLOOR) {
                    direct_zeros += 1;
                }
            }
        }
    }

    let status = if min_coeff > COEFF_FLOOR && direct_zeros == 0 {
        TrialStatus::Nonzero
    } else {
        TrialStatus::Zero
    };
    record(status, Some(min_coeff), direct_zeros, tested)
}

/// Draws `trials` models from `sampler` (seeded per trial from `root_seed`)
/// and checks that every leading coefficient of `q_I` (`|I| <= L + r`, at most
/// `rank A` indices below `L + 1`) and `q^_I` (`|I| = L`) is nonzero.
pub fn genericity_check<F>(
    sampler: F,
    trials: usize,
    root_seed: u64,
    mode: Parallelism,
) -> GenericityReport
where
    F: Fn(&mut ChaCha8Rng) -> Draw + Sync + Send,
{
    let records = map_indexed(trials, mode, |k| {
        let seed = trial_seed(root_seed, k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = sampler(&mut rng);
        run_trial(&draw, seed)
    });
    let mut counts = GenericityCounts::default();
    for r in &records {
        match r.status {
            TrialStatus::Nonzero => counts.nonzero += 1,
            TrialStatus::Zero => counts.zero += 1,
            TrialStatus::NotSimple => counts.not_simple += 1,
            TrialStatus::RankMismatch => counts.rank_mismatch += 1,
            TrialStatus::Singular => counts.singular += 1,
        }
    }
    let simple = counts.nonzero + counts.zero;
    let nonzero_fraction = if simple == 0 {
        0.0
    } else {
        counts.nonzero as f64 / simple as f64
    };
    GenericityReport {
        root_seed,
        trials: records,
        counts,
        nonzero_fraction,
    }
}
