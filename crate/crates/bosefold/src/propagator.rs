//! Symplectic split-operator time evolution.
//!
//! A plan is a fixed sequence of two step kinds — spectral exponentials and
//! index permutations — applied to the state in order. With `tau = -i dt`
//! every exponential factor is unitary and every permutation exact, so the
//! norm is preserved to machine precision regardless of step count. One
//! period of the sequence returns the state to its home frame.
//!
//! Periodic chains recycle a single pair-term exponential through K frames:
//! descending order is `(e^{tau H12} S)^K`, ascending `(S^T e^{tau H12})^K`,
//! and the second-order form chains an ascending half-step into a descending
//! half-step. Open chains run K-1 pair factors around one diagonal-only
//! factor `e^{tau d1}`, with all shuffles still of order K. The driven
//! optomechanical pair alternates the interaction exponential with the drive
//! exponential conjugated into its swapped frame, the drive amplitude
//! sampled at the step midpoint.

use std::sync::Arc;

use crate::hamiltonian::{
    build_bh_diag, build_bh_pair, build_om_drive, build_om_int, BhBasis, BhParams, Boundary,
    Drive, OmParams,
};
use crate::shuffle::{island_shuffle, product_shuffle, ShufflePermutation};
use crate::tridiag::{
    compute_phases, exp_apply_in_place, exp_apply_with_phases, BlockSpectralForm, PhaseTable,
    StateVector, SymTriMatrix, C64,
};
use crate::{Error, Result};

/// Splitting order of a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOrder {
    FirstAscending,
    FirstDescending,
    Second,
}

/// Where an exponential's scalar prefactor comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScaleSource {
    One,
    /// The drive amplitude sampled at the step midpoint `t + dt/2`.
    Drive,
}

/// Which physical factor an exponential realizes (introspection only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExpLabel {
    BhPair,
    BhDiag,
    OmInt,
    OmDrive,
}

enum PlanStep {
    ExpApply {
        form: Arc<BlockSpectralForm>,
        tau_frac: f64,
        scale: ScaleSource,
        label: ExpLabel,
        /// Phase table frozen at plan build when the scale is step-invariant;
        /// time-dependent drives recompute per step.
        phases: Option<Arc<PhaseTable>>,
    },
    Permute(Arc<ShufflePermutation>),
}

/// Introspectable step description, in application order.
#[derive(Debug, Clone, PartialEq)]
pub enum StepSummary {
    Exp { tau_frac: f64, label: ExpLabel },
    Permute { shift: u32 },
}

enum ObservableCtx {
    Bh {
        h12: SymTriMatrix,
        /// Site-1 diagonal values; the open-boundary energy evaluates them
        /// in the fully rotated frame where they stand in for site K.
        d1: Option<Vec<f64>>,
        shuffle_t: Arc<ShufflePermutation>,
        /// `occupations[j][z] = n_{j+1}` of the tuple at index z.
        occupations: Vec<Vec<f64>>,
        k: usize,
        boundary: Boundary,
    },
    Om {
        h_int: SymTriMatrix,
        drive_tri: SymTriMatrix,
        swap: Arc<ShufflePermutation>,
        drive: Drive,
        occ_a: Vec<f64>,
        occ_b: Vec<f64>,
        boundary_mask: Vec<bool>,
    },
}

/// An immutable, shareable step sequence plus the observable bookkeeping for
/// the system it propagates.
pub struct PropagatorPlan {
    dt: f64,
    dim: usize,
    order: StepOrder,
    steps: Vec<PlanStep>,
    ctx: ObservableCtx,
}

/// One sampled row of an evolution time series.
#[derive(Debug, Clone)]
pub struct Record {
    pub step: u64,
    pub t: f64,
    pub norm: f64,
    pub energy: f64,
    /// Per-site occupations for a chain; `[<n_a>, <n_b>]` for the pair.
    pub occupations: Vec<f64>,
    /// Max state-vector magnitude on truncation-boundary states (pair only).
    pub boundary_pop: Option<f64>,
}

/// Build the split-operator plan for a Bose-Hubbard chain. Requires
/// site-independent couplings and an island basis: the recycled exponential
/// is only the same matrix in every frame under those conditions.
pub fn plan_bh(p: &BhParams, order: StepOrder, dt: f64) -> Result<PropagatorPlan> {
    if !p.is_site_independent() {
        return Err(Error::UnsupportedConfig(
            "shuffle recycling needs site-independent mu, U, J; per-site overrides differ".into(),
        ));
    }
    let BhBasis::Island { n_total } = p.basis else {
        return Err(Error::UnsupportedConfig(
            "the shuffle-recycled propagator requires an island basis".into(),
        ));
    };
    if !dt.is_finite() || dt == 0.0 {
        return Err(Error::InvalidParam("dt must be finite and nonzero".into()));
    }
    let k = p.k;
    let h12 = build_bh_pair(p)?;
    let dim = h12.dim();
    let form = Arc::new(h12.spectral_form()?);
    let s = Arc::new(island_shuffle(n_total, k)?);
    let st = Arc::new(s.transpose());

    let d1 = build_bh_diag(p, 1)?;
    let dform = if p.boundary == Boundary::Open {
        let m = SymTriMatrix::new(d1.clone(), vec![0.0; dim - 1])?;
        Some(Arc::new(m.spectral_form()?))
    } else {
        None
    };

    let pair_frac = match order {
        StepOrder::Second => 0.5,
        _ => 1.0,
    };
    let pair_phases = Arc::new(compute_phases(
        &form,
        C64::new(0.0, -(dt * pair_frac)),
        1.0,
    ));
    let diag_phases = dform
        .as_ref()
        .map(|f| Arc::new(compute_phases(f, C64::new(0.0, -dt), 1.0)));

    let pair = |frac: f64| PlanStep::ExpApply {
        form: form.clone(),
        tau_frac: frac,
        scale: ScaleSource::One,
        label: ExpLabel::BhPair,
        phases: Some(pair_phases.clone()),
    };
    let diag = || PlanStep::ExpApply {
        form: dform.clone().expect("open boundary"),
        tau_frac: 1.0,
        scale: ScaleSource::One,
        label: ExpLabel::BhDiag,
        phases: diag_phases.clone(),
    };
    let fwd = || PlanStep::Permute(s.clone());
    let bwd = || PlanStep::Permute(st.clone());

    let mut steps = Vec::new();
    match (p.boundary, order) {
        (Boundary::Periodic, StepOrder::FirstDescending) => {
            for _ in 0..k {
                steps.push(fwd());
                steps.push(pair(1.0));
            }
        }
        (Boundary::Periodic, StepOrder::FirstAscending) => {
            for _ in 0..k {
                steps.push(pair(1.0));
                steps.push(bwd());
            }
        }
        (Boundary::Periodic, StepOrder::Second) => {
            for _ in 0..k {
                steps.push(pair(0.5));
                steps.push(bwd());
            }
            for _ in 0..k {
                steps.push(fwd());
                steps.push(pair(0.5));
            }
        }
        (Boundary::Open, StepOrder::FirstAscending) => {
            for _ in 0..k - 1 {
                steps.push(pair(1.0));
                steps.push(bwd());
            }
            steps.push(diag());
            steps.push(bwd());
        }
        (Boundary::Open, StepOrder::FirstDescending) => {
            steps.push(fwd());
            steps.push(diag());
            for _ in 0..k - 1 {
                steps.push(fwd());
                steps.push(pair(1.0));
            }
        }
        (Boundary::Open, StepOrder::Second) => {
            for _ in 0..k - 1 {
                steps.push(pair(0.5));
                steps.push(bwd());
            }
            steps.push(diag());
            for _ in 0..k - 1 {
                steps.push(fwd());
                steps.push(pair(0.5));
            }
        }
    }
    debug_assert_eq!(net_shift(&steps), 0);

    let tuples = p.basis_tuples()?;
    let occupations: Vec<Vec<f64>> = (0..k)
        .map(|site| tuples.iter().map(|t| t.entries()[site] as f64).collect())
        .collect();
    Ok(PropagatorPlan {
        dt,
        dim,
        order,
        steps,
        ctx: ObservableCtx::Bh {
            h12,
            d1: (p.boundary == Boundary::Open).then_some(d1),
            shuffle_t: st,
            occupations,
            k,
            boundary: p.boundary,
        },
    })
}

/// Build the split-operator plan for the driven optomechanical pair. First
/// order applies the interaction exponential then the drive exponential in
/// its swapped frame; second order flanks the interaction with drive
/// half-steps. Both sample the drive at the step midpoint.
pub fn plan_om(p: &OmParams, order: StepOrder, dt: f64) -> Result<PropagatorPlan> {
    if !dt.is_finite() || dt == 0.0 {
        return Err(Error::InvalidParam("dt must be finite and nonzero".into()));
    }
    p.drive.validate()?;
    let h_int = build_om_int(p)?;
    let drive_tri = build_om_drive(p)?;
    let dim = h_int.dim();
    let int_form = Arc::new(h_int.spectral_form()?);
    let drive_form = Arc::new(drive_tri.spectral_form()?);
    let swap = Arc::new(product_shuffle(&[p.na + 1, p.nb + 1])?);
    let swap_t = Arc::new(swap.transpose());

    let int_phases = Arc::new(compute_phases(&int_form, C64::new(0.0, -dt), 1.0));
    let drive_frac = match order {
        StepOrder::Second => 0.5,
        _ => 1.0,
    };
    // a constant nonzero drive freezes its phase table too; E = 0 keeps the
    // exact identity shortcut in exp_apply_in_place
    let drive_phases = match p.drive {
        Drive::Constant(e) if e != 0.0 => Some(Arc::new(compute_phases(
            &drive_form,
            C64::new(0.0, -(dt * drive_frac)),
            e,
        ))),
        _ => None,
    };

    let int_step = || PlanStep::ExpApply {
        form: int_form.clone(),
        tau_frac: 1.0,
        scale: ScaleSource::One,
        label: ExpLabel::OmInt,
        phases: Some(int_phases.clone()),
    };
    let drive_step = |frac: f64| PlanStep::ExpApply {
        form: drive_form.clone(),
        tau_frac: frac,
        scale: ScaleSource::Drive,
        label: ExpLabel::OmDrive,
        phases: drive_phases.clone(),
    };

    let mut steps = Vec::new();
    match order {
        StepOrder::Second => {
            steps.push(PlanStep::Permute(swap.clone()));
            steps.push(drive_step(0.5));
            steps.push(PlanStep::Permute(swap_t.clone()));
            steps.push(int_step());
            steps.push(PlanStep::Permute(swap.clone()));
            steps.push(drive_step(0.5));
            steps.push(PlanStep::Permute(swap_t.clone()));
        }
        StepOrder::FirstAscending | StepOrder::FirstDescending => {
            steps.push(int_step());
            steps.push(PlanStep::Permute(swap.clone()));
            steps.push(drive_step(1.0));
            steps.push(PlanStep::Permute(swap_t.clone()));
        }
    }
    debug_assert_eq!(net_shift(&steps), 0);

    let (da, db) = (p.na + 1, p.nb + 1);
    let occ_a: Vec<f64> = (0..dim).map(|z| (z / db) as f64).collect();
    let occ_b: Vec<f64> = (0..dim).map(|z| (z % db) as f64).collect();
    let boundary_mask: Vec<bool> = (0..dim)
        .map(|z| z / db == da - 1 || z % db == db - 1)
        .collect();
    Ok(PropagatorPlan {
        dt,
        dim,
        order,
        steps,
        ctx: ObservableCtx::Om {
            h_int,
            drive_tri,
            swap,
            drive: p.drive.clone(),
            occ_a,
            occ_b,
            boundary_mask,
        },
    })
}

fn net_shift(steps: &[PlanStep]) -> u32 {
    let mut shift = 0u64;
    let mut order = 1u64;
    for s in steps {
        if let PlanStep::Permute(p) = s {
            shift += p.shift() as u64;
            order = p.order() as u64;
        }
    }
    (shift % order.max(1)) as u32
}

impl PropagatorPlan {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> StepOrder {
        self.order
    }

    /// Step sequence in application order, for inspection and tests.
    pub fn summary(&self) -> Vec<StepSummary> {
        self.steps
            .iter()
            .map(|s| match s {
                PlanStep::ExpApply {
                    tau_frac, label, ..
                } => StepSummary::Exp {
                    tau_frac: *tau_frac,
                    label: *label,
                },
                PlanStep::Permute(p) => StepSummary::Permute { shift: p.shift() },
            })
            .collect()
    }

    /// Histogram of irreducible block sizes of the main spectral form.
    pub fn block_histogram(&self) -> Vec<(usize, usize)> {
        for s in &self.steps {
            if let PlanStep::ExpApply { form, label, .. } = s {
                if matches!(label, ExpLabel::BhPair | ExpLabel::OmInt) {
                    return form.block_histogram();
                }
            }
        }
        Vec::new()
    }

    /// Apply one full step to `state`, which must be in its home frame;
    /// `t` is the time at the beginning of the step.
    pub fn step(&self, state: &mut StateVector, t: f64) -> Result<()> {
        if state.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: state.dim(),
            });
        }
        if state.frame() != 0 {
            return Err(Error::FrameMismatch {
                expected: 0,
                found: state.frame(),
            });
        }
        let drive_scale = match &self.ctx {
            ObservableCtx::Om { drive, .. } => drive.eval(t + 0.5 * self.dt),
            _ => 1.0,
        };
        let mut amps = state.take_amps();
        let mut scratch = vec![C64::new(0.0, 0.0); self.dim];
        let mut frame = 0u64;
        let mut frame_order = 1u64;
        for s in &self.steps {
            match s {
                PlanStep::ExpApply {
                    form,
                    tau_frac,
                    scale,
                    phases,
                    ..
                } => {
                    if let Some(table) = phases {
                        exp_apply_with_phases(form, table, &mut amps)?;
                    } else {
                        let tau = C64::new(0.0, -(self.dt * tau_frac));
                        let sc = match scale {
                            ScaleSource::One => 1.0,
                            ScaleSource::Drive => drive_scale,
                        };
                        exp_apply_in_place(form, tau, sc, &mut amps)?;
                    }
                }
                PlanStep::Permute(p) => {
                    p.apply_into(&amps, &mut scratch)?;
                    std::mem::swap(&mut amps, &mut scratch);
                    frame += p.shift() as u64;
                    frame_order = p.order() as u64;
                }
            }
        }
        debug_assert_eq!(frame % frame_order.max(1), 0);
        state.put_amps(amps);
        Ok(())
    }

    /// Energy expectation `<psi|H|psi>` via tridiagonal quadratic forms in
    /// the appropriate frames; no dense matrix is ever formed.
    pub fn energy(&self, state: &StateVector, t: f64) -> Result<f64> {
        if state.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: state.dim(),
            });
        }
        match &self.ctx {
            ObservableCtx::Bh {
                h12,
                d1,
                shuffle_t,
                boundary,
                k,
                ..
            } => {
                let pair_terms = match boundary {
                    Boundary::Periodic => *k,
                    Boundary::Open => *k - 1,
                };
                let mut w = state.amps().to_vec();
                let mut scratch = vec![C64::new(0.0, 0.0); self.dim];
                let mut acc = 0.0;
                for j in 0..pair_terms {
                    if j > 0 {
                        shuffle_t.apply_into(&w, &mut scratch)?;
                        std::mem::swap(&mut w, &mut scratch);
                    }
                    acc += h12.quadratic_form(&w)?;
                }
                if let Some(d1) = d1 {
                    shuffle_t.apply_into(&w, &mut scratch)?;
                    std::mem::swap(&mut w, &mut scratch);
                    for (dz, a) in d1.iter().zip(&w) {
                        acc += dz * a.norm_sqr();
                    }
                }
                Ok(acc)
            }
            ObservableCtx::Om {
                h_int,
                drive_tri,
                swap,
                drive,
                ..
            } => {
                let mut acc = h_int.quadratic_form(state.amps())?;
                let e_t = drive.eval(t);
                if e_t != 0.0 {
                    let mut swapped = vec![C64::new(0.0, 0.0); self.dim];
                    swap.apply_into(state.amps(), &mut swapped)?;
                    acc += e_t * drive_tri.quadratic_form(&swapped)?;
                }
                Ok(acc)
            }
        }
    }

    /// Per-site occupation expectations (or `[<n_a>, <n_b>]`).
    pub fn occupations(&self, state: &StateVector) -> Vec<f64> {
        let tables: Vec<&[f64]> = match &self.ctx {
            ObservableCtx::Bh { occupations, .. } => {
                occupations.iter().map(|v| v.as_slice()).collect()
            }
            ObservableCtx::Om { occ_a, occ_b, .. } => vec![occ_a, occ_b],
        };
        tables
            .iter()
            .map(|table| {
                table
                    .iter()
                    .zip(state.amps())
                    .map(|(n, a)| n * a.norm_sqr())
                    .sum()
            })
            .collect()
    }

    /// Max amplitude magnitude on truncation-boundary states (pair only).
    pub fn boundary_population(&self, state: &StateVector) -> Option<f64> {
        match &self.ctx {
            ObservableCtx::Om { boundary_mask, .. } => Some(
                boundary_mask
                    .iter()
                    .zip(state.amps())
                    .filter(|(m, _)| **m)
                    .map(|(_, a)| a.norm())
                    .fold(0.0f64, f64::max),
            ),
            _ => None,
        }
    }

    fn record(&self, step: u64, state: &StateVector) -> Result<Record> {
        let t = step as f64 * self.dt;
        Ok(Record {
            step,
            t,
            norm: state.norm(),
            energy: self.energy(state, t)?,
            occupations: self.occupations(state),
            boundary_pop: self.boundary_population(state),
        })
    }

    /// Evolve `state` in place for `n_steps`, emitting one record at t = 0
    /// and one per `sample_every` steps (the final step is always sampled);
    /// `on_sample` sees each record with the state at that instant.
    pub fn evolve_with<F>(
        &self,
        state: &mut StateVector,
        n_steps: u64,
        sample_every: u64,
        mut on_sample: F,
    ) -> Result<Vec<Record>>
    where
        F: FnMut(&Record, &StateVector),
    {
        if sample_every == 0 {
            return Err(Error::InvalidParam("sample_every must be >= 1".into()));
        }
        let mut records = Vec::new();
        let r0 = self.record(0, state)?;
        on_sample(&r0, state);
        records.push(r0);
        for s in 1..=n_steps {
            self.step(state, (s - 1) as f64 * self.dt)?;
            if s % sample_every == 0 || s == n_steps {
                let r = self.record(s, state)?;
                on_sample(&r, state);
                records.push(r);
            }
        }
        Ok(records)
    }

    /// [`Self::evolve_with`] without a sampling callback.
    pub fn evolve(
        &self,
        state: &mut StateVector,
        n_steps: u64,
        sample_every: u64,
    ) -> Result<Vec<Record>> {
        self.evolve_with(state, n_steps, sample_every, |_, _| {})
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn island(k: usize, n: u64, mu: f64, u: f64, j: f64, boundary: Boundary) -> BhParams {
        BhParams::new(k, boundary, mu, u, j, BhBasis::Island { n_total: n }).unwrap()
    }

    #[test]
    fn descending_plan_matches_factor_string() {
        // operator string e^{tau H12} S e^{tau H12} S e^{tau H12} S reads
        // right to left in application order: [S, exp] three times
        let plan = plan_bh(
            &island(3, 2, 0.0, 1.0, 1.0, Boundary::Periodic),
            StepOrder::FirstDescending,
            0.01,
        )
        .unwrap();
        let expect: Vec<StepSummary> = (0..3)
            .flat_map(|_| {
                [
                    StepSummary::Permute { shift: 1 },
                    StepSummary::Exp {
                        tau_frac: 1.0,
                        label: ExpLabel::BhPair,
                    },
                ]
            })
            .collect();
        assert_eq!(plan.summary(), expect);
    }

    #[test]
    fn second_order_plan_is_palindromic() {
        for boundary in [Boundary::Periodic, Boundary::Open] {
            let k = 3;
            let plan = plan_bh(
                &island(k, 2, 0.0, 1.0, 1.0, boundary),
                StepOrder::Second,
                0.01,
            )
            .unwrap();
            let steps = plan.summary();
            let mut mirrored: Vec<StepSummary> = steps
                .iter()
                .map(|s| match s {
                    StepSummary::Permute { shift } => StepSummary::Permute {
                        shift: (k as u32 - shift) % k as u32,
                    },
                    other => other.clone(),
                })
                .collect();
            mirrored.reverse();
            assert_eq!(steps, mirrored);
        }
    }

    #[test]
    fn open_second_order_structure() {
        // (e^{tau/2 H12} S)^3 e^{tau d1} (S^T e^{tau/2 H12})^3 for K = 4
        let k = 4;
        let plan = plan_bh(
            &island(k, 2, 0.1, 1.0, 1.0, Boundary::Open),
            StepOrder::Second,
            0.01,
        )
        .unwrap();
        let mut expect = Vec::new();
        for _ in 0..k - 1 {
            expect.push(StepSummary::Exp {
                tau_frac: 0.5,
                label: ExpLabel::BhPair,
            });
            expect.push(StepSummary::Permute {
                shift: k as u32 - 1,
            });
        }
        expect.push(StepSummary::Exp {
            tau_frac: 1.0,
            label: ExpLabel::BhDiag,
        });
        for _ in 0..k - 1 {
            expect.push(StepSummary::Permute { shift: 1 });
            expect.push(StepSummary::Exp {
                tau_frac: 0.5,
                label: ExpLabel::BhPair,
            });
        }
        assert_eq!(plan.summary(), expect);
    }

    #[test]
    fn tau_fractions_sum_to_one_per_term() {
        for boundary in [Boundary::Periodic, Boundary::Open] {
            for order in [
                StepOrder::FirstAscending,
                StepOrder::FirstDescending,
                StepOrder::Second,
            ] {
                let k = 4u32;
                let plan = plan_bh(
                    &island(4, 2, 0.1, 1.0, 1.0, boundary),
                    order,
                    0.01,
                )
                .unwrap();
                let mut frame = 0u32;
                let mut per_term: std::collections::HashMap<(u32, ExpLabel), f64> =
                    std::collections::HashMap::new();
                for s in plan.summary() {
                    match s {
                        StepSummary::Permute { shift } => frame = (frame + shift) % k,
                        StepSummary::Exp { tau_frac, label } => {
                            *per_term.entry((frame, label)).or_insert(0.0) += tau_frac;
                        }
                    }
                }
                assert_eq!(frame, 0, "frame returns home");
                let expected_terms = match boundary {
                    Boundary::Periodic => k as usize,
                    Boundary::Open => k as usize,
                };
                assert_eq!(per_term.len(), expected_terms);
                for (_, total) in per_term {
                    assert_eq!(total, 1.0);
                }
            }
        }
    }

    #[test]
    fn zero_hamiltonian_is_exact_identity() {
        let plan = plan_bh(
            &island(3, 2, 0.0, 0.0, 0.0, Boundary::Periodic),
            StepOrder::Second,
            0.05,
        )
        .unwrap();
        let mut state = StateVector::uniform(plan.dim()).unwrap();
        let before = state.amps().to_vec();
        for s in 0..50 {
            plan.step(&mut state, s as f64 * 0.05).unwrap();
        }
        assert_eq!(state.amps(), &before[..]);
    }

    #[test]
    fn step_requires_home_frame_and_dimension() {
        let plan = plan_bh(
            &island(3, 1, 0.0, 1.0, 1.0, Boundary::Periodic),
            StepOrder::Second,
            0.01,
        )
        .unwrap();
        let mut wrong_dim = StateVector::uniform(5).unwrap();
        assert!(matches!(
            plan.step(&mut wrong_dim, 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
        let s = island_shuffle(1, 3).unwrap();
        let rotated = crate::shuffle::apply_perm(&s, &StateVector::uniform(3).unwrap()).unwrap();
        let mut rotated = rotated;
        assert!(matches!(
            plan.step(&mut rotated, 0.0),
            Err(Error::FrameMismatch { .. })
        ));
    }

    #[test]
    fn plans_refuse_site_dependence_and_capped_basis() {
        let p = island(3, 2, 0.1, 1.0, 1.0, Boundary::Periodic)
            .with_site_couplings(crate::hamiltonian::SiteCouplings {
                mu: vec![0.1, 0.2, 0.1],
                u: vec![1.0; 3],
                j: vec![1.0; 3],
            })
            .unwrap();
        assert!(matches!(
            plan_bh(&p, StepOrder::Second, 0.01),
            Err(Error::UnsupportedConfig(_))
        ));
        let capped = BhParams::new(
            2,
            Boundary::Periodic,
            0.0,
            1.0,
            1.0,
            BhBasis::Capped { caps: vec![2, 2] },
        )
        .unwrap();
        assert!(matches!(
            plan_bh(&capped, StepOrder::Second, 0.01),
            Err(Error::UnsupportedConfig(_))
        ));
    }

    #[test]
    fn evolve_zero_steps_single_record() {
        let plan = plan_bh(
            &island(3, 2, 0.0, 1.0, 1.0, Boundary::Periodic),
            StepOrder::Second,
            0.01,
        )
        .unwrap();
        let mut state = StateVector::fock(plan.dim(), 0).unwrap();
        let records = plan.evolve(&mut state, 0, 1).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].step, 0);
        assert_eq!(records[0].t, 0.0);
        assert!((records[0].norm - 1.0).abs() < 1e-15);
    }

    #[test]
    fn occupations_sum_to_total() {
        let plan = plan_bh(
            &island(3, 4, 0.2, 1.0, 1.0, Boundary::Periodic),
            StepOrder::Second,
            0.01,
        )
        .unwrap();
        let mut state = StateVector::uniform(plan.dim()).unwrap();
        let records = plan.evolve(&mut state, 20, 5).unwrap();
        for r in &records {
            let total: f64 = r.occupations.iter().sum();
            assert!((total - 4.0).abs() < 1e-12, "sum {} at step {}", total, r.step);
        }
    }

    #[test]
    fn om_first_order_structure() {
        let p = OmParams {
            na: 2,
            nb: 2,
            drive: Drive::Constant(0.4),
        };
        let plan = plan_om(&p, StepOrder::FirstAscending, 0.01).unwrap();
        assert_eq!(
            plan.summary(),
            vec![
                StepSummary::Exp {
                    tau_frac: 1.0,
                    label: ExpLabel::OmInt
                },
                StepSummary::Permute { shift: 1 },
                StepSummary::Exp {
                    tau_frac: 1.0,
                    label: ExpLabel::OmDrive
                },
                StepSummary::Permute { shift: 1 },
            ]
        );
    }

    #[test]
    fn om_number_conserved_without_drive() {
        let p = OmParams {
            na: 5,
            nb: 5,
            drive: Drive::Constant(0.0),
        };
        let plan = plan_om(&p, StepOrder::Second, 0.02).unwrap();
        // start in an n_a eigenstate tensor a spread over b
        let db = 6;
        let mut amps = vec![C64::new(0.0, 0.0); plan.dim()];
        for nb in 0..db {
            amps[2 * db + nb] = C64::new(1.0 / (db as f64).sqrt(), 0.0);
        }
        let mut state = StateVector::new(amps).unwrap();
        let records = plan.evolve(&mut state, 200, 50).unwrap();
        for r in &records {
            assert!((r.occupations[0] - 2.0).abs() < 1e-12);
        }
    }
}
