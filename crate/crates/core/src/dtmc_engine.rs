//! Three-state absorbing chain: no fire detected (N), verifying (V) and
//! detected (D).
//!
//! The chain is time-inhomogeneous: step `k` uses the detection and
//! false-alarm probabilities of the fire radius at `k`. `D` is absorbing, so
//! `π_D[k]` is the probability of detection by step `k`.

use std::io::{self, Write};

use serde::Serialize;

use crate::detection_model::{step_probabilities, QuadratureSpec, StepProbabilities};
use crate::error::{Error, Result};
use crate::report::fmt12;
use crate::scalar::Scalar;
use crate::scenario::Scenario;

/// Tolerance of the per-step bookkeeping checks in double precision.
pub const RHO_TOLERANCE: f64 = 1e-10;
/// Simplex drift above which the state vector is renormalized.
pub const DRIFT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateVector<S> {
    pub p_no_fire: S,
    pub p_verify: S,
    pub p_detected: S,
}

impl<S: Scalar> StateVector<S> {
    /// Start in the no-fire state.
    pub fn initial() -> Self {
        Self {
            p_no_fire: S::one(),
            p_verify: S::zero(),
            p_detected: S::zero(),
        }
    }

    pub fn sum(&self) -> S {
        self.p_no_fire + self.p_verify + self.p_detected
    }

    pub fn as_array(&self) -> [S; 3] {
        [self.p_no_fire, self.p_verify, self.p_detected]
    }
}

/// Nonzero entries of one step's transition matrix
///
/// ```text
///        N      V      D
/// N  [ P_NN   P_NV    0   ]
/// V  [ P_VN   P_VV   P_VD ]
/// D  [  0      0      1   ]
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTransition<S> {
    pub p_nn: S,
    pub p_nv: S,
    pub p_vn: S,
    pub p_vv: S,
    pub p_vd: S,
}

impl<S: Scalar> StepTransition<S> {
    pub fn identity() -> Self {
        Self {
            p_nn: S::one(),
            p_nv: S::zero(),
            p_vn: S::zero(),
            p_vv: S::one(),
            p_vd: S::zero(),
        }
    }

    /// Largest deviation of a row sum from one.
    pub fn row_error(&self) -> S {
        let one = S::one();
        ((self.p_nn + self.p_nv) - one).abs().max((self.p_vn + self.p_vv + self.p_vd - one).abs())
    }
}

/// Transition matrix from the step probabilities and the ratio of step to
/// mean verification time.
///
/// A verification lasts a geometric number of steps with continuation
/// probability `1 - T/T_vrf` and ends in D or back in N in proportion to
/// `p_d : p_fa`. If both are zero the chain stays in V.
pub fn build_transition<S: Scalar>(probs: &StepProbabilities<S>, step_min: S, verify_min: S) -> Result<StepTransition<S>> {
    if !(verify_min >= step_min) {
        return Err(Error::domain(format!(
            "verification time {verify_min} min is shorter than the step {step_min} min"
        )));
    }
    let alarm = probs.p_d + probs.p_fa;
    if alarm > S::one() + S::of(1e-12) {
        return Err(Error::Numerical(format!("p_d + p_fa = {alarm} exceeds 1 at step {}", probs.k)));
    }
    let alarm = alarm.min(S::one());
    let p_vv = S::one() - step_min / verify_min;
    let (p_vn, p_vd, p_vv) = if alarm > S::zero() {
        let leave = S::one() - p_vv;
        (leave * probs.p_fa / alarm, leave * probs.p_d / alarm, p_vv)
    } else {
        (S::zero(), S::zero(), S::one())
    };
    Ok(StepTransition {
        p_nn: S::one() - alarm,
        p_nv: alarm,
        p_vn,
        p_vv,
        p_vd,
    })
}

/// One step of the chain together with the simplex drift before any
/// correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evolved<S> {
    pub state: StateVector<S>,
    pub drift: S,
    pub renormalized: bool,
}

/// `π[k] = π[k-1] P[k]`, renormalizing when the components drift from the
/// simplex by more than [`DRIFT_TOLERANCE`].
pub fn evolve<S: Scalar>(state: &StateVector<S>, t: &StepTransition<S>) -> Evolved<S> {
    let next = StateVector {
        p_no_fire: state.p_no_fire * t.p_nn + state.p_verify * t.p_vn,
        p_verify: state.p_no_fire * t.p_nv + state.p_verify * t.p_vv,
        p_detected: state.p_detected + state.p_verify * t.p_vd,
    };
    let total = next.sum();
    let drift = (total - S::one()).abs();
    if drift > S::of(DRIFT_TOLERANCE) {
        Evolved {
            state: StateVector {
                p_no_fire: next.p_no_fire / total,
                p_verify: next.p_verify / total,
                p_detected: next.p_detected / total,
            },
            drift,
            renormalized: true,
        }
    } else {
        Evolved {
            state: next,
            drift,
            renormalized: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRecord<S> {
    pub k: usize,
    pub t_min: f64,
    pub p_int: S,
    pub p_fa: S,
    pub p_d: S,
    pub pi_d: S,
    pub rho_d: S,
    pub state: StateVector<S>,
}

/// Detection trajectory for `k = 1..=K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionCurve<S> {
    pub records: Vec<CurveRecord<S>>,
    pub step_min: f64,
    /// Largest gap between `π_D[k] - π_D[k-1]` and `π_V[k-1] P_VD[k]`.
    pub max_rho_discrepancy: S,
    /// Largest simplex drift seen before correction.
    pub max_drift: S,
    pub renormalizations: usize,
}

impl<S: Scalar> DetectionCurve<S> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `π_D` at the last step, zero for an empty curve.
    pub fn final_pi_d(&self) -> S {
        self.records.last().map_or(S::zero(), |r| r.pi_d)
    }

    /// `π_D[k]` for `1 ≤ k ≤ len`.
    pub fn pi_d(&self, k: usize) -> Option<S> {
        k.checked_sub(1).and_then(|i| self.records.get(i)).map(|r| r.pi_d)
    }

    pub fn rho_sum(&self) -> S {
        self.records.iter().map(|r| r.rho_d).sum()
    }

    pub fn pi_d_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.pi_d.as_f64()).collect()
    }

    /// CSV with header `k,t_min,p_int,p_fa,p_d,pi_D,rho_D` after a schema
    /// comment line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# schema: pyrewatch-curve/1")?;
        writeln!(w, "k,t_min,p_int,p_fa,p_d,pi_D,rho_D")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.k,
                fmt12(r.t_min),
                fmt12(r.p_int.as_f64()),
                fmt12(r.p_fa.as_f64()),
                fmt12(r.p_d.as_f64()),
                fmt12(r.pi_d.as_f64()),
                fmt12(r.rho_d.as_f64()),
            )?;
        }
        Ok(())
    }
}

/// Runs the chain over precomputed step probabilities (`steps[i]` is step
/// `i + 1`).
///
/// Per-step detection mass is computed both as the increment of `π_D` and
/// as `π_V[k-1] P_VD[k]`; a disagreement beyond the tolerance is a
/// numerical error.
pub fn curve_from_steps<S: Scalar>(steps: &[StepProbabilities<S>], step_min: f64, verify_min: f64) -> Result<DetectionCurve<S>> {
    let tol = S::of(RHO_TOLERANCE).max(S::epsilon() * S::of(64.0));
    let mut state = StateVector::initial();
    let mut records = Vec::with_capacity(steps.len());
    let mut max_rho_discrepancy = S::zero();
    let mut max_drift = S::zero();
    let mut renormalizations = 0;
    for (i, probs) in steps.iter().enumerate() {
        let t = build_transition(probs, S::of(step_min), S::of(verify_min))?;
        if t.row_error() > S::of(DRIFT_TOLERANCE).max(S::epsilon() * S::of(4.0)) {
            return Err(Error::Numerical(format!("transition rows at step {} are not stochastic", probs.k)));
        }
        let evolved = evolve(&state, &t);
        let diff = evolved.state.p_detected - state.p_detected;
        let flow = state.p_verify * t.p_vd;
        let gap = (diff - flow).abs();
        if !(gap <= tol) {
            return Err(Error::Numerical(format!(
                "detection increment {diff} disagrees with verification outflow {flow} at step {}",
                probs.k
            )));
        }
        max_rho_discrepancy = max_rho_discrepancy.max(gap);
        max_drift = max_drift.max(evolved.drift);
        if evolved.renormalized {
            renormalizations += 1;
            log::debug!("renormalized state at step {} (drift {})", probs.k, evolved.drift);
        }
        state = evolved.state;
        records.push(CurveRecord {
            k: i + 1,
            t_min: step_min * (i + 1) as f64,
            p_int: probs.p_int,
            p_fa: probs.p_fa,
            p_d: probs.p_d,
            pi_d: state.p_detected,
            rho_d: diff,
            state,
        });
    }
    Ok(DetectionCurve {
        records,
        step_min,
        max_rho_discrepancy,
        max_drift,
        renormalizations,
    })
}

/// Detection curve over `steps` steps, evaluating every step from scratch.
pub fn detection_curve_over<S: Scalar>(scenario: &Scenario, quad: QuadratureSpec, steps: usize) -> Result<DetectionCurve<S>> {
    let probs = (1..=steps)
        .map(|k| step_probabilities::<S>(scenario, k, quad))
        .collect::<Result<Vec<_>>>()?;
    curve_from_steps(&probs, scenario.step_min(), scenario.params().verify_time_min)
}

/// Detection curve for `k = 1..=K` with `K = ⌊T_f / T⌋`.
pub fn detection_curve<S: Scalar>(scenario: &Scenario, quad: QuadratureSpec) -> Result<DetectionCurve<S>> {
    detection_curve_over(scenario, quad, scenario.critical_steps())
}
