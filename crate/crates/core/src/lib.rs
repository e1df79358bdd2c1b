//! Stability certification and simulation for monotone nonlinear systems.
//!
//! The crate is `no_std` (with `alloc`). It contains the expression language
//! used to describe systems, adaptive ODE/DDE integrators, cooperativity
//! checks, the linear Metzler toolkit, max-separable Lyapunov machinery,
//! path and `w`-vector certificates, delay-robustness verification, and the
//! homogeneity corollaries. File formats and the command-line front end live
//! in the `monostab` crate.

#![no_std]
#![deny(unsafe_code)]
// NaN must fail every `!(x < bound)` check; index loops mirror the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

extern crate alloc;

pub mod certificates;
pub mod delay;
pub mod expr;
pub mod homogeneity;
pub mod integrate;
pub mod interp;
pub mod linear;
pub mod lyapunov;
pub mod model;
pub mod monotone;
pub mod seeding;

pub use expr::{parse, Env, Expr, ExprSystem, Var, VariableRoles};
pub use integrate::{IntegratorConfig, Trajectory};
pub use model::{
    BoxSet, DelayAssignment, DelayField, DelayLaw, DelayMap, ExprDelayMap, ExprField,
    InitialHistory, PathCandidate, ScalingPsi, VectorField,
};

/// Pass/fail verdict shared by the check reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    pub fn from_bool(ok: bool) -> Status {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Status::Pass
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
        }
    }
}

pub(crate) fn max_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(num_traits::Float::abs(*v)))
}
