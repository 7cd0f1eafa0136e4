use thiserror::Error;

use crate::eigen::EigenError;
use crate::fcidump::FcidumpError;
use crate::fermion::FermionError;
use crate::harness::HarnessError;
use crate::multiprog::PlanError;
use crate::sampler::SamplerError;
use crate::sqd::SqdError;

/// Any error the library can produce, with a process exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Fcidump(#[from] FcidumpError),
    #[error(transparent)]
    Fermion(#[from] FermionError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Sqd(#[from] SqdError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{0}")]
    Input(String),
}

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_PLAN: i32 = 4;

fn eigen_code(e: &EigenError) -> i32 {
    match e {
        EigenError::Convergence { .. } => EXIT_CONVERGENCE,
        _ => EXIT_INPUT,
    }
}

fn sampler_code(e: &SamplerError) -> i32 {
    match e {
        SamplerError::Plan(_) => EXIT_PLAN,
        _ => EXIT_INPUT,
    }
}

fn sqd_code(e: &SqdError) -> i32 {
    match e {
        SqdError::Eigen(e) => eigen_code(e),
        SqdError::Sampler(e) => sampler_code(e),
        _ => EXIT_INPUT,
    }
}

impl Error {
    /// 2 for input errors, 3 for solver non-convergence, 4 for placement and plan errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Eigen(e) => eigen_code(e),
            Error::Sampler(e) => sampler_code(e),
            Error::Sqd(e) => sqd_code(e),
            Error::Plan(_) => EXIT_PLAN,
            Error::Harness(h) => match h {
                HarnessError::Plan(_) => EXIT_PLAN,
                HarnessError::Sampler(e) => sampler_code(e),
                HarnessError::Sqd(e) => sqd_code(e),
                HarnessError::Eigen(e) => eigen_code(e),
                _ => EXIT_INPUT,
            },
            Error::Fcidump(_) | Error::Fermion(_) | Error::Input(_) => EXIT_INPUT,
        }
    }
}
