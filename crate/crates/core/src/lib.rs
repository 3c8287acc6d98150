// negated comparisons are how NaN gets rejected along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod baselines;
pub mod cli;
pub mod composite;
pub mod dual_md;
pub mod error;
pub mod fw_solver;
pub mod instances;
pub mod linmap;
pub mod oracle;
pub mod verify;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/barriers.md")]
    mod barriers {}
    #[doc = include_str!("../../../book/src/problems.md")]
    mod problems {}
    #[doc = include_str!("../../../book/src/frank_wolfe.md")]
    mod frank_wolfe {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/duality.md")]
    mod duality {}
    #[doc = include_str!("../../../book/src/instances.md")]
    mod instances {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
