//! Compiles the guide's code blocks (and the README's) as doc-tests, one module per chapter so a
//! failure names its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}
#[doc = include_str!("../../../book/src/problems.md")]
mod problems {}
#[doc = include_str!("../../../book/src/deterministic.md")]
mod deterministic {}
#[doc = include_str!("../../../book/src/stochastic.md")]
mod stochastic {}
#[doc = include_str!("../../../book/src/baselines.md")]
mod baselines {}
#[doc = include_str!("../../../book/src/datasets.md")]
mod datasets {}
#[doc = include_str!("../../../book/src/experiments.md")]
mod experiments {}
#[doc = include_str!("../../../book/src/plotting.md")]
mod plotting {}
#[doc = include_str!("../../../README.md")]
mod readme {}
