//! Equivalence transformations of generalized potential Burgers equations
//! `v_t + v_x^2 + f(t,x) v_xx = 0` and the related classes
//! `u_t + 2 u u_x + (f u_x)_x = 0` and `u_t + u u_x + f u_xx = 0`.
//!
//! Every closed-form claim is checked numerically on second-order jets:
//! transformations carry exact first and second partial derivatives
//! (forward-mode dual numbers over symbolic trees), so true identities
//! produce residuals at rounding level.

// `!(x <= tol)` is deliberate throughout: a NaN must fail a check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// `Expr` combinators take `self` by value like the operator traits, but
// are named methods so chains read left to right.
#![allow(clippy::should_implement_trait)]

pub mod analysis;
pub mod classes;
pub mod cli;
pub mod dual;
pub mod expr;
pub mod groupoid;
pub mod maps;
pub mod report;
pub mod transforms;
