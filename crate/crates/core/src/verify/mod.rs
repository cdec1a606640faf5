//! Numerical checks of the limit statements, each returning a typed report.

pub mod dobrow;
pub mod equivalence;
pub mod lemmas;
pub mod residual;
pub mod scgf;
pub mod stats;
pub mod tails;

pub use dobrow::{dobrow_gof, DobrowReport};
pub use equivalence::{equivalence_ks, EquivalenceReport};
pub use lemmas::{lemma_sum_check, LemmaRow, LemmaSum, TestFunction};
pub use residual::{residual_check, ResidualReport, ResidualRow};
pub use scgf::{scgf_slope_check, ScgfReport, ScgfRow};
pub use tails::{tail_exponent_estimate, TailReport, TailRow};
