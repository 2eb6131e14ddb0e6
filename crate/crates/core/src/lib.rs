//! Single-qubit quantum channels in affine Bloch-ball form.
//!
//! A channel acts on Bloch vectors as `r ↦ M r + t`. The crate covers
//! construction and composition ([`channel`]), the signed singular value
//! normal form ([`canonical`]), complete-positivity checks through the Choi
//! spectrum and the closed-form Fujiwara–Algoet inequalities ([`cp`]),
//! geometric classification ([`geometry`]) and constructive factorization
//! into small-step universal sets ([`decompose`]).
#![allow(clippy::needless_range_loop)]

pub mod canonical;
pub mod channel;
pub mod cp;
pub mod decompose;
pub mod error;
pub mod geometry;
pub mod json;
pub mod par;
pub mod rotation;
pub mod sample;

pub use canonical::{normalize_extremal_signs, signed_svd, to_canonical, AxisOrdering, CanonicalChannel};
pub use channel::{
    apply, bloch_from_density, compose, density_from_bloch, make_generator, AffineChannel, BlochVector, ChannelKind,
    DensityMatrix, GeneratorSpec,
};
pub use cp::{
    choi, choi_rotated, fac_unital, gfa_general, is_cp, kraus_decomposition, verify, CPReport, ChoiMatrix, Verdict,
};
pub use decompose::{
    decompose, decompose_edge, decompose_extremal, decompose_unital, recompose, DecompositionPlan, PlanKind,
};
pub use error::{Error, Result};
pub use geometry::{
    extremal_class, extremal_test, is_indivisible, kraus_rank, pancake_margin, po_unitality_check, pure_outputs,
    pure_outputs_oracle, ExtremalClass, PureOutputClass,
};
pub use sample::{sample_batch, sample_channel, sample_channel_seeded, sample_extremal};

/// Default tolerances.
pub mod tol {
    /// Physicality and CP verdict band.
    pub const PHYSICAL: f64 = 1e-10;
    /// Algebraic identities.
    pub const ALGEBRAIC: f64 = 1e-12;
    /// Bloch-ball membership of states.
    pub const BLOCH_NORM: f64 = 1e-12;
    /// Choi eigenvalues above this count toward the Kraus rank.
    pub const RANK: f64 = 1e-9;
    /// A maximizer is a pure output if its image has norm at least `1 - CONTACT`.
    pub const CONTACT: f64 = 1e-9;
    /// Angular slack for antipodal pure outputs.
    pub const ANTIPODAL: f64 = 1e-8;
    /// Extremal identities and angle comparisons.
    pub const EXTREMAL: f64 = 1e-9;
    /// Output points closer than this are the same pure output.
    pub const PO_CLUSTER: f64 = 1e-4;
}
