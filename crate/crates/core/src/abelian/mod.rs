//! Partitions, finite abelian groups, and the counting formulas attached to
//! them.
//!
//! An abelian `p`-group is recorded by its type: the partition `λ` with
//! cyclic factors `Z/p^{λ_i}`.  A general finite abelian group is a
//! [`GroupSpec`], one partition per prime.  Everything here is exact: counts
//! are `BigUint`s, and each closed-form count has an exhaustive enumeration
//! oracle in [`oracle`] for cross-checking on small groups.

mod counts;
mod partition;
mod table;

pub mod oracle;

pub use counts::{
    aut_order, gaussian_binomial, hom_count, moment_value, nsub_bound_check, pairing_count,
    subgroup_count_of_type, sum_wedge2_over_subgroups, sur_count, sur_count_p, wedge2_order,
};

pub(crate) use counts::sum_wedge2_transposed;
pub(crate) use partition::is_prime;
pub use partition::{GroupSpec, ParseError, Partition};
pub use table::{enumerate_subgroups, subgroup_type_from_generators, SmallGroupTable};

use alloc::string::String;
use core::fmt;

/// Errors from group-theoretic operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AbelianError {
    /// An exhaustive enumeration would exceed the configured work bound.
    OracleBoundExceeded { detail: String },
    /// An argument was rejected (non-prime modulus, malformed generator, ...).
    InvalidArgument { detail: String },
}

impl fmt::Display for AbelianError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbelianError::OracleBoundExceeded { detail } => {
                write!(f, "oracle bound exceeded: {detail}")
            }
            AbelianError::InvalidArgument { detail } => write!(f, "invalid argument: {detail}"),
        }
    }
}

impl core::error::Error for AbelianError {}

/// Default ceiling on group order for exhaustive enumeration oracles.
///
/// Exhaustive hom/aut enumeration costs `|G|^rank`; keeping `p^{|λ|}` at or
/// below this keeps every oracle call sub-second.
pub const DEFAULT_ORACLE_BOUND: u64 = 4096;
