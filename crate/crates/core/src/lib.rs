pub mod conjectures;
pub mod coxeter;
pub mod dihedral;
pub mod error;
pub mod hecke;
pub mod kl;
pub mod laurent;
pub mod quotient;
pub mod strata;

pub use coxeter::{CoxeterSystem, Element, Family, Gen, Order};
pub use error::{Error, Result};
pub use hecke::{Basis, HeckeElement};
pub use kl::{AValueRecord, KlTable};
pub use laurent::{Coeff, Degree, LaurentPoly};
pub use quotient::QuotientContext;
pub use strata::{DistinguishedElement, Stratification};

/// Arbitrary-precision coefficient ring used throughout.
pub type Int = num_bigint::BigInt;
/// Laurent polynomials over [`Int`].
pub type Poly = LaurentPoly<Int>;
