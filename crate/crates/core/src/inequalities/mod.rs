//! Named Bell expressions with detection efficiency and their critical
//! efficiencies.

mod chsh;
mod collins_gisin;
mod projected;

use std::fmt;
use std::str::FromStr;

pub use chsh::{chsh_eta_value, chsh_probability_value, chsh_symmetric_critical, ChshEtaTerms, CHSH_LOCAL_BOUND};
pub use collins_gisin::{
    cg3_eta_critical, cg3_local_maximum, eval_cg3, optimal_rotation, rotated_ghz_behavior, rotated_ghz_quantum_terms,
    CgTerms, CgThreePartyExpression, RotatedGhzTerms,
};
pub use projected::{
    conditional_schmidt_ratio, eta_grid, eval_ic, eval_ic_behavior, ic_critical_search, ic_functional,
    ic_local_maximum, ic_maximize, ic_maximize_from, IcOptimum, IcSearchOptions, IcSettings, IC_LOCAL_BOUND, IC_VIOLATION_MARGIN,
};

use crate::error::Error;

/// Expressions addressable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NamedExpression {
    ChshEta,
    Ic,
    Iabc1,
    Iabc2,
    MerminCg,
}

impl NamedExpression {
    pub const ALL: [NamedExpression; 5] = [Self::ChshEta, Self::Ic, Self::Iabc1, Self::Iabc2, Self::MerminCg];

    /// The three-party Collins-Gisin form, where there is one.
    pub fn cg3(self) -> Option<CgThreePartyExpression> {
        match self {
            Self::Iabc1 => Some(CgThreePartyExpression::iabc1()),
            Self::Iabc2 => Some(CgThreePartyExpression::iabc2()),
            Self::MerminCg => Some(CgThreePartyExpression::mermin_cg()),
            _ => None,
        }
    }
}

impl fmt::Display for NamedExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ChshEta => "chsh-eta",
            Self::Ic => "ic",
            Self::Iabc1 => "iabc1",
            Self::Iabc2 => "iabc2",
            Self::MerminCg => "mermin-cg",
        })
    }
}

impl FromStr for NamedExpression {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|e| e.to_string() == s)
            .ok_or_else(|| Error::config("--name", format!("unknown expression {s:?} (chsh-eta, ic, iabc1, iabc2, mermin-cg)")))
    }
}
