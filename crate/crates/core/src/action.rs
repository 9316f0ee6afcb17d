//! Actions as facility subsets, encoded as bitmasks.
//!
//! An action is a set of `k` facilities out of `F`. Facilities are indexed
//! `0..F` and an action stores one bit per facility, which keeps comparisons,
//! hashing, and trace serialization unambiguous (the mask is written as a
//! decimal integer in artifacts).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of facilities supported by the bitmask encoding.
pub const MAX_FACILITIES: usize = 64;

/// A subset of facilities. Bit `f` set means facility `f` is in the action.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Action(pub u64);

impl Action {
    /// Build an action from facility indices. Duplicates collapse into one bit.
    pub fn from_facilities(facilities: &[usize]) -> Self {
        let mut mask = 0u64;
        for &f in facilities {
            debug_assert!(f < MAX_FACILITIES);
            mask |= 1 << f;
        }
        Action(mask)
    }

    pub fn contains(&self, facility: usize) -> bool {
        facility < MAX_FACILITIES && self.0 & (1 << facility) != 0
    }

    /// Number of facilities in the action.
    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    /// Facility indices in ascending order.
    pub fn facilities(&self) -> impl Iterator<Item = usize> + '_ {
        let mask = self.0;
        (0..MAX_FACILITIES).filter(move |f| mask & (1 << f) != 0)
    }

    pub fn bitmask(&self) -> u64 {
        self.0
    }

    /// Validate the action against a facility count and subset size.
    pub fn validate(&self, facility_count: usize, k: usize, path: &str) -> Result<()> {
        if facility_count < MAX_FACILITIES && self.0 >> facility_count != 0 {
            return Err(Error::validation(
                path,
                format!("facility index out of range [0, {facility_count})"),
            ));
        }
        if self.len() != k {
            return Err(Error::validation(
                path,
                format!("expected {k} distinct facilities, got {}", self.len()),
            ));
        }
        Ok(())
    }
}

impl std::fmt::Debug for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let facs: Vec<usize> = self.facilities().collect();
        write!(f, "Action{facs:?}")
    }
}

/// Binomial coefficient C(n, k) without overflow for the scales we enumerate.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc * (n - j) as u128 / (j + 1) as u128;
    }
    acc
}

/// All k-subsets of `0..facility_count`, in lexicographic order of the
/// ascending facility tuple. The order is part of the determinism contract.
pub fn enumerate_k_subsets(facility_count: usize, k: usize) -> Vec<Action> {
    assert!(k <= facility_count && facility_count <= MAX_FACILITIES);
    let mut out = Vec::with_capacity(binomial(facility_count, k) as usize);
    if k == 0 {
        out.push(Action(0));
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(Action::from_facilities(&idx));
        // advance to the next combination
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + facility_count - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
