// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

use std::fmt;
use std::ops::{Add, AddAssign};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

/// Compute resources as (vcpu cores, memory GiB, storage GiB).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ResourceVector {
    pub vcpu: u64,
    pub mem_gb: u64,
    pub storage_gb: u64,
}

impl ResourceVector {
    pub const ZERO: ResourceVector = ResourceVector { vcpu: 0, mem_gb: 0, storage_gb: 0 };

    pub const fn new(vcpu: u64, mem_gb: u64, storage_gb: u64) -> Self {
        ResourceVector { vcpu, mem_gb, storage_gb }
    }

    pub(crate) fn from_array(a: [u64; 3]) -> Self {
        ResourceVector::new(a[0], a[1], a[2])
    }

    pub(crate) fn to_array(self) -> [u64; 3] {
        [self.vcpu, self.mem_gb, self.storage_gb]
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }

    /// True when every component is ≤ the matching component of `other`.
    pub fn fits_within(&self, other: &ResourceVector) -> bool {
        self.vcpu <= other.vcpu && self.mem_gb <= other.mem_gb && self.storage_gb <= other.storage_gb
    }

    pub fn checked_sub(&self, other: &ResourceVector) -> Option<ResourceVector> {
        Some(ResourceVector::new(
            self.vcpu.checked_sub(other.vcpu)?,
            self.mem_gb.checked_sub(other.mem_gb)?,
            self.storage_gb.checked_sub(other.storage_gb)?,
        ))
    }

    pub fn saturating_sub(&self, other: &ResourceVector) -> ResourceVector {
        ResourceVector::new(
            self.vcpu.saturating_sub(other.vcpu),
            self.mem_gb.saturating_sub(other.mem_gb),
            self.storage_gb.saturating_sub(other.storage_gb),
        )
    }

    pub fn scale(&self, n: u64) -> ResourceVector {
        ResourceVector::new(self.vcpu * n, self.mem_gb * n, self.storage_gb * n)
    }

    pub fn component_min(&self, other: &ResourceVector) -> ResourceVector {
        ResourceVector::new(
            self.vcpu.min(other.vcpu),
            self.mem_gb.min(other.mem_gb),
            self.storage_gb.min(other.storage_gb),
        )
    }

    /// Weighted sum, `weights` given as a vector of per-unit weights.
    pub fn dot(&self, weights: &ResourceVector) -> u64 {
        self.vcpu * weights.vcpu + self.mem_gb * weights.mem_gb + self.storage_gb * weights.storage_gb
    }

    /// Lexicographic cost key: vcpu, then memory, then storage.
    pub fn cost_key(&self) -> (u64, u64, u64) {
        (self.vcpu, self.mem_gb, self.storage_gb)
    }
}

impl Add for ResourceVector {
    type Output = ResourceVector;

    fn add(self, rhs: ResourceVector) -> ResourceVector {
        ResourceVector::new(self.vcpu + rhs.vcpu, self.mem_gb + rhs.mem_gb, self.storage_gb + rhs.storage_gb)
    }
}

impl AddAssign for ResourceVector {
    fn add_assign(&mut self, rhs: ResourceVector) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for ResourceVector {
    fn sum<I: Iterator<Item = ResourceVector>>(iter: I) -> Self {
        iter.fold(ResourceVector::ZERO, Add::add)
    }
}

impl fmt::Display for ResourceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.vcpu, self.mem_gb, self.storage_gb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        let a = ResourceVector::new(8, 32, 100);
        let b = ResourceVector::new(2, 4, 10);
        assert_eq!(a.checked_sub(&b), Some(ResourceVector::new(6, 28, 90)));
        assert_eq!(b.checked_sub(&a), None);
        assert_eq!(b.scale(3), ResourceVector::new(6, 12, 30));
        assert!(b.fits_within(&a));
        assert!(!a.fits_within(&b));
        assert_eq!(b.dot(&ResourceVector::new(1, 1, 1)), 16);
    }
}
