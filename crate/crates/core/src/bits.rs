//! 64-bit masks over sites and bonds.

use serde::{Deserialize, Serialize};
use std::fmt;

macro_rules! mask_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl $name {
            pub const EMPTY: Self = Self(0);

            /// The first `n` indices.
            pub fn full(n: usize) -> Self {
                debug_assert!(n <= 64);
                if n == 64 { Self(u64::MAX) } else { Self((1u64 << n) - 1) }
            }

            #[inline]
            pub fn singleton(i: usize) -> Self {
                Self(1u64 << i)
            }

            #[inline]
            pub fn contains(self, i: usize) -> bool {
                (self.0 >> i) & 1 == 1
            }

            #[inline]
            pub fn with(self, i: usize) -> Self {
                Self(self.0 | (1u64 << i))
            }

            #[inline]
            pub fn without(self, i: usize) -> Self {
                Self(self.0 & !(1u64 << i))
            }

            #[inline]
            pub fn toggle(self, i: usize) -> Self {
                Self(self.0 ^ (1u64 << i))
            }

            #[inline]
            pub fn union(self, o: Self) -> Self {
                Self(self.0 | o.0)
            }

            #[inline]
            pub fn intersect(self, o: Self) -> Self {
                Self(self.0 & o.0)
            }

            #[inline]
            pub fn minus(self, o: Self) -> Self {
                Self(self.0 & !o.0)
            }

            #[inline]
            pub fn sym_diff(self, o: Self) -> Self {
                Self(self.0 ^ o.0)
            }

            /// Complement relative to the first `n` indices.
            #[inline]
            pub fn complement(self, n: usize) -> Self {
                Self::full(n).minus(self)
            }

            #[inline]
            pub fn is_empty(self) -> bool {
                self.0 == 0
            }

            #[inline]
            pub fn len(self) -> usize {
                self.0.count_ones() as usize
            }

            #[inline]
            pub fn is_subset(self, o: Self) -> bool {
                self.0 & !o.0 == 0
            }

            pub fn iter(self) -> impl Iterator<Item = usize> {
                let mut rest = self.0;
                std::iter::from_fn(move || {
                    if rest == 0 {
                        None
                    } else {
                        let i = rest.trailing_zeros() as usize;
                        rest &= rest - 1;
                        Some(i)
                    }
                })
            }

            pub fn from_indices<I: IntoIterator<Item = usize>>(it: I) -> Self {
                it.into_iter().fold(Self::EMPTY, |m, i| m.with(i))
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.debug_set().entries(self.iter()).finish()
            }
        }
    };
}

mask_type!(
    /// A set of sites, bit `i` standing for site `i`.
    SiteSet
);
mask_type!(
    /// A set of bonds, bit `b` standing for bond `b` of the graph.
    BondSet
);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_set_algebra() {
        let a = SiteSet::from_indices([0, 2, 5]);
        assert_eq!(a.len(), 3);
        assert!(a.contains(2) && !a.contains(1));
        assert_eq!(a.complement(6), SiteSet::from_indices([1, 3, 4]));
        assert_eq!(a.iter().collect::<Vec<_>>(), vec![0, 2, 5]);
        assert_eq!(SiteSet::full(64).len(), 64);
        assert_eq!(format!("{:?}", a), "{0, 2, 5}");
    }
}
