//! Small bitset types for file and user sets.
//!
//! Frames and cells in this simulator are bounded by 64 files / 64 users,
//! which keeps every set operation a single word op.

pub const MAX_ELEMS: usize = 64;

macro_rules! bitset_type {
    ($name:ident, $doc:literal) => {
        #[doc = $doc]
        #[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
        pub struct $name(pub u64);

        impl $name {
            pub const EMPTY: Self = Self(0);

            pub fn singleton(i: usize) -> Self {
                debug_assert!(i < MAX_ELEMS);
                Self(1u64 << i)
            }

            pub fn full(n: usize) -> Self {
                debug_assert!(n <= MAX_ELEMS);
                if n == 64 {
                    Self(u64::MAX)
                } else {
                    Self((1u64 << n) - 1)
                }
            }

            pub fn contains(self, i: usize) -> bool {
                self.0 >> i & 1 == 1
            }

            pub fn insert(&mut self, i: usize) {
                self.0 |= 1u64 << i;
            }

            pub fn remove(&mut self, i: usize) {
                self.0 &= !(1u64 << i);
            }

            pub fn len(self) -> usize {
                self.0.count_ones() as usize
            }

            pub fn is_empty(self) -> bool {
                self.0 == 0
            }

            pub fn union(self, other: Self) -> Self {
                Self(self.0 | other.0)
            }

            pub fn intersect(self, other: Self) -> Self {
                Self(self.0 & other.0)
            }

            pub fn minus(self, other: Self) -> Self {
                Self(self.0 & !other.0)
            }

            pub fn is_subset_of(self, other: Self) -> bool {
                self.0 & !other.0 == 0
            }

            pub fn is_disjoint(self, other: Self) -> bool {
                self.0 & other.0 == 0
            }

            /// Index of the single element; panics unless `len() == 1`.
            pub fn only(self) -> usize {
                assert_eq!(self.len(), 1, "set is not a singleton");
                self.0.trailing_zeros() as usize
            }

            pub fn iter(self) -> BitIter {
                BitIter(self.0)
            }
        }

        impl FromIterator<usize> for $name {
            fn from_iter<I: IntoIterator<Item = usize>>(it: I) -> Self {
                let mut s = Self::EMPTY;
                for i in it {
                    s.insert(i);
                }
                s
            }
        }

        impl std::fmt::Debug for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.debug_set().entries(self.iter()).finish()
            }
        }
    };
}

bitset_type!(FileSet, "A set of file indices within the frame.");
bitset_type!(UserSet, "A set of user indices within the cell.");

/// Ascending iterator over set bits.
pub struct BitIter(u64);

impl Iterator for BitIter {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            let i = self.0.trailing_zeros() as usize;
            self.0 &= self.0 - 1;
            Some(i)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_ops() {
        let mut s = FileSet::EMPTY;
        s.insert(3);
        s.insert(0);
        assert!(s.contains(0) && s.contains(3) && !s.contains(1));
        assert_eq!(s.len(), 2);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 3]);
        s.remove(0);
        assert_eq!(s.only(), 3);
        assert!(FileSet::full(4).is_subset_of(FileSet::full(5)));
        assert!(FileSet::singleton(2).is_disjoint(FileSet::singleton(3)));
    }
}
