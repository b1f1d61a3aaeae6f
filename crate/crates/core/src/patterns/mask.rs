/// Fixed-length row set stored as a bitset.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    words: Vec<u64>,
    len: usize,
}

impl Mask {
    pub fn empty(len: usize) -> Self {
        Mask {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut m = Mask {
            words: vec![u64::MAX; len.div_ceil(64)],
            len,
        };
        m.clear_tail();
        m
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut m = Mask::empty(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                m.set(i);
            }
        }
        m
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn and(&self, other: &Mask) -> Mask {
        let mut m = self.clone();
        m.and_assign(other);
        m
    }

    pub fn and_assign(&mut self, other: &Mask) {
        assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    /// Rows in `self` but not in `other`.
    pub fn and_not(&self, other: &Mask) -> Mask {
        assert_eq!(self.len, other.len);
        Mask {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & !b).collect(),
            len: self.len,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let t = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + t)
            })
        })
    }

    pub fn indices(&self) -> Vec<usize> {
        self.iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_algebra() {
        let a = Mask::from_bools(&[true, false, true, true]);
        let b = Mask::from_bools(&[true, true, false, true]);
        assert_eq!(a.and(&b).indices(), vec![0, 3]);
        assert_eq!(a.and_not(&b).indices(), vec![2]);
        let f = Mask::full(130);
        assert_eq!(f.count(), 130);
        assert_eq!(f.iter().last(), Some(129));
    }
}
