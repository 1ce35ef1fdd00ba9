use std::collections::HashMap;

use crate::machine::Cell;

/// Cells held by braids, per cycle.
#[derive(Clone, Debug)]
pub struct BraidTable {
    words: usize,
    busy: HashMap<u64, Vec<u64>>,
}

impl BraidTable {
    pub fn new(cells: u32) -> Self {
        BraidTable { words: (cells as usize).div_ceil(64), busy: HashMap::new() }
    }

    /// Whether every cell of `route` is free in cycles `[start, start + len)`.
    pub fn is_free(&self, start: u64, len: u64, route: &[Cell]) -> bool {
        (start..start + len).all(|t| match self.busy.get(&t) {
            None => true,
            Some(bits) => route.iter().all(|&c| bits[c as usize / 64] & (1 << (c % 64)) == 0),
        })
    }

    pub fn occupy(&mut self, start: u64, len: u64, route: &[Cell]) {
        for t in start..start + len {
            let bits = self.busy.entry(t).or_insert_with(|| vec![0; self.words]);
            for &c in route {
                bits[c as usize / 64] |= 1 << (c % 64);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occupancy_is_per_cycle() {
        let mut t = BraidTable::new(100);
        t.occupy(3, 1, &[5, 70]);
        assert!(!t.is_free(3, 1, &[70]));
        assert!(t.is_free(4, 1, &[70]));
        assert!(t.is_free(3, 1, &[6, 71]));
        assert!(!t.is_free(2, 2, &[5]));
    }
}
