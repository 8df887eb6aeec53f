/// Two monotone arrays of shared bits, `a0` and `a1`, indexed from 1.
///
/// Index 0 is virtual: it always reads 1 and is never stored. Writes only
/// ever set a bit to 1, so register contents are monotone over any
/// execution. Storage grows on demand (amortized doubling via `Vec`); in
/// bounded mode a capacity is enforced and touching any index above it
/// panics, because the space-bounded variant is supposed to make that
/// impossible.
#[derive(Debug, Clone)]
pub struct RegisterFile {
    arr: [Vec<bool>; 2],
    capacity: Option<u32>,
    max_touched: u32,
}

impl RegisterFile {
    pub fn unbounded() -> Self {
        RegisterFile {
            arr: [Vec::new(), Vec::new()],
            capacity: None,
            max_touched: 0,
        }
    }

    /// A register file that refuses any access above index `r_max`.
    pub fn bounded(r_max: u32) -> Self {
        RegisterFile {
            arr: [Vec::new(), Vec::new()],
            capacity: Some(r_max),
            max_touched: 0,
        }
    }

    fn check_capacity(&self, index: u32) {
        if let Some(cap) = self.capacity {
            assert!(
                index <= cap,
                "register index {index} exceeds bounded capacity {cap}"
            );
        }
    }

    /// Read `a_side[index]`. Index 0 always reads 1.
    pub fn read(&mut self, side: bool, index: u32) -> bool {
        self.check_capacity(index);
        if index > self.max_touched {
            self.max_touched = index;
        }
        if index == 0 {
            return true;
        }
        self.peek(side, index)
    }

    /// Set `a_side[index]` to 1. The protocol never writes index 0.
    pub fn write_one(&mut self, side: bool, index: u32) {
        assert!(index > 0, "virtual slot 0 is read-only");
        self.check_capacity(index);
        if index > self.max_touched {
            self.max_touched = index;
        }
        let a = &mut self.arr[side as usize];
        if (index as usize) > a.len() {
            a.resize(index as usize, false);
        }
        a[index as usize - 1] = true;
    }

    /// Current value without touch tracking (for invariant checks).
    pub fn peek(&self, side: bool, index: u32) -> bool {
        if index == 0 {
            return true;
        }
        self.arr[side as usize]
            .get(index as usize - 1)
            .copied()
            .unwrap_or(false)
    }

    /// Stored bits of one array, indexes 1..=len. Writes only append 1s at
    /// the top, so the length equals the highest index ever written.
    pub fn bits(&self, side: bool) -> &[bool] {
        &self.arr[side as usize]
    }

    /// Highest index set in `a_side` (0 if none).
    pub fn highest_set(&self, side: bool) -> u32 {
        self.arr[side as usize]
            .iter()
            .rposition(|&b| b)
            .map(|i| i as u32 + 1)
            .unwrap_or(0)
    }

    /// Highest index touched by any read or write so far.
    pub fn max_index_touched(&self) -> u32 {
        self.max_touched
    }
}
