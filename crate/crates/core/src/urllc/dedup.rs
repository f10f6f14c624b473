/// Entries remembered by a [`DuplicateEliminator`].
pub const DEDUP_WINDOW: u16 = 1024;

const WORDS: usize = DEDUP_WINDOW as usize / 64;

/// Sliding-window duplicate filter over 16-bit sequence numbers with
/// serial-number (wraparound) comparison.
///
/// A sequence number older than the window is treated as stale and
/// rejected, so replicated streams must stay within 1024 numbers of each
/// other.
#[derive(Debug, Clone)]
pub struct DuplicateEliminator {
    highest: Option<u16>,
    seen: [u64; WORDS],
    passed: u64,
    eliminated: u64,
}

impl Default for DuplicateEliminator {
    fn default() -> Self {
        Self::new()
    }
}

impl DuplicateEliminator {
    pub fn new() -> Self {
        DuplicateEliminator {
            highest: None,
            seen: [0; WORDS],
            passed: 0,
            eliminated: 0,
        }
    }

    fn bit(seq: u16) -> (usize, u64) {
        let slot = (seq % DEDUP_WINDOW) as usize;
        (slot / 64, 1u64 << (slot % 64))
    }

    fn is_set(&self, seq: u16) -> bool {
        let (w, m) = Self::bit(seq);
        self.seen[w] & m != 0
    }

    fn set(&mut self, seq: u16) {
        let (w, m) = Self::bit(seq);
        self.seen[w] |= m;
    }

    fn clear(&mut self, seq: u16) {
        let (w, m) = Self::bit(seq);
        self.seen[w] &= !m;
    }

    /// Returns true for the first arrival of `seq`, false for a copy.
    pub fn accept(&mut self, seq: u16) -> bool {
        let fresh = match self.highest {
            None => {
                self.highest = Some(seq);
                self.set(seq);
                true
            }
            Some(high) => {
                let diff = seq.wrapping_sub(high) as i16;
                if diff > 0 {
                    if diff as u16 >= DEDUP_WINDOW {
                        self.seen = [0; WORDS];
                    } else {
                        for k in 1..=diff as u16 {
                            self.clear(high.wrapping_add(k));
                        }
                    }
                    self.highest = Some(seq);
                    self.set(seq);
                    true
                } else if diff.unsigned_abs() >= DEDUP_WINDOW || self.is_set(seq) {
                    false
                } else {
                    self.set(seq);
                    true
                }
            }
        };
        if fresh {
            self.passed += 1;
        } else {
            self.eliminated += 1;
        }
        fresh
    }

    pub fn passed(&self) -> u64 {
        self.passed
    }

    pub fn eliminated(&self) -> u64 {
        self.eliminated
    }
}

/// Keeps the first arrival of each sequence number, in arrival order.
pub fn eliminate_duplicates<P>(stream: impl IntoIterator<Item = (u16, P)>) -> Vec<(u16, P)> {
    let mut filter = DuplicateEliminator::new();
    stream
        .into_iter()
        .filter(|(seq, _)| filter.accept(*seq))
        .collect()
}
