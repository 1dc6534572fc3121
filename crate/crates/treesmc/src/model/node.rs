use std::fmt;

/// Which child of an internal node a point or node lies on. Points
/// with feature value at or below the cut location go left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

/// Address of a node as the left/right path from the root. Ordering is
/// lexicographic on the bit string, which is the tie-break order used
/// when several nodes are equally old or equally scored.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NodeId {
    bits: Vec<u8>,
}

impl NodeId {
    pub fn root() -> Self {
        NodeId::default()
    }

    pub fn child(&self, side: Side) -> Self {
        let mut bits = self.bits.clone();
        bits.push(match side {
            Side::Left => 0,
            Side::Right => 1,
        });
        NodeId { bits }
    }

    pub fn parent(&self) -> Option<Self> {
        if self.bits.is_empty() {
            return None;
        }
        Some(NodeId {
            bits: self.bits[..self.bits.len() - 1].to_vec(),
        })
    }

    pub fn depth(&self) -> u32 {
        self.bits.len() as u32
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub(crate) fn from_bits(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        NodeId { bits }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bits.is_empty() {
            return write!(f, "root");
        }
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_construction() {
        let root = NodeId::root();
        assert_eq!(root.depth(), 0);
        assert_eq!(root.parent(), None);
        let right_left = root.child(Side::Right).child(Side::Left);
        assert_eq!(right_left.depth(), 2);
        assert_eq!(right_left.bits(), &[1, 0]);
        assert_eq!(right_left.to_string(), "10");
        assert_eq!(right_left.parent().unwrap(), root.child(Side::Right));
    }

    #[test]
    fn ordering_is_lexicographic_on_bits() {
        let root = NodeId::root();
        let zero = root.child(Side::Left);
        let one = root.child(Side::Right);
        let zero_zero = zero.child(Side::Left);
        let zero_one = zero.child(Side::Right);
        // root < 0 < 00 < 01 < 1
        let mut v = vec![one.clone(), zero_one.clone(), root.clone(), zero_zero.clone(), zero.clone()];
        v.sort();
        assert_eq!(v, vec![root, zero, zero_zero, zero_one, one]);
    }
}
