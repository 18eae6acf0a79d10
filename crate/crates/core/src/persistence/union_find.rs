/// Disjoint-set forest that remembers, for every root, the oldest member of
/// its component. "Oldest" is the smallest `(t, index)` key, which is what
/// the elder rule needs.
#[derive(Clone, Debug)]
pub(crate) struct ElderForest {
    parent: Vec<u32>,
    rank: Vec<u8>,
    oldest: Vec<u32>,
}

impl ElderForest {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
            oldest: (0..n as u32).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut node: u32) -> u32 {
        // path halving
        while self.parent[node as usize] != node {
            let grand = self.parent[self.parent[node as usize] as usize];
            self.parent[node as usize] = grand;
            node = grand;
        }
        node
    }

    pub(crate) fn oldest(&self, root: u32) -> u32 {
        self.oldest[root as usize]
    }

    /// Unites two distinct roots and records `elder` as the oldest member.
    pub(crate) fn union_roots(&mut self, a: u32, b: u32, elder: u32) -> u32 {
        debug_assert_ne!(a, b);
        let (ra, rb) = (self.rank[a as usize], self.rank[b as usize]);
        let (root, child) = if ra < rb { (b, a) } else { (a, b) };
        self.parent[child as usize] = root;
        if ra == rb {
            self.rank[root as usize] = ra.saturating_add(1);
        }
        self.oldest[root as usize] = elder;
        root
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracks_components_and_elders() {
        let mut f = ElderForest::new(5);
        let r = f.union_roots(0, 1, 1);
        assert_eq!(f.find(0), f.find(1));
        assert_eq!(f.oldest(r), 1);
        let r2 = f.find(3);
        let r0 = f.find(0);
        let r = f.union_roots(r0, r2, 3);
        assert_eq!(f.find(1), f.find(3));
        assert_eq!(f.oldest(r), 3);
        assert_ne!(f.find(2), f.find(4));
    }
}
