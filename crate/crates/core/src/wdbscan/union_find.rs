/// Disjoint sets over voxel indices where every root is the smallest index
/// of its set, so component representatives do not depend on union order.
pub(crate) struct MinRootSets {
    parent: Vec<u32>,
}

impl MinRootSets {
    pub(crate) fn new(n: usize) -> Self {
        MinRootSets { parent: (0..n as u32).collect() }
    }

    #[inline]
    pub(crate) fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    #[inline]
    pub(crate) fn union(&mut self, a: u32, b: u32) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra < rb {
            self.parent[rb as usize] = ra;
        } else if rb < ra {
            self.parent[ra as usize] = rb;
        }
    }

    /// Points every member of `members` straight at its root. Members must be
    /// visited in ascending order, which holds because parents never exceed
    /// their children.
    pub(crate) fn flatten(&mut self, members: impl Iterator<Item = usize>) {
        for p in members {
            let up = self.parent[p] as usize;
            self.parent[p] = self.parent[up];
        }
    }

    pub(crate) fn into_parents(self) -> Vec<u32> {
        self.parent
    }
}
