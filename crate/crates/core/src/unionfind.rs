//! Small disjoint-set union with path compression.

#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Union by size; returns false if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Canonical class ids in 0..num_classes, ordered by smallest member;
    /// returns (class_of, class_members).
    pub fn classes(&mut self) -> (Vec<usize>, Vec<Vec<usize>>) {
        let n = self.len();
        let mut first_member = vec![usize::MAX; n];
        let mut order: Vec<usize> = Vec::new();
        for x in 0..n {
            let root = self.find(x);
            if first_member[root] == usize::MAX {
                first_member[root] = order.len();
                order.push(root);
            }
        }
        let mut class_of = vec![0; n];
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); order.len()];
        for x in 0..n {
            let c = first_member[self.find(x)];
            class_of[x] = c;
            members[c].push(x);
        }
        (class_of, members)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn union_and_classes() {
        let mut uf = UnionFind::new(6);
        assert!(uf.union(0, 3));
        assert!(uf.union(3, 5));
        assert!(!uf.union(0, 5));
        assert!(uf.union(1, 2));
        let (class_of, members) = uf.classes();
        assert_eq!(members.len(), 3);
        assert_eq!(class_of[0], class_of[3]);
        assert_eq!(class_of[0], class_of[5]);
        assert_eq!(class_of[1], class_of[2]);
        assert_ne!(class_of[0], class_of[4]);
        // Classes ordered by smallest member.
        assert_eq!(members[0], vec![0, 3, 5]);
        assert_eq!(members[1], vec![1, 2]);
        assert_eq!(members[2], vec![4]);
    }
}
