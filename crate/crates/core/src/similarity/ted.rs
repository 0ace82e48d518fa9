//! Zhang–Shasha ordered tree edit distance with unit costs.
//!
//! Runs in O(n1 * n2 * min(depth1, leaves1) * min(depth2, leaves2)) time and
//! O(n1 * n2) space. Insert, delete and relabel all cost 1; relabelling is
//! allowed between any two labels.

use crate::equation::{EquationTree, Leaf, Operator, SlotId};

/// Labelled ordered tree of arbitrary arity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OrderedTree<L> {
    pub label: L,
    pub children: Vec<OrderedTree<L>>,
}

impl<L> OrderedTree<L> {
    pub fn leaf(label: L) -> Self {
        OrderedTree {
            label,
            children: Vec::new(),
        }
    }

    pub fn new(label: L, children: Vec<OrderedTree<L>>) -> Self {
        OrderedTree { label, children }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Self::size).sum::<usize>()
    }
}

/// Node label of an equation tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeLabel {
    Op(Operator),
    Slot(SlotId),
    /// Constant, compared by bit pattern.
    Const(u64),
    Pi,
    Ans,
}

impl From<&EquationTree> for OrderedTree<NodeLabel> {
    fn from(tree: &EquationTree) -> Self {
        match tree {
            EquationTree::Leaf(leaf) => OrderedTree::leaf(match leaf {
                Leaf::Slot(s) => NodeLabel::Slot(*s),
                Leaf::Const(v) => NodeLabel::Const(v.to_bits()),
                Leaf::Pi => NodeLabel::Pi,
                Leaf::Ans => NodeLabel::Ans,
            }),
            EquationTree::Node { op, left, right } => OrderedTree::new(
                NodeLabel::Op(*op),
                vec![OrderedTree::from(&**left), OrderedTree::from(&**right)],
            ),
        }
    }
}

/// Postorder labels, leftmost-leaf indices and keyroots of a tree.
/// Build once and reuse when one tree is compared against many.
#[derive(Debug, Clone)]
pub struct PostorderTree<L> {
    labels: Vec<L>,
    leftmost: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<L: Clone> PostorderTree<L> {
    pub fn new(root: &OrderedTree<L>) -> Self {
        let mut labels = Vec::new();
        let mut leftmost = Vec::new();
        Self::walk(root, &mut labels, &mut leftmost);

        // a keyroot is the highest postorder index among nodes sharing a
        // leftmost leaf
        let mut last_with_leftmost = vec![usize::MAX; labels.len()];
        for (i, &l) in leftmost.iter().enumerate() {
            last_with_leftmost[l] = i;
        }
        let mut keyroots: Vec<usize> = last_with_leftmost
            .into_iter()
            .filter(|&i| i != usize::MAX)
            .collect();
        keyroots.sort_unstable();
        PostorderTree {
            labels,
            leftmost,
            keyroots,
        }
    }

    fn walk(node: &OrderedTree<L>, labels: &mut Vec<L>, leftmost: &mut Vec<usize>) -> usize {
        let mut first_leaf = None;
        for child in &node.children {
            let c = Self::walk(child, labels, leftmost);
            first_leaf.get_or_insert(leftmost[c]);
        }
        let idx = labels.len();
        labels.push(node.label.clone());
        leftmost.push(first_leaf.unwrap_or(idx));
        idx
    }
}

impl<L> PostorderTree<L> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Reusable buffers for [`distance_with`].
#[derive(Debug, Default, Clone)]
pub struct TedScratch {
    tree: Vec<u32>,
    forest: Vec<u32>,
}

/// Edit distance between two preprocessed trees.
pub fn distance_with<L: PartialEq>(
    a: &PostorderTree<L>,
    b: &PostorderTree<L>,
    scratch: &mut TedScratch,
) -> u32 {
    let (n1, n2) = (a.len(), b.len());
    if n1 == 0 || n2 == 0 {
        return (n1 + n2) as u32;
    }
    scratch.tree.clear();
    scratch.tree.resize(n1 * n2, 0);
    let stride = n2 + 1;
    scratch.forest.clear();
    scratch.forest.resize((n1 + 1) * stride, 0);
    let td = &mut scratch.tree;
    let fd = &mut scratch.forest;

    for &i in &a.keyroots {
        for &j in &b.keyroots {
            let li = a.leftmost[i];
            let lj = b.leftmost[j];
            let rows = i - li + 2;
            let cols = j - lj + 2;
            fd[0] = 0;
            for x in 1..rows {
                fd[x * stride] = fd[(x - 1) * stride] + 1;
            }
            for y in 1..cols {
                fd[y] = fd[y - 1] + 1;
            }
            for x in 1..rows {
                let i1 = li + x - 1;
                let i1_whole = a.leftmost[i1] == li;
                for y in 1..cols {
                    let j1 = lj + y - 1;
                    let delete = fd[(x - 1) * stride + y] + 1;
                    let insert = fd[x * stride + y - 1] + 1;
                    let value = if i1_whole && b.leftmost[j1] == lj {
                        let relabel = u32::from(a.labels[i1] != b.labels[j1]);
                        let v = delete.min(insert).min(fd[(x - 1) * stride + y - 1] + relabel);
                        td[i1 * n2 + j1] = v;
                        v
                    } else {
                        let p = a.leftmost[i1] - li;
                        let q = b.leftmost[j1] - lj;
                        delete.min(insert).min(fd[p * stride + q] + td[i1 * n2 + j1])
                    };
                    fd[x * stride + y] = value;
                }
            }
        }
    }
    td[(n1 - 1) * n2 + (n2 - 1)]
}

/// Edit distance between two ordered trees.
pub fn ordered_tree_distance<L: PartialEq + Clone>(a: &OrderedTree<L>, b: &OrderedTree<L>) -> u32 {
    distance_with(
        &PostorderTree::new(a),
        &PostorderTree::new(b),
        &mut TedScratch::default(),
    )
}

/// Tree edit distance between two equation ASTs.
pub fn tree_edit_distance(a: &EquationTree, b: &EquationTree) -> u32 {
    ordered_tree_distance(&OrderedTree::from(a), &OrderedTree::from(b))
}

/// `1 - TED / (|E1| + |E2|)` with `|E|` the AST node count.
pub fn equation_similarity(a: &EquationTree, b: &EquationTree) -> f64 {
    similarity_from_distance(tree_edit_distance(a, b), a.size(), b.size())
}

pub(crate) fn similarity_from_distance(ted: u32, size_a: usize, size_b: usize) -> f64 {
    1.0 - f64::from(ted) / (size_a + size_b) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::parse_equation;

    fn eq(s: &str) -> EquationTree {
        parse_equation(s).unwrap()
    }

    fn t(label: &'static str, children: Vec<OrderedTree<&'static str>>) -> OrderedTree<&'static str> {
        OrderedTree::new(label, children)
    }

    fn l(label: &'static str) -> OrderedTree<&'static str> {
        OrderedTree::leaf(label)
    }

    #[test]
    fn identical_trees_have_zero_distance() {
        let e = eq("(n1+n2)*n3-n4/n5");
        assert_eq!(tree_edit_distance(&e, &e), 0);
        assert_eq!(equation_similarity(&e, &e), 1.0);
    }

    #[test]
    fn single_relabel() {
        assert_eq!(tree_edit_distance(&eq("n1+n2"), &eq("n1*n2")), 1);
        assert!((equation_similarity(&eq("n1+n2"), &eq("n1*n2")) - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn nested_insertion() {
        assert_eq!(tree_edit_distance(&eq("n1+n2"), &eq("(n1+n2)+n3")), 2);
        assert!((equation_similarity(&eq("n1+n2"), &eq("(n1+n2)+n3")) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn textbook_example() {
        // f(d(a, c(b)), e) vs f(c(d(a, b)), e): distance 2
        let a = t("f", vec![t("d", vec![l("a"), t("c", vec![l("b")])]), l("e")]);
        let b = t("f", vec![t("c", vec![t("d", vec![l("a"), l("b")])]), l("e")]);
        assert_eq!(ordered_tree_distance(&a, &b), 2);
    }

    #[test]
    fn disjoint_labels_bounded_by_sizes() {
        let a = eq("n1+n2");
        let b = eq("n3*(n4-n5)");
        let d = tree_edit_distance(&a, &b) as usize;
        assert!(d <= a.size() + b.size());
        // all labels differ: n1 + n2 - |largest mapping| = 8 - 3
        assert_eq!(d, 5);
    }

    #[test]
    fn keyroots_of_binary_tree() {
        let p = PostorderTree::new(&OrderedTree::from(&eq("(n1+n2)*n3")));
        // postorder: n1 n2 + n3 * ; keyroots: n2(1), n3(3), *(4)
        assert_eq!(p.keyroots, vec![1, 3, 4]);
        assert_eq!(p.leftmost, vec![0, 1, 0, 3, 0]);
    }
}
