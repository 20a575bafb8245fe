//! Append-only Merkle trees over field elements.
//!
//! Nodes combine with the modified hash h*: `h*(0, 0) = 0`, otherwise the
//! tagged field hash. Zero therefore stands for "empty subtree" at every
//! level, and an empty tree has root 0. A [`Frontier`] is the minimal
//! right-spine state needed to keep appending and recomputing roots — it is
//! what fraud-proof replays carry on chain.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::crypto::{hash, TAG_TREE_NODE};
use crate::field::FieldElement;
use crate::params::Params;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MerkleError {
    TreeFull,
    OutOfRange,
    MalformedFrontier,
    /// Trees resumed from a frontier track roots, not historical leaves.
    ProofUnavailable,
}

impl fmt::Display for MerkleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            MerkleError::TreeFull => "tree is at capacity",
            MerkleError::OutOfRange => "leaf index out of range",
            MerkleError::MalformedFrontier => "frontier bytes are inconsistent",
            MerkleError::ProofUnavailable => "tree was resumed from a frontier; no leaf data",
        };
        f.write_str(msg)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MerkleError {}

/// h*(l, r): zero absorbs zero, everything else hashes under the tree tag.
pub fn hstar(params: &Params, l: &FieldElement, r: &FieldElement) -> FieldElement {
    if l.is_zero() && r.is_zero() {
        FieldElement::ZERO
    } else {
        hash(params, &[TAG_TREE_NODE, *l, *r])
    }
}

/// Root recomputation walk shared with the input circuit: `dir[i]` true
/// means the running node is the left child at level i.
pub fn walk(
    params: &Params,
    leaf: &FieldElement,
    dir: &[bool],
    path: &[FieldElement],
) -> FieldElement {
    debug_assert_eq!(dir.len(), path.len());
    let mut acc = *leaf;
    for (d, sibling) in dir.iter().zip(path.iter()) {
        acc = if *d {
            hstar(params, &acc, sibling)
        } else {
            hstar(params, sibling, &acc)
        };
    }
    acc
}

/// Resumable append state: `filled[i]` is the root of the completed left
/// subtree at level i, meaningful exactly when bit i of `leaf_count` is set
/// (bit `depth` marks a full tree).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Frontier {
    depth: u32,
    leaf_count: u64,
    filled: Vec<FieldElement>,
}

impl Frontier {
    pub fn empty(depth: u32) -> Frontier {
        Frontier {
            depth,
            leaf_count: 0,
            filled: vec![FieldElement::ZERO; depth as usize + 1],
        }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn leaf_count(&self) -> u64 {
        self.leaf_count
    }

    pub fn capacity(&self) -> u64 {
        1u64 << self.depth
    }

    pub fn append(&mut self, params: &Params, leaf: &FieldElement) -> Result<u64, MerkleError> {
        if self.leaf_count == self.capacity() {
            return Err(MerkleError::TreeFull);
        }
        let index = self.leaf_count;
        let mut cur = *leaf;
        let mut pos = index;
        let mut level = 0usize;
        loop {
            if pos & 1 == 0 {
                self.filled[level] = cur;
                break;
            }
            cur = hstar(params, &self.filled[level], &cur);
            self.filled[level] = FieldElement::ZERO;
            pos >>= 1;
            level += 1;
        }
        self.leaf_count += 1;
        Ok(index)
    }

    pub fn root(&self, params: &Params) -> FieldElement {
        if self.leaf_count == self.capacity() {
            return self.filled[self.depth as usize];
        }
        let mut acc = FieldElement::ZERO;
        let mut pos = self.leaf_count;
        for level in 0..self.depth as usize {
            acc = if pos & 1 == 1 {
                hstar(params, &self.filled[level], &acc)
            } else {
                hstar(params, &acc, &FieldElement::ZERO)
            };
            pos >>= 1;
        }
        acc
    }

    /// Canonical bytes: leaf_count (u64 BE) then one 32-byte node per set
    /// bit of leaf_count, low level first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 32 * self.leaf_count.count_ones() as usize);
        out.extend_from_slice(&self.leaf_count.to_be_bytes());
        for level in 0..=self.depth as usize {
            if self.leaf_count >> level & 1 == 1 {
                out.extend_from_slice(&self.filled[level].to_be_bytes());
            }
        }
        out
    }

    pub fn from_bytes(params: &Params, depth: u32, bytes: &[u8]) -> Result<Frontier, MerkleError> {
        if depth > 32 || bytes.len() < 8 {
            return Err(MerkleError::MalformedFrontier);
        }
        let mut count_buf = [0u8; 8];
        count_buf.copy_from_slice(&bytes[..8]);
        let leaf_count = u64::from_be_bytes(count_buf);
        if leaf_count > 1u64 << depth {
            return Err(MerkleError::MalformedFrontier);
        }
        let nodes = leaf_count.count_ones() as usize;
        if bytes.len() != 8 + 32 * nodes {
            return Err(MerkleError::MalformedFrontier);
        }
        let mut filled = vec![FieldElement::ZERO; depth as usize + 1];
        let mut offset = 8;
        for (level, slot) in filled.iter_mut().enumerate().take(depth as usize + 1) {
            if leaf_count >> level & 1 == 1 {
                let mut buf = [0u8; 32];
                buf.copy_from_slice(&bytes[offset..offset + 32]);
                *slot = FieldElement::from_be_bytes(&buf, &params.prime)
                    .ok_or(MerkleError::MalformedFrontier)?;
                offset += 32;
            }
        }
        Ok(Frontier {
            depth,
            leaf_count,
            filled,
        })
    }

    fn well_formed(&self) -> bool {
        self.depth <= 32
            && self.filled.len() == self.depth as usize + 1
            && self.leaf_count <= self.capacity()
            && self
                .filled
                .iter()
                .enumerate()
                .all(|(level, node)| self.leaf_count >> level & 1 == 1 || node.is_zero())
    }
}

/// Inclusion proof: sibling per level plus the direction bits of the index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InclusionProof {
    pub index: u64,
    /// dir[i] true: the node on the walk is the left child at level i
    /// (bit i of index is 0).
    pub dir: Vec<bool>,
    pub path: Vec<FieldElement>,
}

impl InclusionProof {
    pub fn new(index: u64, depth: u32, path: Vec<FieldElement>) -> InclusionProof {
        let dir = (0..depth).map(|i| index >> i & 1 == 0).collect();
        InclusionProof { index, dir, path }
    }

    /// Canonical bytes: index (u64 BE) then the path nodes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 32 * self.path.len());
        out.extend_from_slice(&self.index.to_be_bytes());
        for node in &self.path {
            out.extend_from_slice(&node.to_be_bytes());
        }
        out
    }

    pub fn from_bytes(params: &Params, depth: u32, bytes: &[u8]) -> Option<InclusionProof> {
        if bytes.len() != 8 + 32 * depth as usize {
            return None;
        }
        let mut count_buf = [0u8; 8];
        count_buf.copy_from_slice(&bytes[..8]);
        let index = u64::from_be_bytes(count_buf);
        let mut path = Vec::with_capacity(depth as usize);
        for i in 0..depth as usize {
            let mut buf = [0u8; 32];
            buf.copy_from_slice(&bytes[8 + 32 * i..8 + 32 * (i + 1)]);
            path.push(FieldElement::from_be_bytes(&buf, &params.prime)?);
        }
        Some(InclusionProof::new(index, depth, path))
    }
}

/// Checks a proof against a root; direction bits must match the index.
pub fn verify(
    params: &Params,
    root: &FieldElement,
    leaf: &FieldElement,
    proof: &InclusionProof,
) -> bool {
    let depth = proof.path.len();
    if proof.dir.len() != depth {
        return false;
    }
    if depth < 64 && proof.index >> depth != 0 {
        return false;
    }
    for (i, d) in proof.dir.iter().enumerate() {
        if *d != (proof.index >> i & 1 == 0) {
            return false;
        }
    }
    walk(params, leaf, &proof.dir, &proof.path) == *root
}

/// Append-only tree with full node storage (for proofs). Trees resumed from
/// a frontier keep appending and producing roots but cannot prove.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AppendOnlyTree {
    frontier: Frontier,
    levels: Option<Vec<Vec<FieldElement>>>,
}

impl AppendOnlyTree {
    pub fn new(depth: u32) -> AppendOnlyTree {
        AppendOnlyTree {
            frontier: Frontier::empty(depth),
            levels: Some(vec![Vec::new(); depth as usize + 1]),
        }
    }

    pub fn resume(frontier: Frontier) -> Result<AppendOnlyTree, MerkleError> {
        if !frontier.well_formed() {
            return Err(MerkleError::MalformedFrontier);
        }
        Ok(AppendOnlyTree {
            frontier,
            levels: None,
        })
    }

    pub fn depth(&self) -> u32 {
        self.frontier.depth
    }

    pub fn leaf_count(&self) -> u64 {
        self.frontier.leaf_count
    }

    pub fn append(&mut self, params: &Params, leaf: &FieldElement) -> Result<u64, MerkleError> {
        let index = self.frontier.append(params, leaf)?;
        if let Some(levels) = &mut self.levels {
            levels[0].push(*leaf);
            for lvl in 1..levels.len() {
                let idx = (index >> lvl) as usize;
                let left = levels[lvl - 1]
                    .get(2 * idx)
                    .copied()
                    .unwrap_or(FieldElement::ZERO);
                let right = levels[lvl - 1]
                    .get(2 * idx + 1)
                    .copied()
                    .unwrap_or(FieldElement::ZERO);
                let node = hstar(params, &left, &right);
                if levels[lvl].len() == idx {
                    levels[lvl].push(node);
                } else {
                    levels[lvl][idx] = node;
                }
            }
        }
        Ok(index)
    }

    pub fn root(&self, params: &Params) -> FieldElement {
        self.frontier.root(params)
    }

    pub fn leaf(&self, index: u64) -> Option<FieldElement> {
        self.levels.as_ref()?.first()?.get(index as usize).copied()
    }

    pub fn prove(&self, index: u64) -> Result<InclusionProof, MerkleError> {
        let levels = self.levels.as_ref().ok_or(MerkleError::ProofUnavailable)?;
        if index >= self.frontier.leaf_count {
            return Err(MerkleError::OutOfRange);
        }
        let depth = self.frontier.depth;
        let mut path = Vec::with_capacity(depth as usize);
        for lvl in 0..depth as usize {
            let sibling = (index >> lvl ^ 1) as usize;
            path.push(
                levels[lvl]
                    .get(sibling)
                    .copied()
                    .unwrap_or(FieldElement::ZERO),
            );
        }
        Ok(InclusionProof::new(index, depth, path))
    }

    pub fn snapshot_frontier(&self) -> Frontier {
        self.frontier.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::random_fe;
    use proptest::prelude::*;
    use rand_core::{RngCore, SeedableRng};

    fn params_with_depth(depth: u32) -> Params {
        Params {
            depth,
            ..Params::default()
        }
    }

    fn rng(seed: u64) -> rand_chacha::ChaCha20Rng {
        rand_chacha::ChaCha20Rng::seed_from_u64(seed)
    }

    /// Independent oracle: recursive root over the zero-padded leaf slice.
    fn naive_root(params: &Params, depth: u32, leaves: &[FieldElement]) -> FieldElement {
        if depth == 0 {
            return leaves.first().copied().unwrap_or(FieldElement::ZERO);
        }
        let half = 1usize << (depth - 1);
        let (l, r) = if leaves.len() <= half {
            (leaves, &[][..])
        } else {
            leaves.split_at(half)
        };
        let left = naive_root(params, depth - 1, l);
        let right = naive_root(params, depth - 1, r);
        hstar(params, &left, &right)
    }

    #[test]
    fn hstar_zero_rules() {
        let p = Params::default();
        assert_eq!(hstar(&p, &FieldElement::ZERO, &FieldElement::ZERO), FieldElement::ZERO);
        let x = p.fe(42);
        assert_ne!(hstar(&p, &FieldElement::ZERO, &x), FieldElement::ZERO);
        assert_ne!(hstar(&p, &x, &FieldElement::ZERO), FieldElement::ZERO);
        assert_ne!(hstar(&p, &FieldElement::ZERO, &x), hstar(&p, &x, &FieldElement::ZERO));
        // Frozen: h*(1, 0) under the tree tag.
        assert_eq!(
            hex::encode(hstar(&p, &p.fe(1), &FieldElement::ZERO).to_be_bytes()),
            "2f1aff2a323e8c163d62f064ccb9ca573582332c829da7076c33df625515ad7e"
        );
    }

    #[test]
    fn empty_tree_root_is_zero() {
        for depth in [1, 4, 8, 32] {
            let p = params_with_depth(depth);
            assert_eq!(AppendOnlyTree::new(depth).root(&p), FieldElement::ZERO);
        }
    }

    #[test]
    fn incremental_matches_naive_recompute() {
        for depth in 3..=6u32 {
            let p = params_with_depth(depth);
            let mut r = rng(depth as u64);
            let mut tree = AppendOnlyTree::new(depth);
            let mut leaves = Vec::new();
            for i in 0..(1u64 << depth) {
                let leaf = random_fe(&p, &mut r);
                assert_eq!(tree.append(&p, &leaf).unwrap(), i);
                leaves.push(leaf);
                assert_eq!(tree.root(&p), naive_root(&p, depth, &leaves), "depth {depth} n {i}");
            }
            assert_eq!(tree.append(&p, &leaves[0]), Err(MerkleError::TreeFull));
        }
    }

    #[test]
    fn proofs_verify_and_mutations_fail() {
        let depth = 5;
        let p = params_with_depth(depth);
        let mut r = rng(99);
        let mut tree = AppendOnlyTree::new(depth);
        let leaves: Vec<FieldElement> = (0..19).map(|_| random_fe(&p, &mut r)).collect();
        for leaf in &leaves {
            tree.append(&p, leaf).unwrap();
        }
        let root = tree.root(&p);
        for (i, leaf) in leaves.iter().enumerate() {
            let proof = tree.prove(i as u64).unwrap();
            assert!(verify(&p, &root, leaf, &proof));
            assert_eq!(tree.leaf(i as u64), Some(*leaf));

            let mut wrong_leaf = *leaf;
            wrong_leaf = wrong_leaf.add_mod(&FieldElement::ONE, &p.prime);
            assert!(!verify(&p, &root, &wrong_leaf, &proof));

            let mut bad_path = proof.clone();
            bad_path.path[2] = bad_path.path[2].add_mod(&FieldElement::ONE, &p.prime);
            assert!(!verify(&p, &root, leaf, &bad_path));

            let mut bad_index = proof.clone();
            bad_index.index ^= 1;
            assert!(!verify(&p, &root, leaf, &bad_index));

            let mut bad_dir = proof.clone();
            bad_dir.dir[0] = !bad_dir.dir[0];
            assert!(!verify(&p, &root, leaf, &bad_dir));
        }
        assert_eq!(tree.prove(19), Err(MerkleError::OutOfRange));

        let bytes = tree.prove(7).unwrap().to_bytes();
        let parsed = InclusionProof::from_bytes(&p, depth, &bytes).unwrap();
        assert_eq!(parsed, tree.prove(7).unwrap());
        assert!(InclusionProof::from_bytes(&p, depth, &bytes[1..]).is_none());
    }

    #[test]
    fn snapshot_resume_appends_identically() {
        let depth = 6;
        let p = params_with_depth(depth);
        let mut r = rng(5);
        let mut direct = AppendOnlyTree::new(depth);
        for _ in 0..23 {
            direct.append(&p, &random_fe(&p, &mut r)).unwrap();
        }
        let frontier = direct.snapshot_frontier();
        let mut resumed = AppendOnlyTree::resume(frontier.clone()).unwrap();
        assert_eq!(resumed.root(&p), direct.root(&p));
        assert_eq!(resumed.prove(0), Err(MerkleError::ProofUnavailable));

        let mut r2 = rng(6);
        for i in 0..17 {
            let leaf = random_fe(&p, &mut r2);
            direct.append(&p, &leaf).unwrap();
            resumed.append(&p, &leaf).unwrap();
            assert_eq!(resumed.root(&p), direct.root(&p), "append {i}");
            assert_eq!(resumed.leaf_count(), direct.leaf_count());
        }

        // Serialized frontier round-trips and resumes to the same roots.
        let bytes = frontier.to_bytes();
        let parsed = Frontier::from_bytes(&p, depth, &bytes).unwrap();
        assert_eq!(parsed, frontier);
    }

    #[test]
    fn malformed_frontiers_rejected() {
        let depth = 4;
        let p = params_with_depth(depth);
        let mut r = rng(8);
        let mut tree = AppendOnlyTree::new(depth);
        for _ in 0..5 {
            tree.append(&p, &random_fe(&p, &mut r)).unwrap();
        }
        let good = tree.snapshot_frontier().to_bytes();
        assert!(Frontier::from_bytes(&p, depth, &good).is_ok());
        // Truncated, padded, and count-inconsistent forms all fail.
        assert_eq!(
            Frontier::from_bytes(&p, depth, &good[..good.len() - 1]),
            Err(MerkleError::MalformedFrontier)
        );
        let mut padded = good.clone();
        padded.extend_from_slice(&[0u8; 32]);
        assert_eq!(
            Frontier::from_bytes(&p, depth, &padded),
            Err(MerkleError::MalformedFrontier)
        );
        let mut overflow = good.clone();
        overflow[..8].copy_from_slice(&(1u64 << 40).to_be_bytes());
        assert_eq!(
            Frontier::from_bytes(&p, depth, &overflow),
            Err(MerkleError::MalformedFrontier)
        );
        // Node value >= P.
        let mut bad_fe = good;
        for b in &mut bad_fe[8..40] {
            *b = 0xFF;
        }
        assert_eq!(
            Frontier::from_bytes(&p, depth, &bad_fe),
            Err(MerkleError::MalformedFrontier)
        );
    }

    #[test]
    fn full_tree_root_via_frontier() {
        let depth = 3;
        let p = params_with_depth(depth);
        let mut r = rng(21);
        let mut frontier = Frontier::empty(depth);
        let mut leaves = Vec::new();
        for _ in 0..8 {
            let leaf = random_fe(&p, &mut r);
            frontier.append(&p, &leaf).unwrap();
            leaves.push(leaf);
        }
        assert_eq!(frontier.root(&p), naive_root(&p, depth, &leaves));
        assert_eq!(frontier.append(&p, &leaves[0]), Err(MerkleError::TreeFull));
        let bytes = frontier.to_bytes();
        assert_eq!(Frontier::from_bytes(&p, depth, &bytes).unwrap(), frontier);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn random_append_sequences_match_naive(seed in any::<u64>(), n in 0usize..40) {
            let depth = 6;
            let p = params_with_depth(depth);
            let mut r = rng(seed);
            let mut tree = AppendOnlyTree::new(depth);
            let mut frontier = Frontier::empty(depth);
            let mut leaves = Vec::new();
            for _ in 0..n {
                let leaf = p.fe(r.next_u64());
                tree.append(&p, &leaf).unwrap();
                frontier.append(&p, &leaf).unwrap();
                leaves.push(leaf);
            }
            let expect = naive_root(&p, depth, &leaves);
            prop_assert_eq!(tree.root(&p), expect);
            prop_assert_eq!(frontier.root(&p), expect);
            if n > 0 {
                let proof = tree.prove(n as u64 - 1).unwrap();
                prop_assert!(verify(&p, &expect, &leaves[n - 1], &proof));
            }
        }
    }
}
