use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use dvfs::crypto::MasterKey;
use dvfs::fuzzy::{BucketString, LshFamily, LshSeed};
use dvfs::harness::System;
use dvfs::index::{insert_value, nodes_on_path, path_of, EncryptedIndex, Height, TreeTag};
use dvfs::version::{add_keyword, resolve_history, versioned_token, ChainRepo, LocalRepo};

fn key(seed: u64) -> MasterKey {
    MasterKey::generate(&mut ChaCha20Rng::seed_from_u64(seed))
}

const CANDIDATES: &[&str] = &[
    "tunnel", "orchard", "vellum", "marble", "quartz", "lantern", "saddle", "fjord", "cobalt",
    "harbor", "thistle", "gazebo", "plinth", "walrus", "sextant", "kettle", "mosaic", "juniper",
];

fn bucket(i: i64) -> BucketString {
    BucketString::from_values(&[i, -i, 7])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every add token carries exactly L keys, real entries plus padding.
    #[test]
    fn add_tokens_are_padded_to_height(levels in 2u8..10, docs in prop::collection::vec(0u64..256, 1..12), seed: u64) {
        let height = Height::new(levels).unwrap();
        let k = key(seed);
        let mut lr = LocalRepo::new();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let b = bucket(1);
        let docs: BTreeSet<u64> = docs.into_iter().map(|d| d % height.capacity()).collect();
        for doc in docs {
            let (token, report) = add_keyword(&mut lr, &k, &b, doc, height, &mut rng).unwrap();
            prop_assert_eq!(token.add_entries.len(), levels as usize);
            prop_assert_eq!(report.real_entries + report.padding, levels as usize);
            prop_assert_eq!(report.hash_evals, levels as usize);
            prop_assert!(report.real_entries >= 1, "the leaf itself is never shared");
        }
    }

    /// The set of main-tree entries written for one keyword is prefix closed:
    /// whenever a node is present, so is its parent.
    #[test]
    fn entries_are_prefix_closed(levels in 2u8..8, docs in prop::collection::btree_set(0u64..128, 1..10), seed: u64) {
        let height = Height::new(levels).unwrap();
        let k = key(seed);
        let mut lr = LocalRepo::new();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut index = EncryptedIndex::new(height);
        let b = bucket(2);
        let docs: BTreeSet<u64> = docs.into_iter().map(|d| d % height.capacity()).collect();
        for &doc in &docs {
            let (token, _) = add_keyword(&mut lr, &k, &b, doc, height, &mut rng).unwrap();
            for entry in token.add_entries {
                index.insert_key(TreeTag::Main, entry);
            }
        }
        let tk = versioned_token(&k, &b, 0);
        for &doc in &docs {
            for node in nodes_on_path(path_of(doc, height).unwrap(), height).unwrap() {
                prop_assert!(index.contains(TreeTag::Main, node, &tk));
                if let Some(parent) = node.parent() {
                    prop_assert!(index.contains(TreeTag::Main, parent, &tk));
                }
            }
        }
        prop_assert!(!index.contains(TreeTag::Main, path_of(docs.iter().next().copied().unwrap(), height).unwrap(), &versioned_token(&k, &b, 1)));
    }

    /// The chain resolves the newest token to the full history, newest first,
    /// and an older token to exactly its own past.
    #[test]
    fn chain_resolves_history_and_never_forward(bumps in 1u64..12, from in 0u64..12, seed: u64) {
        let k = key(seed);
        let b = bucket(3);
        let tokens: Vec<_> = (0..=bumps).map(|v| versioned_token(&k, &b, v)).collect();
        let mut br = ChainRepo::new();
        for v in 1..=bumps as usize {
            br.append(dvfs::version::ChainRecord::link(&tokens[v], &tokens[v - 1]));
        }
        let full = resolve_history(&br, tokens[bumps as usize]);
        let expected: Vec<_> = tokens.iter().rev().copied().collect();
        prop_assert_eq!(&full, &expected);

        let from = (from % (bumps + 1)) as usize;
        let past = resolve_history(&br, tokens[from]);
        prop_assert_eq!(past.len(), from + 1);
        for newer in &tokens[from + 1..] {
            prop_assert!(!past.contains(newer));
        }
    }

    /// Random add/delete/query sequences on a small system agree with the
    /// plaintext oracle for every keyword combination.
    #[test]
    fn deletion_matches_oracle(ops in prop::collection::vec((0u8..3, 0usize..6, 0usize..3), 1..25), seed in 0u64..1000) {
        let docs = [1u64, 2, 9, 14, 20, 31];
        let mut system = System::in_memory(key(seed), LshFamily::with_defaults(LshSeed([5; 32])), Height::new(6).unwrap(), seed);
        // Peek answers by bucket, the oracle by stem; keep them comparable.
        let mut seen = BTreeSet::new();
        let picked: Vec<&str> = CANDIDATES
            .iter()
            .copied()
            .filter(|w| seen.insert(system.bucket_of(w).unwrap()))
            .take(9)
            .collect();
        prop_assert_eq!(picked.len(), 9);
        let (words, fillers) = picked.split_at(3);
        for (&d, filler) in docs.iter().zip(fillers) {
            system.add_document(Some(d), filler).unwrap();
        }
        for (kind, d, w) in ops {
            match kind {
                0 => { system.add_keyword(docs[d], words[w]).unwrap(); }
                1 => { system.delete_keyword(docs[d], words[w]).unwrap(); }
                _ => {
                    let o = system.query(&[words[w]]).unwrap();
                    prop_assert!(o.report.passed());
                }
            }
            for mask in 1..8u8 {
                let q: Vec<&str> = (0..3).filter(|i| mask >> i & 1 == 1).map(|i| words[i]).collect();
                prop_assert_eq!(system.peek(&q).unwrap(), system.oracle(&q).unwrap());
            }
        }
    }
}

#[test]
fn insert_value_separates_trees_and_nodes() {
    let k = key(1);
    let tk = versioned_token(&k, &bucket(4), 0);
    let height = Height::new(4).unwrap();
    let mut seen = BTreeMap::new();
    for doc in 0..8 {
        for node in nodes_on_path(path_of(doc, height).unwrap(), height).unwrap() {
            for tree in [TreeTag::Main, TreeTag::Delete] {
                let v = insert_value(tree, node, &tk);
                if let Some(prev) = seen.insert(v.0.to_vec(), (tree, node)) {
                    assert_eq!(prev, (tree, node));
                }
            }
        }
    }
    assert_eq!(seen.len(), 2 * 15);
}
