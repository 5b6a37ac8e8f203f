//! Heuristic claim-set rewriters.
//!
//! Three strategies over a parsed [`ClaimSet`]:
//!
//! * **copy** — leave the set unchanged;
//! * **rdc** — randomly delete one claim other than claim 1, together with
//!   every claim that (transitively) depends on it;
//! * **dmmc** — delete every multi-multi claim, together with its
//!   dependents.
//!
//! Deletions always renumber the survivors contiguously and rewrite their
//! citation phrases through the renumbering, so the output parses cleanly.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::claims::{
    classify_claim, delete_and_renumber, ClaimCategory, ClaimSet, ClaimsError,
};

/// Outcome of a baseline rewrite: the rewritten set, the original numbers
/// that were deleted, and the old-number → new-number map for survivors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteResult {
    pub output: ClaimSet,
    pub deleted: BTreeSet<u32>,
    pub renumber_map: BTreeMap<u32, u32>,
}

/// Identity rewrite: the claims are not rewritten.
pub fn rewrite_copy(set: &ClaimSet) -> RewriteResult {
    let renumber_map = set
        .claims()
        .iter()
        .map(|c| (c.number, c.number))
        .collect();
    RewriteResult {
        output: set.clone(),
        deleted: BTreeSet::new(),
        renumber_map,
    }
}

/// Deletes one claim chosen uniformly from `2..=K` (seed-deterministic),
/// plus its dependents. A single-claim set is returned unchanged: claim 1
/// is never eligible for deletion.
pub fn rewrite_rdc(set: &ClaimSet, seed: u64) -> Result<RewriteResult, ClaimsError> {
    let k = set.len() as u32;
    if k < 2 {
        return Ok(rewrite_copy(set));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let victim = rng.random_range(2..=k);
    delete_with_dependents(set, BTreeSet::from([victim]))
}

/// Deletes every multi-multi claim plus its dependents; a set without
/// multi-multi claims is returned unchanged.
pub fn rewrite_dmmc(set: &ClaimSet) -> Result<RewriteResult, ClaimsError> {
    let mut targets = BTreeSet::new();
    for claim in set.claims() {
        if classify_claim(set, claim.number)? == ClaimCategory::MultiMulti {
            targets.insert(claim.number);
        }
    }
    if targets.is_empty() {
        return Ok(rewrite_copy(set));
    }
    delete_with_dependents(set, targets)
}

fn delete_with_dependents(
    set: &ClaimSet,
    targets: BTreeSet<u32>,
) -> Result<RewriteResult, ClaimsError> {
    let deleted = crate::claims::dependents_closure(set, &targets)?;
    let (output, renumber_map) = delete_and_renumber(set, &deleted)?;
    Ok(RewriteResult {
        output,
        deleted,
        renumber_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::claims::parse_claims;

    const CHAIN: &str = "【請求項1】A。\n【請求項2】請求項1に記載のB。\n【請求項3】請求項2に記載のC。";

    #[test]
    fn copy_is_identity() {
        let set = parse_claims(CHAIN).unwrap();
        let result = rewrite_copy(&set);
        assert_eq!(result.output, set);
        assert!(result.deleted.is_empty());
        assert_eq!(
            result.renumber_map,
            BTreeMap::from([(1, 1), (2, 2), (3, 3)])
        );
    }

    #[test]
    fn rdc_on_single_claim_is_copy() {
        let set = parse_claims("【請求項1】X。").unwrap();
        let result = rewrite_rdc(&set, 7).unwrap();
        assert_eq!(result.output, set);
        assert!(result.deleted.is_empty());
    }

    #[test]
    fn rdc_deletes_dependents_of_victim() {
        let set = parse_claims(CHAIN).unwrap();
        // Find a seed whose victim is claim 2; its closure is {2, 3}.
        let seed = (0..64)
            .find(|&s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                rng.random_range(2..=3u32) == 2
            })
            .unwrap();
        let result = rewrite_rdc(&set, seed).unwrap();
        assert_eq!(result.deleted, BTreeSet::from([2, 3]));
        assert_eq!(result.output.len(), 1);
        assert_eq!(result.renumber_map, BTreeMap::from([(1, 1)]));
    }

    #[test]
    fn rdc_keeps_independent_siblings() {
        let text = "【請求項1】A。\n【請求項2】請求項1に記載のB。\n【請求項3】請求項1に記載のC。";
        let set = parse_claims(text).unwrap();
        let seed = (0..64)
            .find(|&s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                rng.random_range(2..=3u32) == 3
            })
            .unwrap();
        let result = rewrite_rdc(&set, seed).unwrap();
        assert_eq!(result.deleted, BTreeSet::from([3]));
        assert_eq!(result.renumber_map, BTreeMap::from([(1, 1), (2, 2)]));
        assert_eq!(result.output.get(2).unwrap().body, "請求項1に記載のB。");
    }

    #[test]
    fn rdc_is_deterministic_per_seed() {
        let text = "【請求項1】A。\n【請求項2】B。\n【請求項3】請求項1又は2に記載のC。\n【請求項4】請求項3に記載のD。";
        let set = parse_claims(text).unwrap();
        for seed in 0..20 {
            let a = rewrite_rdc(&set, seed).unwrap();
            let b = rewrite_rdc(&set, seed).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn dmmc_without_multi_multi_is_copy() {
        let set = parse_claims(CHAIN).unwrap();
        let result = rewrite_dmmc(&set).unwrap();
        assert_eq!(result.output, set);
        assert!(result.deleted.is_empty());
    }

    #[test]
    fn dmmc_deletes_multi_multi_and_dependents() {
        let text = "【請求項1】A。\n【請求項2】B。\n【請求項3】請求項1又は2に記載のC。\n【請求項4】請求項2又は3に記載のD。\n【請求項5】請求項4に記載のE。";
        let set = parse_claims(text).unwrap();
        let result = rewrite_dmmc(&set).unwrap();
        assert_eq!(result.deleted, BTreeSet::from([4, 5]));
        assert_eq!(result.output.len(), 3);
        assert_eq!(
            result.renumber_map,
            BTreeMap::from([(1, 1), (2, 2), (3, 3)])
        );
        assert_eq!(
            result.output.get(3).unwrap().body,
            "請求項1又は2に記載のC。"
        );
    }

    #[test]
    fn dmmc_is_idempotent() {
        let text = "【請求項1】A。\n【請求項2】B。\n【請求項3】請求項1又は2に記載のC。\n【請求項4】請求項2又は3に記載のD。";
        let set = parse_claims(text).unwrap();
        let once = rewrite_dmmc(&set).unwrap();
        let twice = rewrite_dmmc(&once.output).unwrap();
        assert_eq!(twice.output, once.output);
        assert!(twice.deleted.is_empty());
    }
}
