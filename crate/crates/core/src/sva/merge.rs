use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::rtl::lexer::{lex_lenient, significant};

use super::{Assertion, AssertionBatch};

/// Whitespace- and comment-insensitive identity of an assertion: directive,
/// loop wrapper and expression tokens. The name is not part of it.
pub fn normalized_key(a: &Assertion) -> String {
    let wrapper = a
        .loop_wrapper
        .as_ref()
        .map(|w| format!("{:?} {} {}", w.kind, w.genvar, squash(&w.bound)))
        .unwrap_or_default();
    let expr = if a.expression.is_empty() { &a.body } else { &a.expression };
    format!("{}|{}|{:?}|{}", a.directive.keyword(), wrapper, a.kind, squash(expr))
}

fn squash(text: &str) -> String {
    let toks = significant(&lex_lenient(text));
    toks.iter().map(|t| t.text(text)).collect::<Vec<_>>().join(" ")
}

/// Merges batches in order. Assertions with an already-seen key are dropped;
/// a new assertion whose name is taken gets a `_dupN` suffix.
pub fn dedup(batches: &[AssertionBatch]) -> AssertionBatch {
    let mut keys = HashSet::new();
    let mut names = HashSet::new();
    let mut out = AssertionBatch::default();
    for b in batches {
        for a in &b.assertions {
            if !keys.insert(normalized_key(a)) {
                continue;
            }
            let mut a = a.clone();
            let base = a.name.clone();
            let mut n = 1;
            while names.contains(&a.name) {
                a.name = format!("{base}_dup{n}");
                n += 1;
            }
            names.insert(a.name.clone());
            // The merged batch is rendered under the resolved name.
            a.declared_name = a.name.clone();
            out.assertions.push(a);
        }
        out.property_decls.extend(b.property_decls.iter().cloned());
        out.unparsed_residue.extend(b.unparsed_residue.iter().cloned());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BatchDiff {
    pub identical: usize,
    pub variants: usize,
    pub only_a: usize,
    pub only_b: usize,
}

/// Counts identical assertions (by normalized key, as a multiset), then pairs
/// remaining assertions that reference the same signal set as variants.
pub fn diff_batches(a: &AssertionBatch, b: &AssertionBatch) -> BatchDiff {
    let mut pool: HashMap<String, usize> = HashMap::new();
    for x in &b.assertions {
        *pool.entry(normalized_key(x)).or_default() += 1;
    }
    let mut identical = 0;
    let mut rest_a = Vec::new();
    for x in &a.assertions {
        match pool.get_mut(&normalized_key(x)) {
            Some(n) if *n > 0 => {
                *n -= 1;
                identical += 1;
            }
            _ => rest_a.push(x),
        }
    }
    let mut rest_b: Vec<&Assertion> = Vec::new();
    let mut consumed: HashMap<String, usize> = HashMap::new();
    for x in &b.assertions {
        let key = normalized_key(x);
        let matched = a.assertions.iter().filter(|y| normalized_key(y) == key).count();
        let used = consumed.entry(key).or_default();
        if *used < matched {
            *used += 1;
        } else {
            rest_b.push(x);
        }
    }
    let mut variants = 0;
    let mut taken = vec![false; rest_b.len()];
    let mut unmatched_a = 0;
    for x in rest_a {
        let signals = x.signal_names();
        match (0..rest_b.len()).find(|&j| !taken[j] && rest_b[j].signal_names() == signals) {
            Some(j) => {
                taken[j] = true;
                variants += 1;
            }
            None => unmatched_a += 1,
        }
    }
    BatchDiff { identical, variants, only_a: unmatched_a, only_b: taken.iter().filter(|t| !**t).count() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sva::parse_batch;

    const A: &str = "as__a: assert property (x |-> y);\nas__b: assert property (x |=> z);\nas__c: assert property (p |-> q);";
    const B: &str = "as__a2: assert property (x   |->\n y);\nas__b: assert property (x |=> !z);\nas__d: assert property (m |-> n);\nas__e: assert property (k);";

    #[test]
    fn diff_counts() {
        let (a, b) = (parse_batch(A, None), parse_batch(B, None));
        assert_eq!(diff_batches(&a, &b), BatchDiff { identical: 1, variants: 1, only_a: 1, only_b: 2 });
        assert_eq!(diff_batches(&a, &a), BatchDiff { identical: 3, ..BatchDiff::default() });
        assert_eq!(diff_batches(&a, &AssertionBatch::default()), BatchDiff { only_a: 3, ..BatchDiff::default() });
    }

    #[test]
    fn dedup_collapses_and_renames() {
        let (a, b) = (parse_batch(A, None), parse_batch(B, None));
        let m = dedup(&[a.clone(), b.clone()]);
        assert_eq!(m.names(), ["as__a", "as__b", "as__c", "as__b_dup1", "as__d", "as__e"]);
        assert_eq!(dedup(&[a.clone(), a.clone()]).len(), a.len());
        assert_eq!(dedup(&[AssertionBatch::default(), b.clone()]).names(), b.names());
        let once = dedup(&[a, b]);
        assert_eq!(dedup(std::slice::from_ref(&once)), once);
    }
}
