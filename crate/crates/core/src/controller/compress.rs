//! Wildcard compression of exact-destination rules.

use std::collections::{BTreeMap, BTreeSet};

use crate::dataplane::{Action, DstMatch, FlowRule, RuleKind, RuleOrigin, StatePred, TagMatch};

type GroupKey = (
    u32,
    TagMatch,
    Option<StatePred>,
    RuleOrigin,
    RuleKind,
    Vec<Action>,
);

/// Merges exact-destination rules that agree on everything but the
/// destination into a minimal exact cover of binary prefixes.
///
/// A group is left alone when another rule of the same priority also matches
/// one of its destinations, since lookup order within a priority depends on
/// rule ids that compression would change.
pub fn compress_rules(rules: &[FlowRule]) -> Vec<FlowRule> {
    let mut groups: BTreeMap<GroupKey, (u8, BTreeSet<u32>, Vec<FlowRule>)> = BTreeMap::new();
    let mut out = Vec::new();
    for r in rules {
        if !r.dst.is_exact() {
            out.push(r.clone());
            continue;
        }
        let key = (
            r.priority,
            r.tag,
            r.pred,
            r.origin,
            r.kind,
            r.actions.clone(),
        );
        let g = groups
            .entry(key)
            .or_insert_with(|| (r.dst.width, BTreeSet::new(), Vec::new()));
        g.1.insert(r.dst.bits);
        g.2.push(r.clone());
    }
    for (key, (width, dsts, members)) in &groups {
        let overlaps = rules.iter().any(|o| {
            o.priority == key.0
                && !members.contains(o)
                && dsts
                    .iter()
                    .any(|&d| o.dst.matches(crate::kernel::NodeId(d)))
        });
        if overlaps || dsts.len() < 2 {
            out.extend(members.iter().cloned());
            continue;
        }
        let template = members[0].clone();
        for p in prefix_cover(dsts, *width) {
            out.push(FlowRule {
                dst: p,
                ..template.clone()
            });
        }
    }
    out
}

/// Smallest set of disjoint prefixes whose union is exactly `ids`.
pub fn prefix_cover(ids: &BTreeSet<u32>, width: u8) -> Vec<DstMatch> {
    let mut out = Vec::new();
    cover_rec(ids, 0, 0, width, &mut out);
    out
}

fn cover_rec(ids: &BTreeSet<u32>, bits: u32, len: u8, width: u8, out: &mut Vec<DstMatch>) {
    let shift = (width - len) as u32;
    let lo = (bits as u64) << shift;
    let hi = lo + (1u64 << shift);
    let present = ids
        .range(lo as u32..)
        .take_while(|&&x| (x as u64) < hi)
        .count() as u64;
    if present == 0 {
        return;
    }
    if present == hi - lo {
        out.push(DstMatch::prefix(bits, len, width));
        return;
    }
    cover_rec(ids, bits << 1, len + 1, width, out);
    cover_rec(ids, (bits << 1) | 1, len + 1, width, out);
}
