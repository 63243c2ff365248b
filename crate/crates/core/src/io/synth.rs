//! Synthetic bundles: planted-signal studies, the gradient-check
//! micro-instance, and count-matched "shaped" datasets.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::DatasetBundle;
use crate::error::{Error, Result};

/// Which relation explains a group's held-out items.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalMode {
    /// Groups share topics with other groups; dependencies only cross topics.
    Explicit,
    /// Every group has its own topic; topic items are linked by dependency
    /// cycles and no two topics share a pair of items.
    #[default]
    Implicit,
    /// Shared topics whose items are also linked by dependency cycles.
    Mixed,
}

/// Users per group. Membership is always exclusive.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupSizes {
    /// Users split as evenly as possible.
    #[default]
    Balanced,
    /// Sizes drawn uniformly from `[min, max]`, then adjusted to cover every user.
    Uniform { min: usize, max: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub n_groups: usize,
    #[serde(default)]
    pub group_sizes: GroupSizes,
    /// Items per topic; each topic is one dependency cycle in implicit and
    /// mixed modes.
    pub chain_length: usize,
    #[serde(default)]
    pub mode: SignalMode,
    /// Per topic item, probability that the group also gets one off-topic
    /// item (through a random member); roughly the share of a group's items
    /// that no signal explains.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_users: 200,
            n_items: 60,
            n_groups: 40,
            group_sizes: GroupSizes::Balanced,
            chain_length: 3,
            mode: SignalMode::Implicit,
            noise: 0.05,
            seed: 0,
        }
    }
}

/// Dependency edges per topic item: enough successors on the cycle that a
/// held-out item always keeps one training predecessor under the default split.
fn reach(chain_length: usize) -> usize {
    let l = chain_length as f64;
    let held = (0.2 * l).round() as usize + (0.1 * l).round() as usize;
    held.clamp(1, chain_length - 1)
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Infeasible(m));
        if self.n_users == 0 || self.n_items == 0 || self.n_groups == 0 {
            return fail("n_users, n_items and n_groups must be positive".into());
        }
        if self.chain_length < 2 {
            return fail(format!("chain_length {} is below 2", self.chain_length));
        }
        if self.chain_length > self.n_items {
            return fail(format!(
                "chain_length {} exceeds n_items {}",
                self.chain_length, self.n_items
            ));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return fail(format!("noise {} outside [0, 1]", self.noise));
        }
        if self.n_users < self.n_groups {
            return fail(format!(
                "{} users cannot fill {} exclusive groups",
                self.n_users, self.n_groups
            ));
        }
        if let GroupSizes::Uniform { min, max } = self.group_sizes {
            if min == 0 || min > max || min * self.n_groups > self.n_users || max * self.n_groups < self.n_users {
                return fail(format!(
                    "group sizes [{min}, {max}] cannot partition {} users into {} groups",
                    self.n_users, self.n_groups
                ));
            }
        }
        Ok(())
    }
}

fn group_sizes(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let (n, s) = (spec.n_users, spec.n_groups);
    match spec.group_sizes {
        GroupSizes::Balanced => (0..s).map(|g| n / s + usize::from(g < n % s)).collect(),
        GroupSizes::Uniform { min, max } => {
            let mut sizes: Vec<usize> = (0..s).map(|_| rng.gen_range(min..=max)).collect();
            let mut total: usize = sizes.iter().sum();
            while total != n {
                let g = rng.gen_range(0..s);
                if total < n && sizes[g] < max {
                    sizes[g] += 1;
                    total += 1;
                } else if total > n && sizes[g] > min {
                    sizes[g] -= 1;
                    total -= 1;
                }
            }
            sizes
        }
    }
}

/// One item set per group such that no item pair appears in two sets (where
/// avoidable), favouring the least-used items.
fn pair_disjoint_sets(n_sets: usize, n_items: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut usage = vec![0usize; n_items];
    let mut pairs: HashSet<(usize, usize)> = HashSet::new();
    let mut sets = Vec::with_capacity(n_sets);
    for _ in 0..n_sets {
        let keys: Vec<u64> = (0..n_items).map(|_| rng.gen()).collect();
        let mut order: Vec<usize> = (0..n_items).collect();
        order.sort_by_key(|&v| (usage[v], keys[v]));
        let mut chosen: Vec<usize> = Vec::with_capacity(size);
        for strict in [true, false] {
            for &v in &order {
                if chosen.len() == size {
                    break;
                }
                if chosen.contains(&v) {
                    continue;
                }
                if strict && chosen.iter().any(|&c| pairs.contains(&(c.min(v), c.max(v)))) {
                    continue;
                }
                chosen.push(v);
            }
        }
        for (a, &x) in chosen.iter().enumerate() {
            usage[x] += 1;
            for &y in &chosen[a + 1..] {
                pairs.insert((x.min(y), x.max(y)));
            }
        }
        sets.push(chosen);
    }
    sets
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Generates a bundle whose held-out group items are explained by the
/// requested signal mode.
///
/// Implicit mode: with no noise, every item a group could hold out has a
/// dependency predecessor among the group's remaining items, and no other
/// group ever interacts with the same pair of items.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<DatasetBundle> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let l = spec.chain_length;
    let sizes = group_sizes(spec, &mut rng);

    // topic item lists, and the topic of every group
    let (topics, topic_of): (Vec<Vec<usize>>, Vec<usize>) = match spec.mode {
        SignalMode::Implicit => (
            pair_disjoint_sets(spec.n_groups, spec.n_items, l, &mut rng),
            (0..spec.n_groups).collect(),
        ),
        SignalMode::Explicit | SignalMode::Mixed => {
            let n_topics = spec.n_groups.div_ceil(2).min(spec.n_items / l).max(1);
            let mut items: Vec<usize> = (0..spec.n_items).collect();
            items.shuffle(&mut rng);
            let topics = items.chunks_exact(l).take(n_topics).map(<[usize]>::to_vec).collect();
            (topics, (0..spec.n_groups).map(|g| g % n_topics).collect())
        }
    };

    let mut item_topic = vec![usize::MAX; spec.n_items];
    for (t, items) in topics.iter().enumerate() {
        for &v in items {
            item_topic[v] = t;
        }
    }

    let mut deps: BTreeSet<(usize, usize)> = BTreeSet::new();
    if spec.mode != SignalMode::Explicit {
        let h = reach(l);
        for items in &topics {
            for (a, &v) in items.iter().enumerate() {
                for step in 1..=h {
                    deps.insert((v, items[(a + step) % items.len()]));
                }
            }
        }
    } else {
        // as many edges as cycles would add, all between different topics
        let target = topics.len() * l;
        let distinct_topics = topics.len() > 1 || item_topic.contains(&usize::MAX);
        while distinct_topics && deps.len() < target {
            let (i, j) = (rng.gen_range(0..spec.n_items), rng.gen_range(0..spec.n_items));
            let same = item_topic[i] == item_topic[j] && item_topic[i] != usize::MAX;
            if i != j && !same {
                deps.insert((i, j));
            }
        }
    }

    let mut users: Vec<usize> = (0..spec.n_users).collect();
    users.shuffle(&mut rng);
    let mut rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); spec.n_users];
    let mut members_of: Vec<Vec<usize>> = Vec::with_capacity(spec.n_groups);
    let mut next = 0;
    for (g, &k) in sizes.iter().enumerate() {
        let members = users[next..next + k].to_vec();
        next += k;
        let topic = &topics[topic_of[g]];
        // every topic item reaches at least one member, the rest by coin flip
        for (a, &v) in topic.iter().enumerate() {
            rows[members[a % k]].insert(v);
        }
        for &u in &members {
            for &v in topic {
                if rng.gen_bool(0.5) {
                    rows[u].insert(v);
                }
            }
            if rows[u].is_empty() {
                rows[u].insert(*topic.choose(&mut rng).expect("topic is non-empty"));
            }
        }
        if spec.noise > 0.0 {
            let off: Vec<usize> = (0..spec.n_items).filter(|v| !topic.contains(v)).collect();
            for _ in topic {
                if rng.gen_bool(spec.noise) {
                    if let Some(&v) = off.choose(&mut rng) {
                        rows[members[rng.gen_range(0..k)]].insert(v);
                    }
                }
            }
        }
        members_of.push(members);
    }

    // items outside every topic still need one interaction to exist
    let seen: HashSet<usize> = rows.iter().flatten().copied().collect();
    let unseen = (0..spec.n_items).filter(|v| !seen.contains(v));
    for (u, v) in unseen.enumerate() {
        rows[u % spec.n_users].insert(v);
    }

    let user_labels = labels("u", spec.n_users);
    let item_labels = labels("v", spec.n_items);
    let group_labels = labels("g", spec.n_groups);
    let mut user_item = Vec::new();
    for (u, row) in rows.iter().enumerate() {
        for &v in row {
            user_item.push((user_labels[u].clone(), item_labels[v].clone()));
        }
    }
    let item_item = deps
        .into_iter()
        .map(|(i, j)| (item_labels[i].clone(), item_labels[j].clone()))
        .collect();
    let mut group_user = Vec::new();
    for (g, members) in members_of.iter().enumerate() {
        let mut sorted = members.clone();
        sorted.sort_unstable();
        for u in sorted {
            group_user.push((group_labels[g].clone(), user_labels[u].clone()));
        }
    }
    Ok(DatasetBundle {
        user_item,
        item_item,
        group_user,
        aux: Vec::new(),
    })
}

fn owned(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

/// Three users, four items, two overlapping groups. Every user has both
/// explicit and dependency-reachable items.
pub fn micro_bundle() -> DatasetBundle {
    DatasetBundle {
        user_item: owned(&[("u1", "v1"), ("u1", "v2"), ("u2", "v2"), ("u2", "v3"), ("u3", "v1"), ("u3", "v4")]),
        item_item: owned(&[("v1", "v3"), ("v2", "v4"), ("v3", "v4"), ("v1", "v2"), ("v4", "v2"), ("v3", "v1")]),
        group_user: owned(&[("g1", "u1"), ("g1", "u2"), ("g2", "u2"), ("g2", "u3")]),
        aux: Vec::new(),
    }
}

/// Count rows of a dataset summary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeTarget {
    pub users: usize,
    pub items: usize,
    pub groups: usize,
    pub vv: usize,
    pub uv: usize,
    pub uvv: usize,
    pub gv: usize,
    pub gvv: usize,
}

pub const MOOCCUBE_SHAPE: ShapeTarget = ShapeTarget {
    users: 17908,
    items: 394,
    groups: 2447,
    vv: 937,
    uv: 616835,
    uvv: 1982499,
    gv: 93910,
    gvv: 100360,
};

pub const MOVIELENS_SHAPE: ShapeTarget = ShapeTarget {
    users: 895,
    items: 1679,
    groups: 150,
    vv: 6173,
    uv: 96464,
    uvv: 16062,
    gv: 47725,
    gvv: 8191,
};

/// Layout of a shaped bundle: dependency clusters `c = 0..k`, cluster `c`
/// pointing from its sources to `2^c` target items. A user's multi-hop count
/// is then the integer whose bits are the clusters it touches, and a group's
/// is the bitwise OR of its members' masks.
struct Clusters {
    k: usize,
    /// sources per cluster, primary source first
    sources: Vec<Vec<usize>>,
    targets: Vec<Vec<usize>>,
    /// items with no dependency edge leaving them
    free: Vec<usize>,
}

impl Clusters {
    fn full(&self) -> u64 {
        (1u64 << self.k) - 1
    }

    fn layout(k: usize, t: &ShapeTarget) -> Option<Self> {
        let full = (1usize << k) - 1;
        if full > t.vv || full > t.gvv {
            return None;
        }
        let mut extra = vec![0usize; k];
        let mut rest = t.vv - full;
        for c in (0..k).rev() {
            extra[c] = rest >> c;
            rest -= extra[c] << c;
        }
        let n_sources: usize = k + extra.iter().sum::<usize>();
        if full + n_sources > t.items {
            return None;
        }
        let mut next = 0;
        let mut take = |n: usize| {
            let out: Vec<usize> = (next..next + n).collect();
            next += n;
            out
        };
        let targets: Vec<Vec<usize>> = (0..k).map(|c| take(1 << c)).collect();
        let sources: Vec<Vec<usize>> = (0..k).map(|c| take(1 + extra[c])).collect();
        let mut free: Vec<usize> = targets.iter().flatten().copied().collect();
        free.extend(next..t.items);
        Some(Self {
            k,
            sources,
            targets,
            free,
        })
    }
}

struct GroupPlan {
    sizes: Vec<usize>,
    /// group OR-mask
    masks: Vec<u64>,
}

/// Group 0 takes `giant` users, the others split the rest evenly. Groups are
/// in non-increasing size order after group 0.
fn sized(t: &ShapeTarget, giant: usize) -> Vec<usize> {
    let rest = t.users - giant;
    let others = t.groups - 1;
    let mut sizes = vec![giant];
    sizes.extend((0..others).map(|g| rest / others + usize::from(g < rest % others)));
    sizes
}

fn plan_groups(t: &ShapeTarget, cl: &Clusters) -> Option<GroupPlan> {
    let full = cl.full();
    let n_full = t.gvv / full as usize;
    let r = (t.gvv % full as usize) as u64;
    if n_full + usize::from(r > 0) > t.groups {
        return None;
    }
    let max_uvv = |sizes: &[usize]| -> usize {
        sizes[..n_full].iter().sum::<usize>() * full as usize + r as usize
    };
    let base = t.users.div_ceil(t.groups);
    let sizes = if t.groups == 1 {
        vec![t.users]
    } else {
        let mut found = None;
        for giant in base..=t.users - (t.groups - 1) {
            let s = sized(t, giant);
            if max_uvv(&s) >= t.uvv {
                found = Some(s);
                break;
            }
        }
        found?
    };
    let mut masks = vec![0u64; t.groups];
    for m in masks.iter_mut().take(n_full) {
        *m = full;
    }
    if r > 0 {
        masks[n_full] = r;
    }
    Some(GroupPlan { sizes, masks })
}

/// Builds a bundle whose summary counts equal `t` exactly (at dependency
/// depth 1 and above), or explains why it cannot.
pub fn shaped_bundle(t: &ShapeTarget) -> Result<DatasetBundle> {
    let infeasible = |m: &str| Error::Infeasible(format!("shape {t:?}: {m}"));
    if t.users == 0 || t.items == 0 || t.groups == 0 || t.groups > t.users {
        return Err(infeasible("needs users ≥ groups > 0 and items > 0"));
    }
    if t.vv == 0 || t.gvv == 0 || t.uvv < t.gvv {
        return Err(infeasible("needs dependencies, multi-hop group counts, and U-V-V ≥ G-V-V"));
    }
    let max_k = (usize::BITS - 1 - (t.vv.min(t.gvv) + 1).leading_zeros()) as usize;
    let mut last = String::from("no cluster layout fits");
    for k in (1..=max_k.min(62)).rev() {
        let Some(cl) = Clusters::layout(k, t) else { continue };
        let Some(plan) = plan_groups(t, &cl) else {
            last = format!("{k} clusters: multi-hop counts need more users per group");
            continue;
        };
        match assemble(t, &cl, &plan) {
            Ok(b) => return Ok(b),
            Err(m) => last = format!("{k} clusters: {m}"),
        }
    }
    Err(infeasible(&last))
}

fn bits(mask: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |c| mask >> c & 1 == 1)
}

fn assemble(t: &ShapeTarget, cl: &Clusters, plan: &GroupPlan) -> std::result::Result<DatasetBundle, String> {
    let full = cl.full();
    // member masks: one carrier per group holds the group mask, the others
    // absorb the remaining U-V-V mass inside full-mask groups
    let mut member_masks: Vec<Vec<u64>> = plan
        .sizes
        .iter()
        .zip(&plan.masks)
        .map(|(&k, &m)| {
            let mut v = vec![0u64; k];
            v[0] = m;
            v
        })
        .collect();
    let mut rest = (t.uvv - t.gvv) as u64;
    for (g, masks) in member_masks.iter_mut().enumerate() {
        if plan.masks[g] != full {
            continue;
        }
        for m in masks.iter_mut().skip(1) {
            let add = rest.min(full);
            *m = add;
            rest -= add;
        }
    }
    if rest > 0 {
        return Err("U-V-V exceeds what the group masks allow".into());
    }

    // extra sources go to the carrier of the first full group
    let extra_sources: Vec<usize> = cl.sources.iter().flat_map(|s| s[1..].iter().copied()).collect();
    let base: usize = plan.masks.iter().map(|m| m.count_ones() as usize).sum::<usize>() + extra_sources.len();
    let s = t.groups;
    let n_free = cl.free.len();
    let x_total = t.gv.checked_sub(base).ok_or("G-V below the source items groups need")?;
    if x_total < s || x_total < n_free || x_total > s * n_free {
        return Err(format!("G-V leaves {x_total} free slots for {s} groups over {n_free} free items"));
    }
    let x: Vec<usize> = (0..s).map(|g| x_total / s + usize::from(g < x_total % s)).collect();

    let popcounts: usize = member_masks.iter().flatten().map(|m| m.count_ones() as usize).sum();
    let uv_free = t
        .uv
        .checked_sub(popcounts + extra_sources.len())
        .ok_or("U-V below the source items users need")?;
    // free-item counts per member: carrier takes the whole window
    let mut e: Vec<Vec<usize>> = member_masks
        .iter()
        .zip(&x)
        .map(|(masks, &xg)| {
            masks
                .iter()
                .enumerate()
                .map(|(i, &m)| if i == 0 { xg } else { usize::from(m == 0) })
                .collect()
        })
        .collect();
    let min_total: usize = e.iter().flatten().sum();
    let max_total: usize = plan.sizes.iter().zip(&x).map(|(&k, &xg)| k * xg).sum();
    if uv_free < min_total || uv_free > max_total {
        return Err(format!("U-V free mass {uv_free} outside [{min_total}, {max_total}]"));
    }
    let mut left = uv_free - min_total;
    while left > 0 {
        for (g, row) in e.iter_mut().enumerate() {
            for v in row.iter_mut().skip(1) {
                if left > 0 && *v < x[g] {
                    *v += 1;
                    left -= 1;
                }
            }
        }
    }

    let user_labels = labels("u", t.users);
    let item_labels = labels("v", t.items);
    let group_labels = labels("g", t.groups);
    let mut user_item = Vec::with_capacity(t.uv);
    let mut group_user = Vec::with_capacity(t.users);
    let mut offset = 0;
    let mut u = 0;
    let carrier_group = plan.masks.iter().position(|&m| m == full).ok_or("no full group")?;
    for g in 0..s {
        let window: Vec<usize> = (0..x[g]).map(|i| cl.free[(offset + i) % n_free]).collect();
        offset += x[g];
        for (i, (&mask, &count)) in member_masks[g].iter().zip(&e[g]).enumerate() {
            let mut row: BTreeSet<usize> = bits(mask).map(|c| cl.sources[c][0]).collect();
            if g == carrier_group && i == 0 {
                row.extend(&extra_sources);
            }
            let start = i % window.len();
            row.extend((0..count).map(|j| window[(start + j) % window.len()]));
            for v in row {
                user_item.push((user_labels[u].clone(), item_labels[v].clone()));
            }
            group_user.push((group_labels[g].clone(), user_labels[u].clone()));
            u += 1;
        }
    }
    let mut item_item = Vec::with_capacity(t.vv);
    for c in 0..cl.k {
        for &a in &cl.sources[c] {
            for &b in &cl.targets[c] {
                item_item.push((item_labels[a].clone(), item_labels[b].clone()));
            }
        }
    }
    Ok(DatasetBundle {
        user_item,
        item_item,
        group_user,
        aux: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reach_matches_default_split() {
        assert_eq!(reach(3), 1);
        assert_eq!(reach(5), 2);
        assert_eq!(reach(10), 3);
        assert_eq!(reach(2), 1);
    }

    #[test]
    fn pair_disjoint_when_room() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sets = pair_disjoint_sets(40, 60, 3, &mut rng);
        let mut pairs = HashSet::new();
        for s in &sets {
            assert_eq!(s.len(), 3);
            for a in 0..3 {
                for b in a + 1..3 {
                    assert!(pairs.insert((s[a].min(s[b]), s[a].max(s[b]))));
                }
            }
        }
        let used: HashSet<usize> = sets.iter().flatten().copied().collect();
        assert_eq!(used.len(), 60);
    }
}
