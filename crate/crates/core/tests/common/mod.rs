//! Oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use grouprec::eval::{candidates, hr_at_n, ndcg_at_n, rank_items, rank_of, EvalInstance, EvalReport};
use grouprec::hin::{enumerate_path_incidence, AuxRecords, AuxRelations, InteractionStore, PathIncidence, PathSpec};
use grouprec::io::{generate_synthetic, micro_bundle, SyntheticSpec};
use grouprec::model::{
    aggregate, forward_user, meanpool_aggregate, AggregatorKind, Branches, ItemEmbeddings, ModelInputs, ModelParams,
    ModelSpec, TargetMode, WeightKind, WeightObserver,
};
use grouprec::train::stage_rng;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;


/// Dense boolean matrix, the oracle's own representation.
pub type Dense = Vec<Vec<bool>>;

pub fn dense_product(a: &Dense, b: &Dense) -> Dense {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| (0..cols).map(|j| (0..inner).any(|k| row[k] && b[k][j])).collect())
        .collect()
}

pub fn dense_or(a: &Dense, b: &Dense) -> Dense {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| *p || *q).collect())
        .collect()
}

/// `y_vv ∪ y_vv² ∪ … ∪ y_vv^depth` with the diagonal cleared.
pub fn closure_oracle(vv: &Dense, depth: usize) -> Dense {
    let mut power = vv.clone();
    let mut acc = vv.clone();
    for _ in 1..depth {
        power = dense_product(&power, vv);
        acc = dense_or(&acc, &power);
    }
    for (i, row) in acc.iter_mut().enumerate() {
        row[i] = false;
    }
    acc
}

#[derive(Debug, Clone)]
pub struct RawStore {
    pub n_users: usize,
    pub n_items: usize,
    pub uv: Dense,
    pub vv: Dense,
    pub groups: Vec<Vec<usize>>,
}

pub fn raw_store(max_users: usize, max_items: usize) -> impl Strategy<Value = RawStore> {
    (1..=max_users, 1..=max_items).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(prop::collection::vec(prop::bool::weighted(0.25), m), n),
            prop::collection::vec(prop::collection::vec(prop::bool::weighted(0.15), m), m),
            prop::collection::vec(prop::collection::btree_set(0..n, 1..=n.min(4)), 1..=4),
        )
            .prop_map(move |(mut uv, vv, groups)| {
                // every user and every item needs at least one interaction
                for (u, row) in uv.iter_mut().enumerate() {
                    row[u % m] = true;
                }
                for v in 0..m {
                    uv[v % n][v] = true;
                }
                RawStore {
                    n_users: n,
                    n_items: m,
                    uv,
                    vv,
                    groups: groups.into_iter().map(|g| g.into_iter().collect()).collect(),
                }
            })
    })
}

pub type Records = Vec<(String, String)>;

pub fn labels(raw: &RawStore) -> (Records, Records, Records) {
    let mut ui = Vec::new();
    for (u, row) in raw.uv.iter().enumerate() {
        for (v, &x) in row.iter().enumerate() {
            if x {
                ui.push((format!("u{u}"), format!("v{v}")));
            }
        }
    }
    let mut ii = Vec::new();
    for (a, row) in raw.vv.iter().enumerate() {
        for (b, &x) in row.iter().enumerate() {
            if x {
                ii.push((format!("v{a}"), format!("v{b}")));
            }
        }
    }
    let mut gu = Vec::new();
    for (g, members) in raw.groups.iter().enumerate() {
        for u in members {
            gu.push((format!("g{g}"), format!("u{u}")));
        }
    }
    (ui, ii, gu)
}

/// Store rows are indexed by dense ids; map them back to the oracle's indices.
pub fn by_label(store: &InteractionStore) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let idx = |l: &str| l[1..].parse::<usize>().unwrap();
    (
        store.users.labels().iter().map(|l| idx(l)).collect(),
        store.items.labels().iter().map(|l| idx(l)).collect(),
        store.group_ids.labels().iter().map(|l| idx(l)).collect(),
    )
}

pub fn relabel(m: &grouprec::hin::BinMatrix, rows: &[usize], cols: &[usize], n_rows: usize, n_cols: usize) -> Dense {
    let mut d = vec![vec![false; n_cols]; n_rows];
    for (r, c) in m.iter() {
        d[rows[r]][cols[c]] = true;
    }
    d
}

/// Labelled edge lists of a small HIN with a video layer.
#[derive(Debug, Clone)]
pub struct Hin {
    pub uv: Dense,
    pub vv: Dense,
    pub uw: Dense,
    pub wv: Dense,
}

pub fn hin() -> impl Strategy<Value = Hin> {
    let mat = |p: f64| prop::collection::vec(prop::collection::vec(prop::bool::weighted(p), 5), 5);
    (mat(0.3), mat(0.2), mat(0.3), mat(0.3)).prop_map(|(mut uv, vv, uw, wv)| {
        for (i, row) in uv.iter_mut().enumerate() {
            row[i] = true;
        }
        Hin { uv, vv, uw, wv }
    })
}

/// Undirected typed adjacency keyed by `(type, label)`, plus the directed
/// dependency relation between items.
pub struct Walker {
    pub edges: BTreeMap<(&'static str, String), BTreeSet<(&'static str, String)>>,
    pub deps: BTreeMap<String, BTreeSet<String>>,
}

impl Walker {
    pub fn new(h: &Hin) -> Self {
        let mut edges: BTreeMap<_, BTreeSet<_>> = BTreeMap::new();
        let mut link = |a: (&'static str, String), b: (&'static str, String)| {
            edges.entry(a.clone()).or_default().insert(b.clone());
            edges.entry(b).or_default().insert(a);
        };
        for i in 0..5 {
            for j in 0..5 {
                if h.uv[i][j] {
                    link(("user", format!("u{i}")), ("item", format!("v{j}")));
                }
                if h.uw[i][j] {
                    link(("user", format!("u{i}")), ("video", format!("w{j}")));
                }
                if h.wv[i][j] {
                    link(("video", format!("w{i}")), ("item", format!("v{j}")));
                }
            }
        }
        let mut deps: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for i in 0..5 {
            for j in 0..5 {
                if h.vv[i][j] && i != j {
                    deps.entry(format!("v{i}")).or_default().insert(format!("v{j}"));
                }
            }
        }
        Self { edges, deps }
    }

    pub fn next(&self, spec: &PathSpec, t: usize, node: &str) -> Vec<String> {
        if spec.dependency_position == Some(t) {
            return self.deps.get(node).map(|s| s.iter().cloned().collect()).unwrap_or_default();
        }
        let from = spec.types[t].as_str();
        let to = spec.types[t + 1].as_str();
        let key = (type_name(from), node.to_owned());
        self.edges
            .get(&key)
            .map(|s| s.iter().filter(|(ty, _)| *ty == to).map(|(_, l)| l.clone()).collect())
            .unwrap_or_default()
    }

    /// Every complete typed walk starting at `user`.
    pub fn walks(&self, spec: &PathSpec, user: &str) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        let mut stack = vec![vec![user.to_owned()]];
        while let Some(walk) = stack.pop() {
            let t = walk.len() - 1;
            if t == spec.types.len() - 1 {
                out.push(walk);
                continue;
            }
            for n in self.next(spec, t, &walk[t]) {
                let mut w = walk.clone();
                w.push(n);
                stack.push(w);
            }
        }
        out
    }
}

pub fn type_name(t: &str) -> &'static str {
    match t {
        "user" => "user",
        "item" => "item",
        "video" => "video",
        other => panic!("unexpected type {other}"),
    }
}

pub fn hin_store(h: &Hin) -> InteractionStore {
    let mut ui = Vec::new();
    let mut ii = Vec::new();
    let mut uw = Vec::new();
    let mut wv = Vec::new();
    for i in 0..5 {
        for j in 0..5 {
            if h.uv[i][j] {
                ui.push((format!("u{i}"), format!("v{j}")));
            }
            if h.vv[i][j] {
                ii.push((format!("v{i}"), format!("v{j}")));
            }
            if h.uw[i][j] {
                uw.push((format!("u{i}"), format!("w{j}")));
            }
            if h.wv[i][j] {
                wv.push((format!("w{i}"), format!("v{j}")));
            }
        }
    }
    let gu = vec![("g0".to_owned(), "u0".to_owned())];
    let store = InteractionStore::build(&ui, &ii, &gu).unwrap();
    let records = [
        AuxRecords { from: "user".into(), to: "video".into(), pairs: uw },
        AuxRecords { from: "video".into(), to: "item".into(), pairs: wv },
    ];
    let aux = AuxRelations::build(&store.users, &store.items, &records).unwrap();
    store.with_aux(aux)
}


/// Multi-hop reachability of a store built from `raw` against dense products.
pub fn check_multi_hop(raw: &RawStore, depth: usize) -> Result<(), TestCaseError> {
    let (ui, ii, gu) = labels(raw);
    let mut store = InteractionStore::build(&ui, &ii, &gu).unwrap();
    store.derive_multi_hop(depth).unwrap();
    let (us, vs, gs) = by_label(&store);
    let (n, m, k) = (raw.n_users, raw.n_items, raw.groups.len());

    let mut vv = raw.vv.clone();
    for (i, row) in vv.iter_mut().enumerate() {
        row[i] = false;
    }
    let closure = closure_oracle(&vv, depth);
    let uvv = dense_product(&raw.uv, &closure);
    let gv: Dense = raw
        .groups
        .iter()
        .map(|members| (0..m).map(|v| members.iter().any(|&u| raw.uv[u][v])).collect())
        .collect();
    let gvv = dense_product(&gv, &closure);

    prop_assert_eq!(relabel(&store.closure, &vs, &vs, m, m), closure);
    prop_assert_eq!(relabel(&store.y_uvv, &us, &vs, n, m), uvv);
    prop_assert_eq!(relabel(&store.y_gv, &gs, &vs, k, m), gv);
    prop_assert_eq!(relabel(&store.y_gvv, &gs, &vs, k, m), gvv);
    prop_assert!(store.groups_consistent());
    Ok(())
}

/// Incidence of all four standard paths against exhaustive typed walks.
pub fn check_path_incidence(h: &Hin) -> Result<(), TestCaseError> {
    let store = hin_store(h);
    let walker = Walker::new(h);
    let has_videos = store.aux.entity_ids("video").is_some_and(|m| !m.is_empty());
    for label in ["P1", "PP1", "P2", "PP2"] {
        let spec = PathSpec::standard(label).unwrap();
        let got = enumerate_path_incidence(&store, &spec, &store.aux);
        if label.ends_with('2') && !has_videos {
            prop_assert!(got.is_err());
            continue;
        }
        let got = got.unwrap();
        let center = spec.center();
        for u in 0..store.n_users() {
            let user = store.users.label(u);
            let walks = walker.walks(&spec, user);
            match (&got, spec.dependency_position) {
                (PathIncidence::Items(rows), None) => {
                    let want: BTreeSet<&str> = walks.iter().map(|w| w[center].as_str()).collect();
                    let have: BTreeSet<&str> = rows[u].iter().map(|&v| store.items.label(v as usize)).collect();
                    prop_assert_eq!(have, want, "{} {}", label, user);
                }
                (PathIncidence::Pairs(rows), Some(k)) => {
                    let want: BTreeSet<(&str, &str)> =
                        walks.iter().map(|w| (w[k].as_str(), w[k + 1].as_str())).collect();
                    let have: BTreeSet<(&str, &str)> = rows[u]
                        .iter()
                        .map(|&(i, j)| (store.items.label(i as usize), store.items.label(j as usize)))
                        .collect();
                    prop_assert_eq!(have, want, "{} {}", label, user);
                }
                _ => prop_assert!(false, "{label}: wrong incidence kind"),
            }
        }
    }
    Ok(())
}

/// Rank as `1 + #{better candidates}`, with ties going to the lower id.
pub fn oracle_rank(scores: &[f64], cands: &[u32], item: u32) -> usize {
    let s = scores[item as usize];
    1 + cands
        .iter()
        .filter(|&&c| scores[c as usize] > s || (scores[c as usize] == s && c < item))
        .count()
}

#[derive(Debug, Clone)]
pub struct Case {
    pub scores: Vec<f64>,
    pub train: Vec<u32>,
    pub held_out: u32,
}

pub fn case() -> impl Strategy<Value = Case> {
    (5usize..40).prop_flat_map(|m| {
        (
            // few distinct values, so ties are common
            prop::collection::vec((0i32..6).prop_map(f64::from), m),
            prop::collection::btree_set(0..m as u32, 0..m / 2),
            0..m as u32,
        )
            .prop_filter_map("held-out item in training row", |(scores, train, held)| {
                (!train.contains(&held)).then(|| Case {
                    scores,
                    train: train.into_iter().collect(),
                    held_out: held,
                })
            })
    })
}

/// HR@N and NDCG@N of the library against a brute-force count, to `tol`.
pub fn check_metrics(cases: &[Case], tol: f64) -> Result<(), TestCaseError> {
    let mut instances = Vec::new();
    let mut rankings = Vec::new();
    let mut ranks = Vec::new();
    let mut oracle = Vec::new();
    for (g, c) in cases.iter().enumerate() {
        let cands = candidates(c.scores.len(), &c.train);
        prop_assert!(cands.iter().all(|v| !c.train.contains(v)));
        let ranking = rank_items(&c.scores, &cands);
        let r = rank_of(&c.scores, &cands, c.held_out);
        prop_assert_eq!(ranking.iter().position(|&v| v == c.held_out).unwrap() + 1, r);
        let want = oracle_rank(&c.scores, &cands, c.held_out);
        prop_assert_eq!(r, want);
        instances.push(EvalInstance { group: g, item: c.held_out });
        rankings.push(ranking);
        ranks.push(r);
        oracle.push(want);
    }
    let report = EvalReport::from_ranks("full", &ranks, &[5, 10, 20]).unwrap();
    for n in [5usize, 10, 20] {
        let hr = oracle.iter().filter(|&&r| r <= n).count() as f64 / oracle.len() as f64;
        let ndcg = oracle
            .iter()
            .map(|&r| if r <= n { 1.0 / ((r + 1) as f64).log2() } else { 0.0 })
            .sum::<f64>()
            / oracle.len() as f64;
        prop_assert!((hr_at_n(&instances, &rankings, n).unwrap() - hr).abs() <= tol);
        prop_assert!((ndcg_at_n(&instances, &rankings, n).unwrap() - ndcg).abs() <= tol);
        prop_assert!((report.hr[&n] - hr).abs() <= tol);
        prop_assert!((report.ndcg[&n] - ndcg).abs() <= tol);
    }
    Ok(())
}

/// Micro-instance inputs, or a small synthetic bundle's.
pub fn small_inputs(store_seed: Option<u64>) -> ModelInputs {
    let bundle = match store_seed {
        None => micro_bundle(),
        Some(seed) => generate_synthetic(&SyntheticSpec { n_users: 40, n_items: 20, n_groups: 8, seed, ..Default::default() })
            .unwrap(),
    };
    let store = bundle.build_store(1).unwrap();
    let specs = [PathSpec::standard("P1").unwrap(), PathSpec::standard("PP1").unwrap()];
    ModelInputs::from_store(&store, &specs, TargetMode::Merged).unwrap()
}

pub fn init_params(inputs: &ModelInputs, dim: usize, seed: u64) -> ModelParams {
    let spec = ModelSpec {
        dim,
        n_users: inputs.n_users,
        n_items: inputs.n_items,
        explicit_paths: inputs.explicit_labels.clone(),
        implicit_paths: inputs.implicit_labels.clone(),
        aggregator: AggregatorKind::Attention,
        branches: Branches::default(),
    };
    ModelParams::init(spec, &mut stage_rng(seed, 0)).unwrap()
}

fn zero_where(p: &mut ModelParams, keep: impl Fn(&str) -> bool) {
    for x in p.params.iter_mut().filter(|x| !keep(&x.name)) {
        x.value.fill(0.0);
    }
}

/// Largest `|p̂_u − (p̂_explicit + p̂_implicit)/2|` and `|η − 1/2|` over all
/// users, with the fusion parameters zeroed.
pub fn zero_fusion_deviation(store_seed: Option<u64>, seed: u64) -> (f64, f64) {
    let inputs = small_inputs(store_seed);
    let mut p = init_params(&inputs, 8, seed);
    zero_where(&mut p, |n| !n.starts_with("fuse."));
    let items = ItemEmbeddings::compute(&p, &inputs);
    let (mut hat, mut eta) = (0.0f64, 0.0f64);
    for u in 0..inputs.n_users {
        let st = forward_user(&p, &inputs, &items, u, None);
        for ((h, a), b) in st.hat.iter().zip(st.hat_explicit()).zip(st.hat_implicit()) {
            hat = hat.max((h - 0.5 * (a + b)).abs());
        }
        for e in &st.eta {
            eta = eta.max((e - 0.5).abs());
        }
    }
    (hat, eta)
}

/// Largest difference between attention and meanpool aggregation, in the
/// group vector and in the member weights, with the aggregator zeroed.
pub fn zero_aggregator_deviation(seed: u64) -> (f64, f64) {
    let inputs = small_inputs(Some(seed));
    let mut p = init_params(&inputs, 8, seed);
    zero_where(&mut p, |n| !n.starts_with("agg."));
    let items = ItemEmbeddings::compute(&p, &inputs);
    let hats: Vec<Vec<f64>> = (0..inputs.n_users).map(|u| forward_user(&p, &inputs, &items, u, None).hat).collect();
    let (mut r, mut gamma) = (0.0f64, 0.0f64);
    for g in 0..inputs.n_groups() {
        let refs: Vec<&[f64]> = inputs.groups.members(g).iter().map(|&u| hats[u].as_slice()).collect();
        let att = aggregate(&p, &refs).unwrap();
        let mean = meanpool_aggregate(&refs).unwrap();
        for (a, b) in att.r.iter().zip(&mean.r) {
            r = r.max((a - b).abs());
        }
        for (a, b) in att.gamma.iter().zip(&mean.gamma) {
            gamma = gamma.max((a - b).abs());
        }
    }
    (r, gamma)
}

/// Per kind of normalised vector: how many were seen and the worst
/// deviation of a sum from 1.
#[derive(Default)]
pub struct SumCheck {
    pub worst: Mutex<BTreeMap<&'static str, (usize, f64)>>,
}

impl WeightObserver for SumCheck {
    fn observe(&self, kind: WeightKind, weights: &[f64]) {
        let name = match kind {
            WeightKind::Alpha => "alpha",
            WeightKind::Beta => "beta",
            WeightKind::Gamma => "gamma",
            WeightKind::Pi => "pi",
        };
        let dev = (weights.iter().sum::<f64>() - 1.0).abs();
        let mut w = self.worst.lock().unwrap();
        let e = w.entry(name).or_insert((0, 0.0));
        e.0 += 1;
        e.1 = e.1.max(dev);
    }
}

/// Values, Adam moments and step counts; gradient buffers are scratch space.
pub fn same_weights(a: &ModelParams, b: &ModelParams) -> Result<(), String> {
    if a.spec != b.spec {
        return Err("model specs differ".into());
    }
    for (x, y) in a.params.iter().zip(&b.params) {
        if !(x.value == y.value && x.adam_m == y.adam_m && x.adam_v == y.adam_v && x.steps == y.steps) {
            return Err(format!("{} differs", x.name));
        }
    }
    Ok(())
}

/// Means of consecutive non-overlapping windows of `w` values; a trailing
/// partial window is dropped.
pub fn window_means(xs: &[f64], w: usize) -> Vec<f64> {
    xs.chunks_exact(w).map(|c| c.iter().sum::<f64>() / w as f64).collect()
}
