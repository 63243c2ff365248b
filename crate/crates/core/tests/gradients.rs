use grouprec::hin::PathSpec;
use grouprec::io::micro_bundle;
use grouprec::model::{
    group_batch, user_batch, AggregatorKind, Branches, ModelInputs, ModelParams, ModelSpec, TargetMode,
};
use grouprec::nn::{grad_check, GradCheckReport};
use grouprec::train::stage_rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;
/// About ten times the spacing of central differences at |L| ≈ 1.4, h = 1e-5.
const ABS_FLOOR: f64 = 1e-10;

fn micro(targets: TargetMode) -> ModelInputs {
    let store = micro_bundle().build_store(1).unwrap();
    let specs = [PathSpec::standard("P1").unwrap(), PathSpec::standard("PP1").unwrap()];
    ModelInputs::from_store(&store, &specs, targets).unwrap()
}

fn params(inputs: &ModelInputs, aggregator: AggregatorKind, branches: Branches, seed: u64) -> ModelParams {
    let spec = ModelSpec {
        dim: 5,
        n_users: inputs.n_users,
        n_items: inputs.n_items,
        explicit_paths: inputs.explicit_labels.clone(),
        implicit_paths: inputs.implicit_labels.clone(),
        aggregator,
        branches,
    };
    ModelParams::init(spec, &mut stage_rng(seed, 0)).unwrap()
}

fn check_user(inputs: &ModelInputs, branches: Branches, seed: u64) -> GradCheckReport {
    let users: Vec<usize> = (0..inputs.n_users).collect();
    let mut p = params(inputs, AggregatorKind::Attention, branches, seed);
    let (_, g) = user_batch(&p, inputs, &users, None);
    let analytic = g.to_dense(&p);
    grad_check(&mut p, &analytic, |p| user_batch(p, inputs, &users, None).0, H, TOL)
}

fn check_group(inputs: &ModelInputs, aggregator: AggregatorKind, seed: u64) -> GradCheckReport {
    let groups: Vec<usize> = (0..inputs.n_groups()).collect();
    let mut p = params(inputs, aggregator, Branches::default(), seed);
    let (_, g) = group_batch(&p, inputs, &groups, None, None).unwrap();
    let analytic = g.to_dense(&p);
    grad_check(
        &mut p,
        &analytic,
        |p| group_batch(p, inputs, &groups, None, None).unwrap().0,
        H,
        TOL,
    )
}

fn assert_clean(r: &GradCheckReport, what: &str) {
    let worst: Vec<_> = r.failures().map(|c| (&c.name, c.max_rel_error, c.max_abs_error)).collect();
    assert_eq!(r.mixed_violations(ABS_FLOOR), 0, "{what}: {worst:?}");
}

#[test]
fn micro_instance_shape() {
    let inputs = micro(TargetMode::Merged);
    assert_eq!((inputs.n_users, inputs.n_items, inputs.n_groups()), (3, 4, 2));
    assert_eq!(inputs.explicit_labels, vec!["P1"]);
    assert_eq!(inputs.implicit_labels, vec!["PP1"]);
    for u in 0..3 {
        assert!(!inputs.explicit[0][u].is_empty());
        assert!(inputs.implicit[0][u].len() >= 2, "user {u} has a single implicit target");
    }
}

#[test]
fn user_gradients_match_finite_differences() {
    let inputs = micro(TargetMode::Merged);
    for seed in 0..10 {
        let r = check_user(&inputs, Branches::default(), seed);
        assert_clean(&r, &format!("user seed {seed}"));
    }
}

#[test]
fn group_gradients_match_finite_differences() {
    let inputs = micro(TargetMode::Merged);
    for seed in 0..10 {
        for agg in [AggregatorKind::Attention, AggregatorKind::Meanpool] {
            let r = check_group(&inputs, agg, seed);
            assert_clean(&r, &format!("group {agg:?} seed {seed}"));
        }
    }
}

#[test]
fn ablated_branches_and_explicit_targets() {
    let inputs = micro(TargetMode::Explicit);
    for branches in [
        Branches { explicit: true, implicit: false },
        Branches { explicit: false, implicit: true },
    ] {
        for seed in 0..4 {
            assert_clean(&check_user(&inputs, branches, seed), &format!("{branches:?} seed {seed}"));
        }
    }
}

#[test]
fn most_entries_meet_the_relative_tolerance() {
    // the relative criterion alone only fails on entries at the noise floor
    let inputs = micro(TargetMode::Merged);
    let r = check_user(&inputs, Branches::default(), 2);
    assert!(r.passed(), "max rel {:e}", r.max_rel_error());
    for c in &r.params {
        assert!(c.max_abs_error < ABS_FLOOR, "{} abs {:e}", c.name, c.max_abs_error);
    }
}

#[test]
fn corrupted_gradient_is_detected() {
    let inputs = micro(TargetMode::Merged);
    let users = [0usize, 1, 2];
    let mut p = params(&inputs, AggregatorKind::Attention, Branches::default(), 0);
    let (_, g) = user_batch(&p, &inputs, &users, None);
    let mut analytic = g.to_dense(&p);
    let k = p.params.iter().position(|x| x.name == "fuse.W").unwrap();
    analytic[k].data_mut()[0] += 1e-3;
    let r = grad_check(&mut p, &analytic, |p| user_batch(p, &inputs, &users, None).0, H, TOL);
    assert!(!r.passed());
    assert!(r.mixed_violations(ABS_FLOOR) >= 1);
    let loud: Vec<&str> = r
        .params
        .iter()
        .filter(|c| c.max_abs_error >= ABS_FLOOR)
        .map(|c| c.name.as_str())
        .collect();
    assert_eq!(loud, vec!["fuse.W"]);
}
