mod support {
    pub mod ordering;
}

use rand::rngs::StdRng;
use rand::SeedableRng;
use support::ordering::{check_random_set, OTask, RandomHierarchy};

#[test]
fn random_sets_match_reference_order() {
    let mut rng = StdRng::seed_from_u64(0x0dd5);
    for round in 0..300 {
        let check = check_random_set(&mut rng, 64);
        assert!(check.ok(), "round {round}: {check:?}");
    }
}

#[test]
fn small_sets_exhaust_many_hierarchies() {
    let mut rng = StdRng::seed_from_u64(11);
    for round in 0..2000 {
        let check = check_random_set(&mut rng, 8);
        assert!(check.ok(), "round {round}: {check:?}");
    }
}

fn task(id: u32, ty: Option<usize>, key: u32, origin: usize) -> OTask {
    OTask {
        id,
        ty,
        key,
        origin,
        seq: id as u64 + 1,
    }
}

#[test]
fn reference_groups_child_types_under_their_parent() {
    // 0 under root, 1 and 2 under 0
    let rh = RandomHierarchy::new(vec![None, Some(0), Some(0)]);
    let tasks = vec![
        task(0, Some(1), 4, 0),
        task(1, None, 0, 0),
        task(2, Some(2), 0, 0),
        task(3, Some(1), 0, 0),
        task(4, Some(0), 1, 0),
    ];
    let order = rh.grouped_sort(&tasks, 0, false);
    assert!(rh.groups_contiguous(&order));
    let ids: Vec<u32> = order.iter().map(|t| t.id).collect();
    // type-1 tasks stay adjacent even though type 0 ranks them apart
    let p0 = ids.iter().position(|&i| i == 0).unwrap();
    let p3 = ids.iter().position(|&i| i == 3).unwrap();
    assert_eq!(p0.abs_diff(p3), 1);
}

#[test]
fn root_only_tasks_are_lifo_for_owner_and_fifo_for_thief() {
    let rh = RandomHierarchy::new(vec![None, None]);
    let tasks: Vec<OTask> = (0..5).map(|i| task(i, None, 0, 0)).collect();
    let owner: Vec<u32> = rh.grouped_sort(&tasks, 0, false).iter().map(|t| t.id).collect();
    assert_eq!(owner, vec![4, 3, 2, 1, 0]);
    let thief: Vec<u32> = rh.grouped_sort(&tasks, 1, true).iter().map(|t| t.id).collect();
    assert_eq!(thief, vec![0, 1, 2, 3, 4]);
}
