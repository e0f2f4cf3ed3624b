use planlens_core::contrastive::{
    classify_trajectories, explain, ActionRef, Behavior, ContrastiveQuery, Rejoin, Strategy,
};
use planlens_core::decimal::Decimal;
use planlens_core::ground::GroundTask;
use planlens_core::pddl::{parse_domain, parse_problem};
use planlens_core::plan::{parse_plan, TimedPlan};
use planlens_core::planner::PlannerConfig;
use planlens_core::sim::{state_at, trajectory, validate};

fn fixture(name: &str) -> String {
    std::fs::read_to_string(format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn rooms() -> (GroundTask, TimedPlan) {
    let d = parse_domain(&fixture("rooms-domain.pddl")).unwrap();
    let t = GroundTask::new(&d, &parse_problem(&fixture("rooms-problem.pddl"), &d).unwrap()).unwrap();
    (t, parse_plan(&fixture("rooms-plan.txt")).unwrap())
}

fn detour(to: &str, strategy: Strategy) -> ContrastiveQuery {
    ContrastiveQuery { step: 1, suggested: ActionRef::new("move", &["r2", to]), strategy, window: None }
}

#[test]
fn base_plan_is_valid() {
    let (t, p) = rooms();
    assert!(validate(&t, &p).valid);
    assert_eq!(t.actions().len(), 7);
}

#[test]
fn stepping_back_is_returns_immediately() {
    let (t, p) = rooms();
    // an external planner that walks straight back through the door it came in by
    let config = PlannerConfig::external(
        "printf '0: (move r5 r2)\\n0.001: (move r2 r3)\\n0.002: (move r3 r4)\\n' > {plan} # {domain} {problem}",
    );
    let r = explain(&t, &p, &detour("r5", Strategy::AfterAction), &config).unwrap();
    assert_eq!(r.behavior, Behavior::ReturnsImmediately, "{:?}", r.plan);
    assert!(validate(&t, r.plan.as_ref().unwrap()).valid);
}

#[test]
fn forbidding_the_previous_state_yields_a_rejoin() {
    let (t, p) = rooms();
    let r = explain(&t, &p, &detour("r5", Strategy::AfterAction), &PlannerConfig::default()).unwrap();
    let plan = r.plan.unwrap();
    assert_eq!(plan.steps()[2].label(), "(move r5 r3)");
    assert_eq!(r.behavior, Behavior::RejoinsOriginal);
    // both plans continue with (move r3 r4)
    assert_eq!(r.rejoin, Some(Rejoin { new_step: 3, original_step: 2 }));
    assert_eq!(plan.steps()[3].label(), p.steps()[2].label());
}

#[test]
fn dead_end_gives_no_plan() {
    let (t, p) = rooms();
    for strategy in [Strategy::AfterAction, Strategy::Segments, Strategy::FromInitial] {
        let r = explain(&t, &p, &detour("r6", strategy), &PlannerConfig::default()).unwrap();
        assert_eq!(r.behavior, Behavior::NoPlan, "{strategy}");
        assert!(r.plan.is_none());
        assert!(r.reason.is_some());
    }
}

#[test]
fn driverlog_single_truck_plan_is_a_new_route() {
    let d = parse_domain(&fixture("driverlog-domain.pddl")).unwrap();
    let t = GroundTask::new(&d, &parse_problem(&fixture("driverlog-problem.pddl"), &d).unwrap()).unwrap();
    let original = parse_plan(&fixture("plan-original.txt")).unwrap();
    let single = parse_plan(&fixture("plan-after-action.txt")).unwrap();
    let idx = original.steps().iter().position(|s| s.label() == "(load-truck p1 t2 a)").unwrap();
    let before = state_at(&t, &original, idx).unwrap();
    let user = single.steps().iter().position(|s| s.label() == "(load-truck p1 t1 a)").unwrap();
    let end = single.steps()[user].end();
    let (b, at) = classify_trajectories(
        &trajectory(&t, &original).unwrap(),
        &trajectory(&t, &single).unwrap(),
        &before,
        (end, end + Decimal::from_int(30)),
    );
    assert_eq!((b, at), (Behavior::NewRoute, None));
}

#[test]
fn classification_depends_only_on_trajectories() {
    let (t, p) = rooms();
    let traj = trajectory(&t, &p).unwrap();
    let before = state_at(&t, &p, 1).unwrap();
    // a plan compared with itself rejoins at once
    let (b, at) = classify_trajectories(&traj, &traj, &before, (Decimal::from_millis(1), Decimal::from_millis(2)));
    assert_eq!(b, Behavior::RejoinsOriginal);
    assert_eq!(at, Some((2, 2)));
}
