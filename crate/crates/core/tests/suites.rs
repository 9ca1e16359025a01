use lagrograph::registry::suites::{budget_deviations, identity_deviations, transfer_corpus, MIN_TRIALS};
use lagrograph::registry::{Registry, SuiteContext};
use lagrograph::analysis::HolderSampling;

fn run(name: &str, trials: usize) -> lagrograph::registry::SuiteSummary {
    let registry = Registry::default();
    let suite = registry.suite(name).unwrap();
    suite.run(&SuiteContext { seed: 42, trials }).unwrap()
}

#[test]
fn registry_lists_the_three_suites() {
    assert_eq!(Registry::default().suite_names(), ["identities", "transfer", "convergence"]);
}

#[test]
fn too_few_trials_are_rejected() {
    let registry = Registry::default();
    let ctx = SuiteContext { seed: 1, trials: MIN_TRIALS - 1 };
    assert!(registry.suite("identities").unwrap().run(&ctx).is_err());
}

#[test]
fn identity_suite_passes_at_ten_thousand_trials() {
    let summary = run("identities", 10_000);
    for c in &summary.checks {
        println!("{} {:e}", c.name, c.measured);
    }
    assert!(summary.passed, "{summary:#?}");
}

#[test]
fn identity_deviations_are_reproducible() {
    assert_eq!(identity_deviations(3, 500).unwrap(), identity_deviations(3, 500).unwrap());
    let b = budget_deviations().unwrap();
    assert_eq!(b.ordering_violations, 0);
}

#[test]
fn transfer_suite_passes() {
    let summary = run("transfer", 100);
    for c in &summary.checks {
        println!("{} {:e}", c.name, c.measured);
    }
    assert!(summary.passed, "{summary:#?}");
}

#[test]
fn transfer_corpus_quadratics_have_vanishing_seminorms() {
    let cases = transfer_corpus(5, 3, &HolderSampling::default()).unwrap();
    assert_eq!(cases.len(), 2 + 3 + 2);
    for c in cases.iter().filter(|c| c.name.starts_with("quadratic_")) {
        assert!(c.check.passed() && c.theta_ratio.is_none(), "{c:?}");
    }
    let manufactured = cases.last().unwrap();
    println!("{manufactured:?}");
    assert!(manufactured.theta_ratio.unwrap() < manufactured.budget.l2.sqrt());
}
