use assimlab_core::audience::{CountBackend, CountRequest};
use assimlab_core::catalog::{InterestCatalog, PopulationSpec};
use assimlab_core::metrics::{assimilation_ratios, filter_interests, interest_ratios, FilterOptions};
use assimlab_core::simulator::{generate_world, oracle_assimilation, presets, DeclarationMode, SyntheticWorld};

fn specs() -> [PopulationSpec; 3] {
    [
        PopulationSpec::new("Expats").home_country("US").expat_from("MX"),
        PopulationSpec::new("Destination natives").home_country("US").non_expat(),
        PopulationSpec::new("Source natives").home_country("MX").non_expat(),
    ]
}

fn ratios_from_counts(world: &SyntheticWorld, spec: &PopulationSpec, catalog: &InterestCatalog) -> assimlab_core::metrics::InterestRatioVector {
    let counts: Vec<(&str, u64)> = catalog
        .ids()
        .map(|id| {
            let request = CountRequest {
                targeting: spec.targeting.clone(),
                interest: Some(id.to_string()),
            };
            (id, world.count(&request).unwrap().count)
        })
        .collect();
    interest_ratios(&spec.label, &counts, catalog).unwrap()
}

#[test]
fn counts_reproduce_planted_ratios() {
    for seed in 0..5 {
        let scenario = presets::random_planted(8 + 6 * seed as usize, seed);
        let world = generate_world(&scenario, seed).unwrap();
        let catalog = InterestCatalog::from_ids(&scenario.interests).unwrap();
        let [expat, dest, source] = specs();
        let e = ratios_from_counts(&world, &expat, &catalog);
        let d = ratios_from_counts(&world, &dest, &catalog);
        let s = ratios_from_counts(&world, &source, &catalog);
        let filter = filter_interests(&d, &s, 50.0, FilterOptions::default()).unwrap();
        let report = assimilation_ratios(&e, &d, Some(&s), &filter).unwrap();
        let oracle = oracle_assimilation(&world, &expat, &dest, &source, &catalog, 50.0).unwrap();
        assert_eq!(filter.kept, oracle.filter.kept);
        let planted = &scenario.expats[0].log_ar;
        for row in &report.rows {
            let want = planted[&row.interest].exp();
            assert!((row.ar - want).abs() / want < 1e-12, "{}: {} vs {want}", row.interest, row.ar);
            assert!((row.ar - oracle.ratios[&row.interest]).abs() / want < 1e-12);
        }
    }
}

#[test]
fn stochastic_counts_equal_person_enumeration() {
    let mut scenario = presets::random_planted(6, 11);
    scenario.mode = DeclarationMode::Stochastic;
    for group in &mut scenario.natives {
        group.size = Some(700);
    }
    for group in &mut scenario.expats {
        group.size = Some(500);
    }
    let world = generate_world(&scenario, 11).unwrap();
    for spec in specs() {
        let group = (0..world.subgroups().len())
            .find(|&g| world.group_matches(g, &spec.targeting))
            .unwrap();
        let size = world.subgroups()[group].size;
        let total = world
            .raw_count(&CountRequest {
                targeting: spec.targeting.clone(),
                interest: None,
            })
            .unwrap();
        assert_eq!(total, size);
        for id in &scenario.interests {
            let request = CountRequest {
                targeting: spec.targeting.clone(),
                interest: Some(id.clone()),
            };
            let brute = (0..size).filter(|&p| world.declares(group, id, p)).count() as u64;
            let count = world.raw_count(&request).unwrap();
            assert_eq!(count, brute, "{} / {id}", spec.label);
            assert!(count <= total);
        }
        let (a, b) = (&scenario.interests[0], &scenario.interests[1]);
        let mut both = spec.targeting.clone();
        both.interests_required = [a.clone()].into_iter().collect();
        let brute = (0..size)
            .filter(|&p| world.declares(group, a, p) && world.declares(group, b, p))
            .count() as u64;
        let request = CountRequest {
            targeting: both,
            interest: Some(b.clone()),
        };
        assert_eq!(world.raw_count(&request).unwrap(), brute);
    }
}

#[test]
fn identity_world_has_unit_ratios() {
    let scenario = presets::identity(15, 4);
    let world = generate_world(&scenario, 4).unwrap();
    let catalog = InterestCatalog::from_ids(&scenario.interests).unwrap();
    let [expat, dest, source] = specs();
    let oracle = oracle_assimilation(&world, &expat, &dest, &source, &catalog, 50.0).unwrap();
    for ar in oracle.ratios.values() {
        assert!((ar - 1.0).abs() < 1e-12);
    }
}

#[test]
fn rounded_counts_have_two_significant_digits() {
    let mut scenario = presets::random_planted(10, 2);
    scenario.rounding = Some(2);
    let world = generate_world(&scenario, 2).unwrap();
    let [expat, ..] = specs();
    for id in &scenario.interests {
        let count = world
            .count(&CountRequest {
                targeting: expat.targeting.clone(),
                interest: Some(id.clone()),
            })
            .unwrap()
            .count;
        let digits = count.to_string().trim_end_matches('0').len();
        assert!(digits <= 2, "{count}");
    }
}
