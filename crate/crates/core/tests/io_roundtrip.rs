use mmsbm::io::ratings::{parse_ratings, write_ratings, RatingFormat};
use mmsbm::io::snapshot::{read_snapshot, write_snapshot, ModelSnapshot};
use mmsbm::io::synthetic::{generate_synthetic, BlockSpec, MembershipSpec, SyntheticSpec};
use mmsbm::{ensemble_fit, log_likelihood, Dataset, FitConfig, RatingScale};

#[test]
fn snapshot_preserves_likelihood_bits() {
    let (data, _) = generate_synthetic(&SyntheticSpec::planted(40, 40, 3, 10, 2)).unwrap();
    let config = FitConfig {
        max_iterations: 25,
        ..FitConfig::with_groups(3, 3)
    };
    let ens = ensemble_fit(&data, &config, 3, 7).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.snap");
    write_snapshot(&ModelSnapshot::from_ensemble(&ens, &data), &path).unwrap();
    let loaded = read_snapshot(&path).unwrap();
    assert_eq!(loaded.user_ids, data.user_ids());
    let back = loaded.to_ensemble().unwrap();
    for run in 0..3 {
        let before = log_likelihood(&ens.run(run).params, &data).unwrap();
        let after = log_likelihood(&back.run(run).params, &data).unwrap();
        assert_eq!(before.to_bits(), after.to_bits());
        assert_eq!(back.seed(run), ens.seed(run));
    }
    assert_eq!(back.predict(Some(4), None), ens.predict(Some(4), None));
}

#[test]
fn ratings_file_round_trip() {
    let (data, _) = generate_synthetic(&SyntheticSpec::planted(20, 15, 2, 5, 1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for format in [RatingFormat::movielens_100k(), RatingFormat::movielens_10m(), RatingFormat::csv()] {
        let path = dir.path().join("r.txt");
        write_ratings(&path, &data.to_triples(), &format).unwrap();
        let triples = parse_ratings(&path, &format, data.scale()).unwrap();
        let again = Dataset::from_triples(&triples, data.scale().clone()).unwrap();
        assert_eq!(again.links(), data.links());
        assert_eq!(again.user_ids(), data.user_ids());
    }
}

#[test]
fn single_block_generator_matches_its_histogram() {
    let target = [0.1, 0.2, 0.3, 0.25, 0.15];
    let spec = SyntheticSpec {
        n_users: 400,
        n_items: 300,
        user_groups: 1,
        item_groups: 1,
        scale: RatingScale::integer(1, 5).unwrap(),
        theta: MembershipSpec::Pure,
        eta: MembershipSpec::Pure,
        p: BlockSpec::Explicit(target.to_vec()),
        ratings_per_user: 50,
        seed: 13,
    };
    let (data, truth) = generate_synthetic(&spec).unwrap();
    assert_eq!(truth.p(), &target);
    let n = data.n_ratings() as f64;
    for (count, p) in data.label_counts().iter().zip(target) {
        let sd = (n * p * (1.0 - p)).sqrt();
        assert!((*count as f64 - n * p).abs() < 5.0 * sd, "{count} vs {}", n * p);
    }
    // with one block the fit is the empirical histogram
    let fit = mmsbm::fit(&data, &FitConfig::with_groups(1, 1)).unwrap();
    for (r, count) in data.label_counts().iter().enumerate() {
        assert!((fit.params.p_at(0, 0, r) - *count as f64 / n).abs() < 1e-12);
    }
}
