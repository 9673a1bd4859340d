use hawkes_clt::engine::{simulate_coupled_addpoint, simulate_thinning, HawkesModel};
use hawkes_clt::kernel::Kernel;
use hawkes_clt::marks::MarkDistribution;
use hawkes_clt::parallel::{map_replications, map_replications_sequential, with_threads};
use hawkes_clt::rng::stream;
use hawkes_clt::verify::{check_martingale, Variant};

fn model() -> HawkesModel {
    HawkesModel::new(Kernel::erlang(2.0, 2.0), 0.7, MarkDistribution::Rademacher).unwrap()
}

fn path_summary(i: u64) -> (u64, u64, u64) {
    let mut rng = stream(42, &[1, 2], i);
    let p = simulate_thinning(&model(), 60.0, &mut rng).unwrap();
    (p.count, p.sum.to_bits(), p.compensator.to_bits())
}

#[test]
fn parallel_and_sequential_fan_out_agree_bitwise() {
    let par = map_replications(300, path_summary);
    let seq = map_replications_sequential(300, path_summary);
    assert_eq!(par, seq);
}

#[test]
fn results_do_not_depend_on_pool_size() {
    let runs: Vec<_> = [1, 2, 5]
        .into_iter()
        .map(|t| with_threads(t, || map_replications(200, path_summary)))
        .collect();
    assert!(runs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn streams_are_addressed_not_consumed() {
    // Replication 17 is the same whether or not 0..17 were drawn first.
    let alone = path_summary(17);
    let batch = map_replications(18, path_summary);
    assert_eq!(batch[17], alone);
    assert_ne!(batch[16], alone);
}

#[test]
fn coupled_base_path_is_a_plain_path_in_law() {
    // Same seed, different consumers: only the law must match, so compare means.
    let m = model();
    let n = 4000u64;
    let plain: Vec<f64> = map_replications(n, |i| {
        let mut rng = stream(9, &[1], i);
        simulate_thinning(&m, 20.0, &mut rng).unwrap().count as f64
    });
    let coupled: Vec<f64> = map_replications(n, |i| {
        let mut rng = stream(9, &[2], i);
        simulate_coupled_addpoint(&m, 20.0, 5.0, &mut rng).unwrap().base.count as f64
    });
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
    };
    let se = ((var(&plain) + var(&coupled)) / n as f64).sqrt();
    assert!((mean(&plain) - mean(&coupled)).abs() < 4.0 * se);
}

#[test]
fn lemma_reports_repeat_under_different_pools() {
    let run = |t| {
        with_threads(t, || {
            let r = check_martingale(&model(), 10.0, &[3.0, 10.0], 2000, 3, Variant::Genuine).unwrap();
            serde_json::to_string(&r).unwrap()
        })
    };
    assert_eq!(run(1), run(4));
}
