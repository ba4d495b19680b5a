use fairdp::dataset::{synth_generate, SynthConfig};
use fairdp::metrics;
use fairdp::postprocess;

fn planted(bias: f64) -> fairdp::Dataset {
    synth_generate(&SynthConfig {
        seed: 7,
        m: 2000,
        num_groups: 2,
        dim: 4,
        bias,
    })
    .unwrap()
}

/// The reference synthetic set must give the unconstrained stump a visible
/// false-positive gap, otherwise the fairness constraints never bind.
#[test]
fn planted_bias_is_visible_to_erm() {
    let data = planted(0.3);
    assert!(data.validate().is_clean());
    let base = postprocess::train_base(&data).unwrap();
    let rates = metrics::group_rates(&metrics::soft(&base), &data, true).unwrap();
    println!("ERM stump: dFP = {:.4}, dTP = {:.4}", rates.max_delta_fp(), rates.max_delta_tp());
    assert!(rates.max_delta_fp() > 0.05);
}

#[test]
fn no_bias_gives_small_gaps() {
    let data = planted(0.0);
    let base = postprocess::train_base(&data).unwrap();
    let rates = metrics::group_rates(&metrics::soft(&base), &data, true).unwrap();
    assert!(rates.max_delta_fp() < 0.05, "{}", rates.max_delta_fp());
}
