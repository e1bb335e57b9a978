use oscnet::mapping::forecast_partial;
use oscnet::simulator::{simulate_coupled, InitialState};
use oscnet::solver::{CoupledCanonical, CoupledCombined};
use oscnet::training::{fit_partial, FitConfig, MappingMode, MappingSetup, PartialModel};
use oscnet::types::{combined_init, CombinedInit};
use oscnet::{CanonicalWeights, Padding, Trajectory};

const DELTA: f64 = 0.0667;

fn truth() -> [CanonicalWeights<f64>; 2] {
    [
        CanonicalWeights::new(1.5, 0.5, 14.0).unwrap(),
        CanonicalWeights::new(0.9, 0.3, 35.0).unwrap(),
    ]
}

fn init() -> [CanonicalWeights<f64>; 2] {
    let w = CanonicalWeights::new(1.0, 1.0, 15.0).unwrap();
    [w, w]
}

fn series(n: usize) -> (Trajectory<f64>, Trajectory<f64>) {
    simulate_coupled(&truth(), &InitialState::coupled_default(), DELTA, n).unwrap()
}

fn setup(kernel: usize, padding: Padding) -> MappingSetup {
    MappingSetup {
        mode: MappingMode::from_kernel_size(kernel).unwrap(),
        padding,
        stencil_accuracy: 5,
    }
}

fn canonical(kernel: usize, padding: Padding) -> PartialModel<f64, CoupledCanonical<f64>> {
    let x1 = series(60).0;
    let solver = CoupledCanonical {
        weights: init(),
        delta: DELTA,
    };
    fit_partial(solver, &x1, &setup(kernel, padding), &FitConfig::default())
        .unwrap()
        .trainer
        .into_model()
}

fn crossings(a: &[f64], b: &[f64]) -> Vec<usize> {
    (1..a.len())
        .filter(|&i| (a[i] - b[i]).signum() != (a[i - 1] - b[i - 1]).signum())
        .collect()
}

fn errors(f: &Trajectory<f64>, truth: &[f64]) -> Vec<f64> {
    f.samples().iter().zip(truth).map(|(a, b)| (a - b).abs()).collect()
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

#[test]
fn shared_mapping_meets_the_hidden_channel_where_the_oscillators_cross() {
    let (x1, x2) = series(60);
    let model = canonical(1, Padding::Valid);
    let mapped = model.mapped(&x1).unwrap();
    let off = x1.len() - mapped.len();
    let obs = crossings(&x1.samples()[off..], &x2.samples()[off..]);
    let map = crossings(mapped.samples(), &x2.samples()[off..]);
    assert!(!obs.is_empty());
    for c in &obs {
        assert!(
            map.iter().any(|m| m.abs_diff(*c) <= 1),
            "no mapped crossing near {c}: {map:?}"
        );
    }
    // the learned map has a larger amplitude than the true hidden trajectory
    let amp = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    assert!(amp(mapped.samples()) > amp(&x2.samples()[off..]));
}

#[test]
fn shared_canonical_run_reproduces_the_published_subset() {
    let m = canonical(1, Padding::Valid);
    let p = m.solver().weights;
    assert_eq!((p[0].spring, p[1].spring), (15.0, 15.0));
    assert_eq!((p[1].mass, p[1].damping), (1.0, 1.0));
    // published: m1 = 1.535, b1 = 0.216
    assert!((p[0].mass - 1.535).abs() / 1.535 < 0.05, "m1 {}", p[0].mass);
    assert!((p[0].damping - 0.216).abs() / 0.216 < 0.15, "b1 {}", p[0].damping);
}

#[test]
fn inner_feedback_loop_stabilizes_the_shared_forecast() {
    let (x1, _) = series(80);
    let train = x1.head(60).unwrap();
    let truth = &x1.samples()[60..70];
    let m = canonical(1, Padding::Valid);
    let amp = train.samples().iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let frozen = errors(&forecast_partial(&m, &train, 10, false).unwrap(), truth);
    let ifl = errors(&forecast_partial(&m, &train, 10, true).unwrap(), truth);
    assert!(frozen[..4].iter().all(|e| e / amp < 0.2));
    assert!(frozen[4] / amp > 0.2);
    assert!(rms(&ifl) < rms(&frozen));
}

#[test]
fn wide_valid_kernel_forecasts_more_stably_than_the_shared_kernel() {
    let (x1, _) = series(80);
    let train = x1.head(60).unwrap();
    let truth = &x1.samples()[60..70];
    let shared = canonical(1, Padding::Valid);
    let wide = canonical(25, Padding::Valid);
    let e_shared = rms(&errors(&forecast_partial(&shared, &train, 10, true).unwrap(), truth));
    let e_wide = rms(&errors(&forecast_partial(&wide, &train, 10, true).unwrap(), truth));
    assert!(e_wide < e_shared, "wide {e_wide} vs shared {e_shared}");
    // m2 and b2 never enter the observed row
    assert_eq!(
        (wide.solver().weights[1].mass, wide.solver().weights[1].damping),
        (1.0, 1.0)
    );
}

#[test]
fn causal_padding_corrupts_the_early_mapping() {
    let (x1, x2) = series(60);
    let model = canonical(1, Padding::Valid);
    let valid_params = model.mapping_params();
    let causal_params = valid_params.clone().with_padding(Padding::Causal);
    let bank = model.bank();
    let causal = oscnet::mapping::map_to_hidden(&x1, &causal_params, bank).unwrap();
    let valid = oscnet::mapping::map_to_hidden(&x1, &valid_params, bank).unwrap();
    let off = x1.len() - valid.len();
    let head_err = (causal.samples()[0] - x2.samples()[0]).abs();
    let valid_err = (valid.samples()[0] - x2.samples()[off]).abs();
    assert!(head_err > 10.0 * valid_err);
    assert_eq!(&causal.samples()[off..], valid.samples());
}

#[test]
fn combined_partial_fits_freeze_the_hidden_row() {
    let x1 = series(60).0;
    let i = init();
    let u0 = combined_init([&i[0], &i[1]], &truth()[1], DELTA, CombinedInit::TableConsistent).unwrap();
    for (kernel, padding) in [(1, Padding::Valid), (25, Padding::Valid), (25, Padding::Causal)] {
        let out = fit_partial(
            CoupledCombined { weights: u0 },
            &x1,
            &setup(kernel, padding),
            &FitConfig::default(),
        )
        .unwrap();
        let l = &out.report.learned;
        assert_eq!(l[1].to_bits(), u0.param_b.to_bits());
        assert_eq!(l[3].to_bits(), u0.param_d.to_bits());
        if kernel == 1 {
            // published: param_a 0.065, param_e 1.999
            assert!((l[4] - 2.0).abs() / 2.0 < 0.05);
            assert!((l[0] - 0.065).abs() / 0.065 < 0.05);
        }
    }
}
