use brownian_fracture::experiments::{
    estimate_constant, estimate_loss, full_report, plane_hitting_check, Budgets, ConstantMode, LossMode,
};
use brownian_fracture::spectral::BoundConstants;
use brownian_fracture::RngStream;

fn tiny() -> Budgets {
    Budgets {
        name: "tiny".into(),
        n_traces: 8,
        n_points: 30,
        n_rest: 10,
        n_constant_traces: 8,
        n_kappa_traces: 2,
        n_walkers: 100,
        n_hitting_walkers: 2000,
        ..Budgets::small()
    }
}

#[test]
fn loss_scales_as_fifth_power() {
    let b = Budgets {
        n_traces: 150,
        n_points: 100,
        n_rest: 20,
        ..Budgets::small()
    };
    let one = estimate_loss(4.0, 1.0, LossMode::Uniform, &b, &RngStream::new(21, 0)).unwrap();
    let half = estimate_loss(2.0, 0.5, LossMode::Uniform, &b, &RngStream::new(21, 1)).unwrap();
    let half = half.value.scaled(32.0);
    assert!(one.value.agrees_with(&half, 3.0), "{:?} vs {half:?}", one.value);
    assert!(one.value.mean > 0.0 && one.value.mean < one.exact);
}

#[test]
fn constants_stay_below_their_upper_bounds() {
    let b = Budgets {
        n_constant_traces: 40,
        n_points: 100,
        ..Budgets::small()
    };
    let k = BoundConstants::compute();
    let c = estimate_constant(ConstantMode::C, &b, &RngStream::new(22, 0)).unwrap();
    let cp = estimate_constant(ConstantMode::CPrime, &b, &RngStream::new(22, 1)).unwrap();
    assert!(c.value.mean > 0.0 && c.value.mean <= k.c_upper + 3.0 * c.value.std_error);
    assert!(cp.value.mean > 0.0 && cp.value.mean <= k.cp_upper + 3.0 * cp.value.std_error);
    // A path from the axis hits more of the cross-section than one from a uniform start.
    assert!(cp.value.mean > c.value.mean - 3.0 * cp.value.combined_se(&c.value));
    assert!(c.truncation_probability_bound < 5e-3);
    assert!(c.window_bias_bound < 1e-6);
}

#[test]
fn plane_hitting_bound_holds_on_short_cylinder() {
    let r = plane_hitting_check(16.0, 1.0, 20_000, &Budgets::small(), &RngStream::new(23, 0)).unwrap();
    assert!(r.entry.pass, "{:?}", r.entry);
    assert!(r.worst.mean <= r.entry.upper.unwrap());
}

#[test]
fn report_is_independent_of_worker_count() {
    let b = tiny();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| full_report(&b, &RngStream::new(7, 0)).unwrap())
    };
    let one = run(1);
    let three = run(3);
    assert_eq!(one, three);
    let names: Vec<_> = one.entries.iter().map(|e| e.name.as_str()).collect();
    assert!(names.contains(&"kappa") && names.contains(&"c") && names.contains(&"c_prime"));
    assert!(one.entries.iter().all(|e| e.inputs.get("config").is_some()));
}
