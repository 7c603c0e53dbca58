use std::f64::consts::PI;

use brownian_fracture::geometry::{contains, BallSpec, CylinderSpec, Domain, Point3, TracePolyline};
use brownian_fracture::potential::{
    capacity_estimate, fractured_rigidity, kappa_estimate, plane_hitting_probability, torsion_value,
    wos_exit_time_sample, BallObstacle, KappaConfig, NoObstacle, Tube, WosConfig,
};
use brownian_fracture::rng::RngStream;
use brownian_fracture::spectral::rigidity_cylinder;
use brownian_fracture::stats::Estimate;
use brownian_fracture::stochastic::{sample_trace, PathConfig};
use rand::Rng;

fn cfg(eps_shell: f64, eps_tube: f64) -> WosConfig {
    WosConfig {
        eps_shell,
        eps_tube,
        launch_radius: None,
        max_jumps: 1_000_000,
    }
}

#[test]
fn infinite_cylinder_torsion_at_twenty_points() {
    let d = Domain::Cylinder(CylinderSpec::infinite(1.0).unwrap());
    let c = cfg(1e-4, 0.02);
    let mut rng = RngStream::new(1, 1).rng();
    for i in 0..20 {
        let r: f64 = 0.95 * rng.random::<f64>().sqrt();
        let th: f64 = 2.0 * PI * rng.random::<f64>();
        let x = Point3::new(rng.random_range(-5.0..5.0), r * th.cos(), r * th.sin());
        let e = torsion_value(x, &d, &NoObstacle, &c, 20_000, &RngStream::new(2, i)).unwrap();
        let exact = (1.0 - r * r) / 4.0;
        assert!((e.mean - exact).abs() <= 3.0 * e.std_error + 2.0 * c.eps_shell, "{x:?}: {e:?} vs {exact}");
    }
}

#[test]
fn torsion_scales_with_radius_squared() {
    let c = cfg(1e-4, 0.02);
    let one = torsion_value(
        Point3::ORIGIN,
        &Domain::Cylinder(CylinderSpec::infinite(1.0).unwrap()),
        &NoObstacle,
        &c,
        40_000,
        &RngStream::new(3, 0),
    )
    .unwrap();
    let two = torsion_value(
        Point3::ORIGIN,
        &Domain::Cylinder(CylinderSpec::infinite(2.0).unwrap()),
        &NoObstacle,
        &c,
        40_000,
        &RngStream::new(3, 1),
    )
    .unwrap();
    assert!(two.scaled(0.25).agrees_with(&one, 3.0), "{one:?} {two:?}");
    assert!((one.mean - 0.25).abs() <= 3.0 * one.std_error + 2.0 * c.eps_shell);
}

#[test]
fn torsion_is_monotone_in_the_domain() {
    let small = CylinderSpec::finite(3.0, 0.8).unwrap();
    let big = CylinderSpec::finite(6.0, 1.0).unwrap();
    let trace = sample_trace(
        Point3::new(0.3, 0.1, 0.0),
        &Domain::Cylinder(small),
        &PathConfig::for_radius(0.8),
        &RngStream::new(4, 0),
    )
    .unwrap();
    let c = cfg(5e-4, 0.02);
    let tube = Tube::new(&trace, c.eps_tube);
    let mut rng = RngStream::new(4, 1).rng();
    let mut checked = 0;
    while checked < 10 {
        let x = Point3::new(rng.random_range(-1.5..1.5), rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8));
        if !contains(x, &small) || trace.distance(x) <= 2.0 * c.eps_tube {
            continue;
        }
        let s = RngStream::new(5, checked);
        let v1 = torsion_value(x, &Domain::Cylinder(small), &tube, &c, 4000, &s.substream(0)).unwrap();
        let v2 = torsion_value(x, &Domain::Cylinder(big), &tube, &c, 4000, &s.substream(1)).unwrap();
        assert!(v1.mean <= v2.mean + 3.0 * v1.combined_se(&v2), "{x:?}: {v1:?} vs {v2:?}");
        checked += 1;
    }
}

#[test]
fn torsion_decreases_towards_the_obstacle() {
    let d = Domain::Cylinder(CylinderSpec::infinite(1.0).unwrap());
    let seg = TracePolyline::new(vec![Point3::new(-0.5, 0.0, 0.0), Point3::new(0.5, 0.0, 0.0)], 1.0).unwrap();
    let c = cfg(1e-4, 0.05);
    let tube = Tube::new(&seg, c.eps_tube);
    let free = torsion_value(Point3::new(0.0, 0.4, 0.0), &d, &NoObstacle, &c, 20_000, &RngStream::new(6, 9)).unwrap();
    let mut last = free;
    for (k, gap) in [0.35, 0.2, 0.1, 0.03].into_iter().enumerate() {
        let x = Point3::new(0.0, c.eps_tube + gap, 0.0);
        let e = torsion_value(x, &d, &tube, &c, 20_000, &RngStream::new(6, k as u64)).unwrap();
        assert!(e.mean < last.mean - 3.0 * e.combined_se(&last), "gap {gap}: {e:?} vs {last:?}");
        last = e;
    }
    let mut rng = RngStream::new(0, 0).rng();
    assert_eq!(wos_exit_time_sample(Point3::ORIGIN, &d, &tube, &c, &mut rng).unwrap(), 0.0);
}

#[test]
fn capacity_of_balls() {
    for (k, r) in [0.25, 0.5].into_iter().enumerate() {
        let ob = BallObstacle(BallSpec::new(Point3::ORIGIN, r).unwrap());
        let c = WosConfig {
            launch_radius: Some(2.0 * r),
            ..cfg(1e-4, 0.02)
        };
        let e = capacity_estimate(&ob, &c, 100_000, &RngStream::new(7, k as u64)).unwrap();
        assert!((e.mean / (4.0 * PI * r) - 1.0).abs() < 0.02, "r={r}: {e:?}");
    }
}

#[test]
fn capacity_does_not_depend_on_launch_radius() {
    let trace = sample_trace(
        Point3::ORIGIN,
        &Domain::Ball(BallSpec::new(Point3::ORIGIN, 1.0).unwrap()),
        &PathConfig::for_radius(1.0),
        &RngStream::new(8, 0),
    )
    .unwrap();
    let c = cfg(0.002, 0.02);
    let tube = Tube::new(&trace, c.eps_tube);
    let rho = brownian_fracture::potential::launch_radius(&tube, &c).unwrap().1;
    let near = capacity_estimate(&tube, &WosConfig { launch_radius: Some(rho), ..c }, 20_000, &RngStream::new(8, 1)).unwrap();
    let far = capacity_estimate(&tube, &WosConfig { launch_radius: Some(2.0 * rho), ..c }, 40_000, &RngStream::new(8, 2)).unwrap();
    assert!(near.agrees_with(&far, 3.0), "{near:?} vs {far:?}");
}

#[test]
fn tube_capacity_is_monotone_in_eps() {
    let trace = sample_trace(
        Point3::ORIGIN,
        &Domain::Ball(BallSpec::new(Point3::ORIGIN, 1.0).unwrap()),
        &PathConfig::for_radius(1.0),
        &RngStream::new(9, 0),
    )
    .unwrap();
    let mut last: Option<Estimate> = None;
    for (k, eps) in [0.04, 0.02].into_iter().enumerate() {
        let c = cfg(eps / 10.0, eps);
        let e = capacity_estimate(&Tube::new(&trace, eps), &c, 20_000, &RngStream::new(9, 1 + k as u64)).unwrap();
        if let Some(prev) = last {
            assert!(e.mean < prev.mean - 3.0 * e.combined_se(&prev), "{e:?} vs {prev:?}");
        }
        last = Some(e);
    }
}

#[test]
fn segment_capacity_vanishes_with_eps() {
    let seg = TracePolyline::new(vec![Point3::new(-0.5, 0.0, 0.0), Point3::new(0.5, 0.0, 0.0)], 1.0).unwrap();
    let mut last = f64::INFINITY;
    for (k, eps) in [0.04, 0.02, 0.01].into_iter().enumerate() {
        let c = cfg(eps / 10.0, eps);
        let e = capacity_estimate(&Tube::new(&seg, eps), &c, 40_000, &RngStream::new(10, k as u64)).unwrap();
        assert!(e.mean < last, "eps {eps}: {e:?}");
        // Slender-body capacity of a segment of length l: about 2 pi l / ln(l / eps).
        let slender = 2.0 * PI / (1.0 / eps).ln();
        assert!(e.mean < 2.0 * slender, "eps {eps}: {e:?} vs {slender}");
        last = e.mean;
    }
}

/// `int v` for `-Lap v = 1` on the grid points of `[-1, 1]^3` not blocked,
/// with the Shortley-Weller stencil at the boundary (second order) and SOR.
fn poisson_fd(n: usize, blocked: impl Fn(Point3) -> bool) -> f64 {
    let h = 2.0 / n as f64;
    let pos = |i: usize| -1.0 + (i as f64 + 0.5) * h;
    let idx = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
    let mut free = vec![false; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                free[idx(i, j, k)] = !blocked(Point3::new(pos(i), pos(j), pos(k)));
            }
        }
    }
    struct Node {
        c: usize,
        nb: [usize; 6],
        w: [f64; 6],
        diag: f64,
    }
    let mut nodes = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let c = idx(i, j, k);
                if !free[c] {
                    continue;
                }
                let p = Point3::new(pos(i), pos(j), pos(k));
                let mut nb = [usize::MAX; 6];
                let mut frac = [1.0; 6];
                for axis in 0..3 {
                    for (side, dir) in [(0usize, -1isize), (1, 1)] {
                        let mut q = [i, j, k];
                        let t = q[axis] as isize + dir;
                        if t >= 0 && t < n as isize {
                            q[axis] = t as usize;
                            let c2 = idx(q[0], q[1], q[2]);
                            if free[c2] {
                                nb[2 * axis + side] = c2;
                                continue;
                            }
                        }
                        let unit = match axis {
                            0 => Point3::new(dir as f64, 0.0, 0.0),
                            1 => Point3::new(0.0, dir as f64, 0.0),
                            _ => Point3::new(0.0, 0.0, dir as f64),
                        };
                        let (mut lo, mut hi) = (0.0, 1.0);
                        for _ in 0..50 {
                            let mid = 0.5 * (lo + hi);
                            if blocked(p + unit * (mid * h)) {
                                hi = mid;
                            } else {
                                lo = mid;
                            }
                        }
                        frac[2 * axis + side] = hi.max(1e-6);
                    }
                }
                let mut w = [0.0; 6];
                let mut diag = 0.0;
                for axis in 0..3 {
                    let (a, b) = (frac[2 * axis], frac[2 * axis + 1]);
                    diag += 2.0 / (a * b * h * h);
                    w[2 * axis] = 2.0 / (a * (a + b) * h * h);
                    w[2 * axis + 1] = 2.0 / (b * (a + b) * h * h);
                }
                nodes.push(Node { c, nb, w, diag });
            }
        }
    }
    let mut v = vec![0.0; n * n * n];
    for _ in 0..20_000 {
        let mut change: f64 = 0.0;
        for nd in &nodes {
            let mut s = 1.0;
            for q in 0..6 {
                if nd.nb[q] != usize::MAX {
                    s += nd.w[q] * v[nd.nb[q]];
                }
            }
            let d = 1.9 * (s / nd.diag - v[nd.c]);
            v[nd.c] += d;
            change = change.max(d.abs());
        }
        if change < 1e-12 {
            break;
        }
    }
    v.iter().sum::<f64>() * h * h * h
}

#[test]
fn fractured_rigidity_matches_finite_differences() {
    let cyl = CylinderSpec::finite(2.0, 1.0).unwrap();
    let exact = rigidity_cylinder(2.0, 1.0).unwrap().value;
    let fd_plain = poisson_fd(64, |p| !contains(p, &cyl));
    assert!((fd_plain - exact).abs() < 1e-3 * exact, "{fd_plain} vs {exact}");

    // A tube spanning a diameter of the cross-section at x1 = 0.
    let eps = 0.15;
    let seg = TracePolyline::new(vec![Point3::new(0.0, -1.0, 0.0), Point3::new(0.0, 1.0, 0.0)], 1.0).unwrap();
    let fd_cut = poisson_fd(64, |p| !contains(p, &cyl) || seg.distance(p) <= eps);
    let c = cfg(1e-4, eps);
    let mc = fractured_rigidity(&cyl, &Tube::new(&seg, eps), &c, 200_000, 1, &RngStream::new(11, 0)).unwrap();
    assert!(mc.mean < exact - 5.0 * mc.std_error, "{mc:?}");
    let budget = 2.0 * (fd_plain - exact).abs() + 2.0 * c.eps_shell;
    assert!((mc.mean - fd_cut).abs() <= 3.0 * mc.std_error + budget, "{mc:?} vs {fd_cut}");
}

#[test]
fn far_obstacle_leaves_rigidity_unchanged() {
    let cyl = CylinderSpec::finite(3.0, 1.0).unwrap();
    let seg = TracePolyline::new(vec![Point3::new(0.0, 5.0, 0.0), Point3::new(0.0, 6.0, 0.0)], 1.0).unwrap();
    let e = fractured_rigidity(&cyl, &Tube::new(&seg, 0.05), &cfg(1e-4, 0.05), 2000, 1, &RngStream::new(12, 0)).unwrap();
    let exact = rigidity_cylinder(3.0, 1.0).unwrap().value;
    assert!((e.mean - exact).abs() <= 3.0 * e.std_error + 1e-12);
}

#[test]
fn fractured_rigidity_scales_as_fifth_power() {
    let r = 0.5;
    let unit = CylinderSpec::finite(4.0, 1.0).unwrap();
    let small = CylinderSpec::finite(4.0 * r, r).unwrap();
    let seg = |s: f64| TracePolyline::new(vec![Point3::new(-0.5 * s, -0.3 * s, 0.0), Point3::new(0.8 * s, 0.4 * s, 0.1 * s)], 1.0).unwrap();
    let (s1, s2) = (seg(1.0), seg(r));
    let a = fractured_rigidity(&unit, &Tube::new(&s1, 0.1), &cfg(1e-4, 0.1), 100_000, 1, &RngStream::new(13, 0)).unwrap();
    let b = fractured_rigidity(&small, &Tube::new(&s2, 0.1 * r), &cfg(1e-4 * r, 0.1 * r), 100_000, 1, &RngStream::new(13, 1))
        .unwrap()
        .scaled(r.powi(-5));
    assert!(a.agrees_with(&b, 3.0), "{a:?} vs {b:?}");
    assert!(a.mean < rigidity_cylinder(4.0, 1.0).unwrap().value);
}

#[test]
fn deficit_and_direct_estimators_agree() {
    let cyl = CylinderSpec::finite(2.0, 1.0).unwrap();
    let d = Domain::Cylinder(cyl);
    let trace = sample_trace(Point3::new(0.2, 0.1, 0.3), &d, &PathConfig::for_radius(1.0), &RngStream::new(14, 0)).unwrap();
    let c = cfg(5e-4, 0.02);
    let tube = Tube::new(&trace, c.eps_tube);
    let deficit = fractured_rigidity(&cyl, &tube, &c, 100_000, 1, &RngStream::new(14, 1)).unwrap();
    let s = RngStream::new(14, 2);
    let volume = 2.0 * PI;
    let direct: Vec<f64> = (0..100_000u64)
        .map(|i| {
            let mut rng = s.substream(i).rng();
            let (y, z) = brownian_fracture::stochastic::uniform_in_disc(&mut rng, 1.0);
            let x = Point3::new(rng.random_range(-1.0..1.0), y, z);
            volume * wos_exit_time_sample(x, &d, &tube, &c, &mut rng).unwrap()
        })
        .collect();
    let direct = Estimate::from_samples(&direct, 0);
    assert!(deficit.agrees_with(&direct, 3.0), "{deficit:?} vs {direct:?}");
}

#[test]
fn kappa_is_inside_the_ball_capacity() {
    let k = KappaConfig {
        ball_radius: 1.0,
        path: PathConfig::for_radius(1.0),
        wos: cfg(0.002, 0.02),
        eps0: 0.02,
    };
    let e = kappa_estimate(&k, 6, 300, &RngStream::new(15, 0)).unwrap();
    assert!(e.headline.mean > 0.0 && e.headline.mean < 4.0 * PI);
    assert!(e.by_eps[0].1.mean > e.by_eps[1].1.mean);
    assert_eq!(e.by_eps[1].0, 0.02);
}

#[test]
fn plane_hitting_decays_with_length() {
    let c = cfg(1e-4, 0.02);
    let p16 = plane_hitting_probability(Point3::new(4.0, 0.0, 0.0), 16.0, 1.0, &c, 1_000_000, &RngStream::new(16, 0)).unwrap();
    let p36 = plane_hitting_probability(Point3::new(12.0, 0.0, 0.0), 36.0, 1.0, &c, 1_000_000, &RngStream::new(16, 1)).unwrap();
    assert!(p36.mean < p16.mean - 3.0 * p16.combined_se(&p36), "{p16:?} vs {p36:?}");
    // Leading mode: (2 / (j0 J1(j0))) exp(-j0 s) on the axis at distance s.
    let lead = 1.601_974_697_1 * (-2.404_825_557_695_773f64 * 4.0).exp();
    assert!((p16.mean - lead).abs() <= 4.0 * p16.std_error + 0.1 * lead, "{p16:?} vs {lead}");
}
