mod common;

use common::{natural, rel, solve};
use nelson_sta::analog::to_time_domain;
use nelson_sta::costs::energy_integral;
use nelson_sta::dynamics::{default_dt, initial_omega, integrate_ermakov, tilt_angle, wigner_at};
use nelson_sta::{CostKind, ProtocolKind, TimeProtocol};

#[test]
fn ermakov_reproduces_analog_variance() {
    let c = natural();
    let cases = [
        (CostKind::Energy, 1.0, 0.1, 1.0, 2.0),
        (CostKind::Phase, 1.0, 1.0, 1.0, 2.0),
        (CostKind::Work, 1.0, 0.05, 1.0, 2.0),
        (CostKind::Energy, 10.0, 0.01, 1.0, 2.0),
        (CostKind::Phase, 1.0, 0.3, 2.0, 1.0),
        (CostKind::Energy, 1.0, 0.2, 0.5, 0.25),
    ];
    for (cost, lam, mu, s_i, s_f) in cases {
        let p = solve(cost, lam, mu, s_i, s_f, 2001);
        let td = to_time_domain(&p, &c, 2001).unwrap();
        let rec = integrate_ermakov(&td.quantum, s_i, &c, default_dt(&td.quantum)).unwrap();
        let mut worst = 0.0_f64;
        for (t, s) in td.classical.t_nodes().iter().zip(&td.s) {
            worst = worst.max(rel(rec.s_at(*t), *s));
        }
        assert!(worst < 1e-4, "{cost} {lam} {mu} {s_i}->{s_f}: {worst:e}");
        assert!((rec.final_s() - s_f).abs() <= 1e-3);
        assert!(rec.final_sdot().abs() <= 1e-3);
        assert!(energy_integral(&rec) > 0.0);
        for w in rec.beta.windows(2) {
            assert!(w[1] < w[0]);
        }
    }
}

#[test]
fn rk4_converges_at_fourth_order() {
    let c = natural();
    let (s0, kappa) = (0.5, 8.0);
    let p = TimeProtocol::new(vec![0.0, 3.0], vec![kappa; 2], ProtocolKind::Quantum).unwrap();
    let w0 = c.d / s0;
    let w = (kappa / c.m).sqrt();
    let exact = |t: f64| s0 * ((w * t).cos().powi(2) + (w0 / w).powi(2) * (w * t).sin().powi(2));
    let err = |dt: f64| {
        let r = integrate_ermakov(&p, s0, &c, dt).unwrap();
        r.t.iter()
            .zip(&r.s)
            .map(|(t, s)| (s - exact(*t)).abs())
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(0.01), err(0.005));
    assert!(e1 / e2 > 12.0, "{e1} {e2}");
}

#[test]
fn wigner_is_normalized() {
    let c = natural();
    for (s, alpha) in [(1.0, 0.0), (0.5, 0.3), (2.0, -0.15), (1.3, 0.8)] {
        let (lx, n) = (10.0 * f64::sqrt(s), 800);
        let hx = 2.0 * lx / n as f64;
        let mut total = 0.0;
        for i in 0..=n {
            let x = -lx + i as f64 * hx;
            let wx = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            // integrate p on a window centred on the ridge
            let centre = 2.0 * alpha * c.hbar * x;
            let lp = 10.0 * c.hbar / (2.0 * s.sqrt());
            let hp = 2.0 * lp / n as f64;
            let mut inner = 0.0;
            for k in 0..=n {
                let wp = if k == 0 || k == n {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                inner += wp * wigner_at(x, centre - lp + k as f64 * hp, s, alpha, &c);
            }
            total += wx * inner * hp / 3.0;
        }
        total *= hx / 3.0;
        assert!((total - 1.0).abs() < 1e-6, "{s} {alpha}: {total}");
    }
}

#[test]
fn phase_optimal_tilt_rises_and_returns() {
    let c = natural();
    let p = solve(CostKind::Phase, 1.0, 0.5, 1.0, 2.0, 2001);
    let td = to_time_domain(&p, &c, 2001).unwrap();
    let rec = integrate_ermakov(&td.quantum, 1.0, &c, default_dt(&td.quantum)).unwrap();
    let wi = initial_omega(&td.quantum, &c).unwrap();
    let theta: Vec<f64> = rec
        .alpha
        .iter()
        .map(|a| tilt_angle(*a, &c, wi).unwrap())
        .collect();
    let n = theta.len();
    let (imax, tmax) =
        theta.iter().enumerate().fold(
            (0, f64::MIN),
            |b, (i, v)| if *v > b.1 { (i, *v) } else { b },
        );
    assert!(theta[0].abs() < 1e-12);
    assert!(theta[n - 1].abs() < 1e-3);
    assert!(tmax > 0.1);
    assert!(imax > n / 5 && imax < 4 * n / 5);
}

#[test]
fn energy_tracks_stiffness_shape() {
    let c = natural();
    let p = solve(CostKind::Energy, 1.0, 0.1, 1.0, 2.0, 2001);
    let td = to_time_domain(&p, &c, 2001).unwrap();
    let rec = integrate_ermakov(&td.quantum, 1.0, &c, default_dt(&td.quantum)).unwrap();
    // potential energy kappa s / 2 dominates: E and kappa are strongly correlated
    let n = rec.len() as f64;
    let me = rec.energy.iter().sum::<f64>() / n;
    let mk = rec.kappa.iter().sum::<f64>() / n;
    let cov: f64 = rec
        .energy
        .iter()
        .zip(&rec.kappa)
        .map(|(e, k)| (e - me) * (k - mk))
        .sum();
    let ve: f64 = rec.energy.iter().map(|e| (e - me).powi(2)).sum();
    let vk: f64 = rec.kappa.iter().map(|k| (k - mk).powi(2)).sum();
    assert!(cov / (ve * vk).sqrt() > 0.9);
    assert!((rec.energy[0] - 0.5).abs() < 1e-12);
    assert!((rec.energy.last().unwrap() - 0.25).abs() < 1e-3);
}
