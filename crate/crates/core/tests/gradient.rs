mod common;

use common::{fd_gradient, fixture, naive_h, naive_rate, relative_error};
use simrate::cascade::{effective_channel, PowerVector, Side};
use simrate::rmax::{euclidean_gradient_rx, euclidean_gradient_tx, Link};

fn check(s: usize, n: usize, m: usize, l: usize, k: usize, seed: u64) {
    let f = fixture(s, n, m, l, k, seed);
    let link = Link::new(&f.props, &f.channel).unwrap();
    let h = naive_h(&f, &f.phases.theta_tx, &f.phases.theta_rx);
    let noise = (0..s).map(|i| h[(i, i)].norm_sqr()).sum::<f64>() / s as f64;
    let p: Vec<f64> = (0..s).map(|i| (i + 1) as f64).collect();
    let total = p.iter().sum();
    let power = PowerVector { p: p.clone(), total, noise };

    let tx = euclidean_gradient_tx(link, &f.phases, &power).unwrap();
    let rx = euclidean_gradient_rx(link, &f.phases, &power).unwrap();
    let e_tx = relative_error(&tx, &fd_gradient(&f, Side::Tx, &p, noise, 1e-6));
    let e_rx = relative_error(&rx, &fd_gradient(&f, Side::Rx, &p, noise, 1e-6));
    assert!(e_tx < 1e-5 && e_rx < 1e-5, "{:?}: tx {e_tx:.2e} rx {e_rx:.2e}", (s, n, m, l, k));
}

#[test]
fn gradient_matches_finite_differences_over_size_grid() {
    let mut seed = 0;
    for s in [1, 2] {
        for (n, m) in [(4, 4), (4, 8), (8, 4), (8, 8)] {
            for (l, k) in [(1, 1), (1, 3), (2, 2), (3, 1), (3, 3)] {
                seed += 1;
                check(s, n, m, l, k, seed);
            }
        }
    }
}

#[test]
fn three_streams_unequal_sides() {
    check(3, 9, 4, 2, 3, 99);
}

#[test]
fn library_channel_matches_explicit_products() {
    let f = fixture(3, 8, 6, 3, 2, 5);
    let h = effective_channel(&f.channel, &f.phases, &f.props).unwrap().h;
    let oracle = naive_h(&f, &f.phases.theta_tx, &f.phases.theta_rx);
    assert!((h - &oracle).norm() <= 1e-12 * oracle.norm());
    let p = [0.2, 0.3, 0.5];
    let rate = simrate::cascade::achievable_rate(&oracle, &p, 0.01).unwrap();
    assert!((rate - naive_rate(&oracle, &p, 0.01)).abs() < 1e-12);
}
