use proptest::prelude::*;

use phaseprobe::apt::{assign_all, parse_epos, parse_range_file, write_epos, IonEvent};
use phaseprobe::cluster::{dbscan, kmeans, pca};
use phaseprobe::pairs::{extract_double_hits, DoubleHitOptions};
use phaseprobe::stats::{binomial_ci, boxplot_stats, mann_whitney_u, quantile, spearman};
use phaseprobe::synth::default_range_table;

fn finite_f32() -> impl Strategy<Value = f32> {
    any::<u32>().prop_map(f32::from_bits).prop_filter("finite", |v| v.is_finite())
}

fn event() -> impl Strategy<Value = IonEvent> {
    (
        proptest::array::uniform8(finite_f32()),
        any::<u32>(),
        1u32..,
    )
        .prop_map(|(f, pulse_delta, multiplicity)| IonEvent {
            x: f[0],
            y: f[1],
            z: f[2],
            mz: f[3].abs(),
            tof: f[4],
            v_dc: f[5],
            det_x: f[6],
            det_y: f[7],
            pulse_delta,
            multiplicity,
        })
}

fn sample(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, 1..max)
}

fn points(dim: usize, max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-50.0f64..50.0, dim), 2..max)
}

proptest! {
    #[test]
    fn epos_round_trip(events in prop::collection::vec(event(), 0..64)) {
        let mut bytes = Vec::new();
        write_epos(&mut bytes, &events).unwrap();
        prop_assert_eq!(bytes.len(), events.len() * 44);
        let back = parse_epos(&bytes).unwrap();
        let mut again = Vec::new();
        write_epos(&mut again, &back).unwrap();
        prop_assert_eq!(again, bytes);
    }

    #[test]
    fn epos_rejects_partial_records(n in 1usize..44, events in prop::collection::vec(event(), 0..4)) {
        let mut bytes = Vec::new();
        write_epos(&mut bytes, &events).unwrap();
        bytes.extend(std::iter::repeat_n(0u8, n));
        prop_assert!(parse_epos(&bytes).is_err());
    }

    #[test]
    fn rrng_round_trip_preserves_assignment(mz in prop::collection::vec(0.0f64..120.0, 1..200)) {
        let table = default_range_table();
        let again = parse_range_file(&table.to_rrng()).unwrap();
        for m in mz {
            let a = table.assign(m).map(|i| table.ranges()[i].name.clone());
            let b = again.assign(m).map(|i| again.ranges()[i].name.clone());
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn double_hits_are_adjacent_same_pulse(
        groups in prop::collection::vec((1u32..4, 1u32..5, any::<bool>()), 1..60)
    ) {
        // each group: size, pulse gap, whether the multiplicity field is honest
        let table = default_range_table();
        let mut events = Vec::new();
        for (size, gap, honest) in &groups {
            for k in 0..*size {
                events.push(IonEvent {
                    x: 0.0, y: 0.0, z: events.len() as f32, mz: 14.0, tof: 0.0, v_dc: 0.0,
                    det_x: k as f32, det_y: 0.0,
                    pulse_delta: if k == 0 { *gap } else { 0 },
                    multiplicity: if *honest { *size } else { size + 1 },
                });
            }
        }
        let ex = extract_double_hits(&events, DoubleHitOptions::default());
        let expected = groups.iter().filter(|(s, _, h)| *s == 2 && *h).count();
        prop_assert_eq!(ex.pairs.len(), expected);
        prop_assert_eq!(ex.inconsistent_groups, groups.iter().filter(|g| !g.2).count());
        for p in &ex.pairs {
            prop_assert_eq!(p.b, p.a + 1);
            prop_assert_eq!(events[p.b].pulse_delta, 0);
        }
        prop_assert_eq!(assign_all(&events, &table).len(), events.len());
    }

    #[test]
    fn u_statistics_are_complementary(a in sample(30), b in sample(30)) {
        let ab = mann_whitney_u(&a, &b).unwrap();
        let ba = mann_whitney_u(&b, &a).unwrap();
        prop_assert!((ab.u + ba.u - (a.len() * b.len()) as f64).abs() < 1e-9);
        prop_assert!((ab.p - ba.p).abs() < 1e-12);
        prop_assert!((ab.z + ba.z).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&ab.p));
    }

    #[test]
    fn box_summary_is_ordered(v in sample(200)) {
        let b = boxplot_stats(&v);
        prop_assert!(b.whisker_low <= b.q1 && b.q1 <= b.median && b.median <= b.q3 && b.q3 <= b.whisker_high);
        prop_assert_eq!(b.n, v.len());
        let inside = v.iter().filter(|&&x| x >= b.whisker_low && x <= b.whisker_high).count();
        prop_assert_eq!(inside + b.outliers.len(), v.len());
    }

    #[test]
    fn quantile_is_monotone(v in sample(100), q1 in 0.0f64..=1.0, q2 in 0.0f64..=1.0) {
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        prop_assert!(quantile(&v, lo) <= quantile(&v, hi));
    }

    #[test]
    fn wilson_interval_brackets_estimate(n in 1u64..5000, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).floor() as u64;
        let (lo, hi) = binomial_ci(k, n, 0.95);
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn spearman_ignores_monotone_maps(x in prop::collection::vec(-10.0f64..10.0, 3..50)) {
        let y: Vec<f64> = x.iter().map(|v| v.exp() * 3.0 + 1.0).collect();
        let s = spearman(&x, &y);
        prop_assert!(s.degenerate || (s.rho - 1.0).abs() < 1e-9);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let t = spearman(&x, &neg);
        prop_assert!(t.degenerate || (t.rho + 1.0).abs() < 1e-9);
    }

    #[test]
    fn pca_spectrum_is_sorted(rows in points(3, 40)) {
        prop_assume!(rows.len() >= 4);
        let p = pca(&rows, 3).unwrap();
        prop_assert!(p.eigenvalues.windows(2).all(|w| w[0] >= w[1] - 1e-9));
        let sum: f64 = p.eigenvalues.iter().sum();
        prop_assert!((sum - p.total_variance).abs() <= 1e-8 * p.total_variance.max(1.0));
    }

    #[test]
    fn kmeans_labels_and_history(rows in points(2, 80), k in 1usize..5, seed in any::<u64>()) {
        prop_assume!(rows.len() >= k);
        let r = kmeans(&rows, k, seed);
        prop_assert_eq!(r.centroids.len(), k);
        prop_assert!(r.labels.0.iter().all(|l| matches!(l, Some(c) if *c < k)));
        prop_assert!(r.inertia_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-12));
        let again = kmeans(&rows, k, seed);
        prop_assert_eq!(again.labels, r.labels);
    }

    #[test]
    fn dbscan_is_translation_invariant(rows in points(2, 60), dx in -100.0f64..100.0, eps in 0.5f64..10.0) {
        let shifted: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0] + dx, r[1] - dx]).collect();
        let a = dbscan(&rows, eps, 3);
        let b = dbscan(&shifted, eps, 3);
        // exact distances can change by rounding at the boundary, so compare
        // only when no pair sits within 1e-9 of eps
        let near_boundary = rows.iter().enumerate().any(|(i, p)| {
            rows[i + 1..].iter().any(|q| (((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt() - eps).abs() < 1e-9)
        });
        prop_assume!(!near_boundary);
        prop_assert_eq!(a.n_clusters(), b.n_clusters());
        prop_assert_eq!(a.noise_count(), b.noise_count());
    }
}
