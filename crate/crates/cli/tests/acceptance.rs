//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any failure.

use std::collections::BTreeMap;
use std::panic;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use voyagekit_core::efficiency::*;
use voyagekit_core::geo::{GeoPoint, EARTH_RADIUS_M};
use voyagekit_core::ingest::{resample_voyage, trilinear_interpolate, WeatherGrid};
use voyagekit_core::path_id::Path as VoyagePath;
use voyagekit_core::path_id::*;
use voyagekit_core::speed_opt::hmm::{baum_welch, EmOptions, GaussianHmm, Sequence};
use voyagekit_core::speed_opt::*;
use voyagekit_core::synth::{generate_fleet, SyntheticFleetSpec};
use voyagekit_core::Voyage;

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:?}, limit {limit:?}"))
}

fn labelings_from_counts(classes: &[&str], counts: &[Vec<u64>]) -> (PathLabeling, PathLabeling) {
    let (mut truth, mut pred) = (Vec::new(), Vec::new());
    let mut n = 0;
    for (i, row) in counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            for _ in 0..c {
                let id = format!("v{n:05}");
                truth.push((id.clone(), classes[i].to_string()));
                pred.push((id, classes[j].to_string()));
                n += 1;
            }
        }
    }
    (
        PathLabeling::from_pairs(truth).unwrap(),
        PathLabeling::from_pairs(pred).unwrap(),
    )
}

fn check_metrics(ev: &Evaluation, expected: &[(&str, f64, f64, f64)]) -> Result<(), String> {
    for &(class, p, r, f1) in expected {
        let m = ev
            .per_class
            .iter()
            .find(|m| m.class == class)
            .ok_or(format!("class {class} missing"))?;
        let ok = (m.precision - p).abs() <= 1e-3
            && (m.recall - r).abs() <= 1e-3
            && (m.f1 - f1).abs() <= 1e-3;
        ensure(ok, || {
            format!(
                "{class}: got ({:.4}, {:.4}, {:.4})",
                m.precision, m.recall, m.f1
            )
        })?;
    }
    Ok(())
}

fn a1() -> Outcome {
    let start = Instant::now();
    let classes = ["NE", "NM", "NW", "S", "SW"];
    let counts = vec![
        vec![14, 0, 0, 0, 0],
        vec![6, 34, 0, 0, 0],
        vec![0, 0, 16, 0, 0],
        vec![0, 0, 0, 52, 0],
        vec![0, 0, 0, 0, 2],
    ];
    let (truth, pred) = labelings_from_counts(&classes, &counts);
    let ev = confusion_and_metrics(&truth, &pred).map_err(err)?;
    ensure(ev.confusion.total() == 124, || {
        format!("total {}", ev.confusion.total())
    })?;
    check_metrics(
        &ev,
        &[
            ("NE", 0.7, 1.0, 0.824),
            ("NM", 1.0, 0.85, 0.919),
            ("NW", 1.0, 1.0, 1.0),
            ("S", 1.0, 1.0, 1.0),
            ("SW", 1.0, 1.0, 1.0),
        ],
    )?;
    within(Duration::from_secs(1), start)?;
    Ok("NE (0.700, 1.000, 0.824), NM (1.000, 0.850, 0.919), NW/S/SW (1, 1, 1)".into())
}

fn a2() -> Outcome {
    let start = Instant::now();
    let classes = ["Direct", "East_Canal", "West_Canal"];
    let counts = vec![vec![62, 0, 0], vec![0, 122, 0], vec![0, 11, 1560]];
    let (truth, pred) = labelings_from_counts(&classes, &counts);
    let ev = confusion_and_metrics(&truth, &pred).map_err(err)?;
    check_metrics(
        &ev,
        &[
            ("East_Canal", 0.917, 1.0, 0.957),
            ("West_Canal", 1.0, 0.993, 0.996),
            ("Direct", 1.0, 1.0, 1.0),
        ],
    )?;
    within(Duration::from_secs(1), start)?;
    Ok("East_Canal (0.917, 1.000, 0.957), West_Canal (1.000, 0.993, 0.996)".into())
}

fn a3() -> Outcome {
    let start = Instant::now();
    let spec = SyntheticFleetSpec::default();
    ensure(spec.voyages_per_branch * spec.branches.len() >= 60, || {
        "fleet too small".into()
    })?;
    let seed = spec.seed;
    let fleet = generate_fleet(&spec).map_err(err)?;
    let voyages: Vec<Voyage> = fleet
        .voyages
        .iter()
        .map(|v| resample_voyage(v, 300.0).unwrap())
        .collect();
    let ids: Vec<String> = voyages.iter().map(|v| v.voyage_id.clone()).collect();
    let (train_ids, test_ids) = split_train_test(&ids, 0.7, seed).map_err(err)?;
    let training: Vec<Voyage> = voyages
        .iter()
        .filter(|v| train_ids.contains(&v.voyage_id))
        .cloned()
        .collect();
    let test: Vec<Voyage> = voyages
        .iter()
        .filter(|v| test_ids.contains(&v.voyage_id))
        .cloned()
        .collect();
    let totals: Vec<_> = training
        .iter()
        .map(|v| (v.voyage_id.clone(), voyage_totals(v).unwrap()))
        .collect();
    let clusters =
        build_percentile_clusters(&normalize_and_score(&totals).map_err(err)?).map_err(err)?;
    let estimator = train_estimator(training.iter(), FeatureCase::I).map_err(err)?;
    let all: Vec<_> = voyages.iter().map(|v| voyage_totals(v).unwrap()).collect();
    let inputs = BenchmarkInputs {
        clusters: &clusters,
        training: &training,
        test: &test,
        estimator: &estimator,
        scale: ScoreScale::from_totals(all.iter()).map_err(err)?,
        state_decoder: HmmConfig::default().with_seed(seed),
    };
    let mut models = standard_models(seed);
    models.push(Box::new(IdentityOptimizer));
    let report = run_optimization_benchmark(&inputs, &models).map_err(err)?;

    for c in PercentileCluster::ALL {
        for m in ["kNN", "1NN-DTW", "HMM"] {
            let row = report.row(c, m).ok_or(format!("missing row {c:?} {m}"))?;
            ensure(row.status == RowStatus::Ok, || {
                format!("{c:?} {m} is {:?}", row.status)
            })?;
        }
        let id = report.row(c, "Identity").ok_or("missing identity row")?;
        ensure(
            id.avg_gain_pct == Some(0.0) && id.improved_count == 0,
            || format!("identity row {id:?}"),
        )?;
    }
    let standard = report.rows.iter().filter(|r| r.model != "Identity").count();
    ensure(standard == 12, || {
        format!("{standard} standard rows, expected 4 x 3")
    })?;
    let hmm = report.model_average("HMM").ok_or("no HMM average")?;
    ensure(hmm >= 0.0, || format!("HMM average gain {hmm:.3}%"))?;
    ensure(report.model_average("Identity") == Some(0.0), || {
        "identity average not 0".into()
    })?;
    within(Duration::from_secs(60), start)?;
    Ok(format!(
        "{} voyages, {} test; HMM average gain {hmm:.2}%, identity 0; 4 clusters x 3 models",
        voyages.len(),
        test.len()
    ))
}

fn a4() -> Outcome {
    let start = Instant::now();
    let spec = SyntheticFleetSpec {
        voyages_per_branch: 34,
        ..Default::default()
    };
    ensure(spec.noise_std == 0.05, || "noise std must be 0.05".into())?;
    let mid = |b: usize| spec.branches[b].centerline[1][0];
    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
        ensure((mid(i) - mid(j)).abs() >= 0.5, || {
            format!("branches {i} and {j} closer than 0.5 degrees")
        })?;
    }
    let fleet = generate_fleet(&spec).map_err(err)?;
    let paths: Vec<VoyagePath> = fleet
        .voyages
        .iter()
        .map(|v| VoyagePath::from_voyage(&resample_voyage(v, 300.0).unwrap()))
        .collect();
    let matrix = build_distance_matrix(&paths, Metric::EuclideanDegrees).map_err(err)?;
    let hier = hierarchical_cluster(&matrix, 0.1).map_err(err)?;
    let aligned = align_labels(&hier, &fleet.labels).map_err(err)?;
    let ev = confusion_and_metrics(&fleet.labels, &aligned.labeling).map_err(err)?;
    for m in &ev.per_class {
        ensure(m.f1 == 1.0, || {
            format!("hierarchical {} F1 {}", m.class, m.f1)
        })?;
    }

    let (train_ids, test_ids) = split_train_test(matrix.ids(), 0.7, spec.seed).map_err(err)?;
    let labels = fleet.labels.as_map();
    let subset = |keep: &[String]| -> (Vec<VoyagePath>, PathLabeling) {
        let ps: Vec<VoyagePath> = paths
            .iter()
            .filter(|p| keep.contains(&p.voyage_id))
            .cloned()
            .collect();
        let l = PathLabeling::from_pairs(
            ps.iter()
                .map(|p| (p.voyage_id.clone(), labels[p.voyage_id.as_str()])),
        )
        .unwrap();
        (ps, l)
    };
    let (train, train_labels) = subset(&train_ids);
    let (test, test_labels) = subset(&test_ids);
    let models = fit_segment_gmms(
        &train,
        &train_labels,
        &fleet.segments,
        &SegmentConfig::default(),
    )
    .map_err(err)?;
    let (pred, failed) = models.classify_all(&test).map_err(err)?;
    ensure(failed.is_empty(), || format!("unclassifiable: {failed:?}"))?;
    let ev = confusion_and_metrics(&test_labels, &pred).map_err(err)?;
    for m in &ev.per_class {
        ensure(m.f1 == 1.0, || {
            format!("segment-gmm {} F1 {}", m.class, m.f1)
        })?;
    }
    within(Duration::from_secs(30), start)?;
    Ok(format!(
        "{} voyages; hierarchical (cutoff 0.1) and segment-gmm ({} held out) F1 = 1.0 for every branch",
        paths.len(),
        test.len()
    ))
}

/// Minimum cost over every warping path, enumerated by depth-first recursion.
fn dtw_exhaustive(x: &[f64], y: &[f64], i: usize, j: usize, acc: f64, best: &mut f64) {
    let acc = acc + (x[i] - y[j]).abs();
    if i + 1 == x.len() && j + 1 == y.len() {
        *best = best.min(acc);
        return;
    }
    if i + 1 < x.len() {
        dtw_exhaustive(x, y, i + 1, j, acc, best);
    }
    if j + 1 < y.len() {
        dtw_exhaustive(x, y, i, j + 1, acc, best);
    }
    if i + 1 < x.len() && j + 1 < y.len() {
        dtw_exhaustive(x, y, i + 1, j + 1, acc, best);
    }
}

fn a5() -> Outcome {
    let mut seqs: Vec<Vec<f64>> = Vec::new();
    for len in 1..=6u32 {
        for code in 0..3usize.pow(len) {
            let mut c = code;
            seqs.push(
                (0..len)
                    .map(|_| {
                        let d = c % 3;
                        c /= 3;
                        d as f64
                    })
                    .collect(),
            );
        }
    }
    let mut mismatches = 0usize;
    let mut pairs = 0usize;
    for x in &seqs {
        for y in &seqs {
            let mut best = f64::INFINITY;
            dtw_exhaustive(x, y, 0, 0, 0.0, &mut best);
            if dtw_distance(x, y).map_err(err)? != best {
                mismatches += 1;
            }
            pairs += 1;
        }
    }
    ensure(mismatches == 0, || {
        format!("{mismatches} mismatches out of {pairs}")
    })?;
    Ok(format!(
        "{pairs} ordered pairs over {} sequences, zero mismatches",
        seqs.len()
    ))
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<GeoPoint> {
    (0..n)
        .map(|_| {
            GeoPoint::new(
                rng.random_range(-60.0..60.0),
                rng.random_range(-170.0..170.0),
            )
            .unwrap()
        })
        .collect()
}

fn annd_oracle(a: &[GeoPoint], b: &[GeoPoint], d: impl Fn(GeoPoint, GeoPoint) -> f64) -> f64 {
    let directed = |p: &[GeoPoint], q: &[GeoPoint]| {
        let mut total = 0.0;
        for &u in p {
            let mut m = f64::INFINITY;
            for &v in q {
                m = m.min(d(u, v));
            }
            total += m;
        }
        total / p.len() as f64
    };
    (directed(a, b) + directed(b, a)) / 2.0
}

fn euclid(a: GeoPoint, b: GeoPoint) -> f64 {
    ((a.lat - b.lat).powi(2) + (a.lon - b.lon).powi(2)).sqrt()
}

fn haversine(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let h = ((p2 - p1) / 2.0).sin().powi(2)
        + p1.cos() * p2.cos() * ((b.lon - a.lon).to_radians() / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

fn a6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let (na, nb) = (rng.random_range(1..=10), rng.random_range(1..=10));
        let (a, b) = (random_points(&mut rng, na), random_points(&mut rng, nb));
        let e = annd(&a, &b, Metric::EuclideanDegrees).map_err(err)?;
        let eo = annd_oracle(&a, &b, euclid);
        let h = annd(&a, &b, Metric::Haversine).map_err(err)?;
        let ho = annd_oracle(&a, &b, haversine);
        worst = worst
            .max((e - eo).abs())
            .max((h - ho).abs() / ho.abs().max(1.0));
    }
    ensure(worst <= 1e-12, || format!("worst deviation {worst:e}"))?;

    let paths: Vec<VoyagePath> = (0..25)
        .map(|i| {
            let n = rng.random_range(2..=10);
            VoyagePath::new(format!("p{i:02}"), random_points(&mut rng, n)).unwrap()
        })
        .collect();
    for metric in [Metric::EuclideanDegrees, Metric::Haversine] {
        let m = build_distance_matrix(&paths, metric).map_err(err)?;
        for i in 0..m.len() {
            ensure(m.get(i, i) == 0.0, || format!("diagonal {i} nonzero"))?;
            for j in 0..i {
                ensure(m.get(i, j) == m.get(j, i), || {
                    format!("asymmetric at ({i}, {j})")
                })?;
            }
        }
    }
    Ok(format!("500 pairs in two metrics, worst deviation {worst:.1e}; 25x25 matrices symmetric, zero diagonal"))
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn random_stochastic(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn brute_force_log_likelihood(h: &GaussianHmm, obs: &Sequence) -> f64 {
    let n = h.n_states();
    let t = obs.len();
    let em = h.emission_log(obs);
    let mut terms = Vec::with_capacity(n.pow(t as u32));
    for code in 0..n.pow(t as u32) {
        let mut c = code;
        let path: Vec<usize> = (0..t)
            .map(|_| {
                let s = c % n;
                c /= n;
                s
            })
            .collect();
        let mut lp = h.initial()[path[0]].ln() + em[0][path[0]];
        for k in 1..t {
            lp += h.transition()[path[k - 1]][path[k]].ln() + em[k][path[k]];
        }
        terms.push(lp);
    }
    log_sum_exp(&terms)
}

fn non_decreasing(history: &[f64]) -> bool {
    history
        .windows(2)
        .all(|w| w[1] >= w[0] - 1e-10 * w[0].abs().max(1.0))
}

fn sample_hmm(h: &GaussianHmm, len: usize, rng: &mut ChaCha8Rng) -> (Sequence, Vec<usize>) {
    let pick = |p: &[f64], rng: &mut ChaCha8Rng| {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &x) in p.iter().enumerate() {
            acc += x;
            if u < acc {
                return i;
            }
        }
        p.len() - 1
    };
    let mut s = pick(h.initial(), rng);
    let (mut obs, mut states) = (Vec::new(), Vec::new());
    for _ in 0..len {
        let x = (0..h.dim())
            .map(|d| {
                Normal::new(h.means()[s][d], h.vars()[s][d].sqrt())
                    .unwrap()
                    .sample(rng)
            })
            .collect();
        obs.push(x);
        states.push(s);
        s = pick(&h.transition()[s], rng);
    }
    (obs, states)
}

fn aligned_accuracy(decoded: &[usize], truth: &[usize], n: usize) -> f64 {
    let mut counts = vec![vec![0.0; n]; n];
    for (&d, &t) in decoded.iter().zip(truth) {
        counts[d][t] += 1.0;
    }
    let mapping = hungarian_max(&counts);
    let agree: f64 = mapping
        .iter()
        .enumerate()
        .filter_map(|(d, t)| t.map(|t| counts[d][t]))
        .sum();
    agree / decoded.len() as f64
}

fn a7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..60 {
        let h = GaussianHmm::new(
            random_stochastic(&mut rng, 3),
            (0..3).map(|_| random_stochastic(&mut rng, 3)).collect(),
            (0..3)
                .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
                .collect(),
            (0..3)
                .map(|_| vec![rng.random_range(0.3..2.0), rng.random_range(0.3..2.0)])
                .collect(),
        )
        .map_err(err)?;
        let len = rng.random_range(1..=8);
        let obs: Sequence = (0..len)
            .map(|_| vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)])
            .collect();
        let fast = h.log_likelihood(&obs);
        let brute = brute_force_log_likelihood(&h, &obs);
        worst = worst.max((fast - brute).abs() / brute.abs().max(1e-300));
    }
    ensure(worst <= 1e-9, || {
        format!("forward vs brute force relative error {worst:e}")
    })?;

    let truth_model = GaussianHmm::new(
        vec![1.0 / 3.0; 3],
        vec![
            vec![0.9, 0.05, 0.05],
            vec![0.05, 0.9, 0.05],
            vec![0.05, 0.05, 0.9],
        ],
        vec![vec![0.0, 0.0], vec![5.0, 2.0], vec![10.0, 4.0]],
        vec![vec![1.0, 0.5], vec![1.0, 0.5], vec![1.0, 0.5]],
    )
    .map_err(err)?;
    let samples: Vec<(Sequence, Vec<usize>)> = (0..20)
        .map(|_| sample_hmm(&truth_model, 100, &mut rng))
        .collect();
    let seqs: Vec<Sequence> = samples.iter().map(|s| s.0.clone()).collect();
    let mut fits = 0;
    let mut best_acc = 0.0f64;
    for (k, init_means) in [
        vec![vec![1.0, 1.0], vec![4.0, 1.0], vec![8.0, 3.0]],
        vec![vec![9.0, 0.0], vec![0.0, 4.0], vec![4.0, 4.0]],
        vec![vec![2.0, 2.0], vec![3.0, 2.0], vec![6.0, 2.0]],
    ]
    .into_iter()
    .enumerate()
    {
        let init = GaussianHmm::new(
            vec![1.0 / 3.0; 3],
            vec![
                vec![0.8, 0.1, 0.1],
                vec![0.1, 0.8, 0.1],
                vec![0.1, 0.1, 0.8],
            ],
            init_means,
            vec![vec![4.0, 4.0]; 3],
        )
        .map_err(err)?;
        let (fitted, history) = baum_welch(init, &seqs, EmOptions::default()).map_err(err)?;
        ensure(non_decreasing(&history), || {
            format!("EM log-likelihood decreased in fit {k}")
        })?;
        fits += 1;
        let (mut decoded, mut truth) = (Vec::new(), Vec::new());
        for (obs, states) in &samples {
            decoded.extend(fitted.viterbi(obs).0);
            truth.extend(states.iter().copied());
        }
        let acc = aligned_accuracy(&decoded, &truth, 3);
        ensure(acc >= 0.95, || {
            format!("fit {k}: decoded-state accuracy {acc:.3}")
        })?;
        best_acc = best_acc.max(acc);
    }

    let fleet = generate_fleet(&SyntheticFleetSpec {
        voyages_per_branch: 10,
        ..Default::default()
    })
    .map_err(err)?;
    let model = fit_weather_hmm(fleet.voyages.iter(), &HmmConfig::default()).map_err(err)?;
    ensure(non_decreasing(model.log_likelihoods()), || {
        "EM log-likelihood decreased in weather fit".into()
    })?;
    fits += 1;
    let (mut decoded, mut truth) = (Vec::new(), Vec::new());
    for (v, states) in fleet.voyages.iter().zip(&fleet.states) {
        decoded.extend(model.decode(v).map_err(err)?.iter().map(|s| s.index()));
        truth.extend(states.iter().copied());
    }
    let fleet_acc = aligned_accuracy(&decoded, &truth, 3);
    ensure(fleet_acc >= 0.95, || {
        format!("synthetic weather decoded-state accuracy {fleet_acc:.3}")
    })?;
    Ok(format!(
        "forward rel. error {worst:.1e}; {fits} EM fits monotone; decoded accuracy {best_acc:.3} (sampled HMM), {fleet_acc:.3} (synthetic weather)"
    ))
}

fn a8() -> Outcome {
    let g = |i: usize| i as f64 / 100.0;
    for i in 1..=100 {
        for j in 1..=100 {
            let e = eff_score(g(i), g(j));
            ensure((0.0..=1.0).contains(&e), || {
                format!("eff({}, {}) = {e} outside [0, 1]", g(i), g(j))
            })?;
            ensure(e == eff_score(g(j), g(i)), || {
                format!("asymmetric at ({}, {})", g(i), g(j))
            })?;
            if i < 100 {
                ensure(eff_score(g(i + 1), g(j)) < e, || {
                    format!("not decreasing in f at ({}, {})", g(i), g(j))
                })?;
            }
            if j < 100 {
                ensure(eff_score(g(i), g(j + 1)) < e, || {
                    format!("not decreasing in t at ({}, {})", g(i), g(j))
                })?;
            }
        }
    }
    ensure(eff_score(1.0, 1.0) == 0.0, || "eff(1, 1) != 0".into())?;
    ensure((eff_score(0.5, 0.5) - 0.5).abs() < 1e-15, || {
        "eff(0.5, 0.5) != 0.5".into()
    })?;
    Ok("100x100 grid: range, symmetry, strict decrease; eff(1,1) = 0, eff(0.5,0.5) = 0.5".into())
}

fn random_axis(rng: &mut ChaCha8Rng, start: f64, n: usize) -> Vec<f64> {
    let mut v = vec![start];
    for _ in 1..n {
        let last = *v.last().unwrap();
        v.push(last + rng.random_range(0.2..2.0));
    }
    v
}

fn a9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let times = random_axis(&mut rng, 1.7e9, 6)
        .into_iter()
        .map(|t| 1.7e9 + (t - 1.7e9) * 3600.0)
        .collect::<Vec<_>>();
    let lats = random_axis(&mut rng, 54.0, 5);
    let lons = random_axis(&mut rng, 8.0, 7);
    let n = times.len() * lats.len() * lons.len();
    let values: Vec<Option<f64>> = (0..n)
        .map(|_| Some(rng.random_range(-10.0..10.0)))
        .collect();
    let grid =
        WeatherGrid::new("v", times.clone(), lats.clone(), lons.clone(), values).map_err(err)?;
    let (c0, ct, cy, cx) = (2.5, 1e-4, -0.7, 1.3);
    let affine = WeatherGrid::from_fn("a", times.clone(), lats.clone(), lons.clone(), |t, y, x| {
        c0 + ct * (t - times[0]) + cy * y + cx * x
    })
    .map_err(err)?;

    let mut worst_node = 0.0f64;
    let mut worst_affine = 0.0f64;
    for _ in 0..1000 {
        let (ti, yi, xi) = (
            rng.random_range(0..times.len()),
            rng.random_range(0..lats.len()),
            rng.random_range(0..lons.len()),
        );
        let p = GeoPoint::new(lats[yi], lons[xi]).map_err(err)?;
        let got = trilinear_interpolate(&grid, times[ti], p).map_err(err)?;
        worst_node = worst_node.max((got - grid.value(ti, yi, xi).unwrap()).abs());

        let t = rng.random_range(times[0]..=*times.last().unwrap());
        let (y, x) = (
            rng.random_range(lats[0]..=*lats.last().unwrap()),
            rng.random_range(lons[0]..=*lons.last().unwrap()),
        );
        let got =
            trilinear_interpolate(&affine, t, GeoPoint::new(y, x).map_err(err)?).map_err(err)?;
        worst_affine = worst_affine.max((got - (c0 + ct * (t - times[0]) + cy * y + cx * x)).abs());
    }
    ensure(worst_node <= 1e-9 && worst_affine <= 1e-9, || {
        format!("node error {worst_node:e}, affine error {worst_affine:e}")
    })?;
    Ok(format!(
        "1000 node and 1000 affine queries, worst errors {worst_node:.1e} / {worst_affine:.1e}"
    ))
}

fn run_cli(out: &Path, args: &[&str]) -> Result<(), String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_voyagekit"));
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("VOYAGEKIT_")) {
        cmd.env_remove(k);
    }
    let output = cmd.arg("--out").arg(out).args(args).output().map_err(err)?;
    ensure(output.status.success(), || {
        format!(
            "`{}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&output.stderr)
        )
    })
}

fn collect_files(
    root: &Path,
    dir: &Path,
    out: &mut BTreeMap<PathBuf, Vec<u8>>,
) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            out.insert(
                path.strip_prefix(root).unwrap().to_path_buf(),
                std::fs::read(&path)?,
            );
        }
    }
    Ok(())
}

fn a10() -> Outcome {
    let steps: [&[&str]; 6] = [
        &["synth"],
        &["ingest"],
        &["score"],
        &["optimize"],
        &["pathid"],
        &["report"],
    ];
    let dirs = [
        tempfile::tempdir().map_err(err)?,
        tempfile::tempdir().map_err(err)?,
    ];
    let mut trees = Vec::new();
    for d in &dirs {
        for s in steps {
            run_cli(d.path(), s)?;
        }
        let mut files = BTreeMap::new();
        collect_files(d.path(), d.path(), &mut files).map_err(err)?;
        trees.push(files);
    }
    let (a, b) = (&trees[0], &trees[1]);
    ensure(a.keys().eq(b.keys()), || {
        "runs produced different file sets".into()
    })?;
    let differing: Vec<String> = a
        .iter()
        .filter(|(k, v)| b[*k] != **v)
        .map(|(k, _)| k.display().to_string())
        .collect();
    ensure(differing.is_empty(), || {
        format!("differing files: {}", differing.join(", "))
    })?;
    ensure(a.contains_key(Path::new("report.json")), || {
        "report.json missing".into()
    })?;
    Ok(format!("two full runs, {} files byte-identical", a.len()))
}

fn panic_message(e: Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("A1", "metric reproduction, k-means/GMM table", a1),
        ("A2", "metric reproduction, hierarchical table", a2),
        ("A3", "synthetic optimization sanity", a3),
        ("A4", "path identification at desk scale", a4),
        ("A5", "DTW oracle equivalence", a5),
        ("A6", "ANND oracle equivalence", a6),
        ("A7", "HMM correctness", a7),
        ("A8", "efficiency-score algebra", a8),
        ("A9", "interpolation exactness", a9),
        ("A10", "pipeline determinism", a10),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    let mut ran = 0;
    for (id, title, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = panic::catch_unwind(check).unwrap_or_else(|e| Err(panic_message(e)));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("{id} PASS {title}: {detail} ({secs:.2}s)"),
            Err(why) => {
                failed += 1;
                println!("{id} FAIL {title}: {why} ({secs:.2}s)");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
