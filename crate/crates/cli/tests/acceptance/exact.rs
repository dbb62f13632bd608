//! Criteria with exact or closed-form oracles: metric arithmetic,
//! balancing, AUROC and McNemar enumeration, the learning-rate decay,
//! focal loss and Dice.

use astro_float::{BigFloat, Consts, Radix, RoundingMode};
use ndarray::Array3;
use rand::Rng as _;
use uda_core::evaluation::{classification_metrics, dsc, exact_p, mcnemar_counts, roc_auc_exact, McNemarMethod};
use uda_core::nn::loss::{bce_with_logits, focal_loss};
use uda_core::phenotype::{balance_dataset, Fraction};
use uda_core::rng::rng_from;
use uda_core::training::lr_schedule;
use uda_core::volume::{Compartment, SegmentationMask};

use crate::{verdict, Outcome};

/// Percentage text as printed in the table -> hundredths of a percent.
fn hundredths(text: &str) -> u64 {
    let (whole, frac) = text.split_once('.').unwrap_or((text, ""));
    let frac = format!("{frac:0<2}");
    whole.parse::<u64>().unwrap() * 100 + frac.parse::<u64>().unwrap()
}

pub fn criterion1() -> Outcome {
    // (row, tp, fn, tn, fp, sensitivity, specificity, accuracy)
    let rows = [
        ("cartilage/meniscus with UDA", 2, 2, 45, 1, "50", "97.83", "94"),
        ("cartilage/meniscus without UDA", 1, 3, 34, 12, "25", "73.91", "70"),
        ("subchondral bone with UDA", 3, 2, 30, 15, "60", "66.67", "66"),
        ("subchondral bone without UDA", 3, 2, 19, 26, "60", "42.22", "44"),
    ];
    let mut matched = 0;
    let mut misses = Vec::new();
    for (row, tp, fn_, tn, fp, sens, spec, acc) in rows {
        let mut preds = Vec::new();
        let mut labels = Vec::new();
        for (p, y, n) in [(true, true, tp), (false, true, fn_), (false, false, tn), (true, false, fp)] {
            preds.extend(std::iter::repeat_n(p, n));
            labels.extend(std::iter::repeat_n(y, n));
        }
        let m = classification_metrics(&preds, &labels).unwrap();
        for (what, got, want) in [
            ("sensitivity", m.sensitivity, sens),
            ("specificity", m.specificity, spec),
            ("accuracy", m.accuracy, acc),
        ] {
            if got.percent_hundredths() == Some(hundredths(want)) {
                matched += 1;
            } else {
                misses.push(format!("{row} {what}: {got} vs {want}"));
            }
        }
    }
    verdict(matched == 12, format!("{matched}/12 percentages reproduced {}", misses.join(", ")))
}

pub fn criterion2() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for (pos, total, want) in [(106usize, 3104usize, 318usize), (320, 3110, 960)] {
        let labels: Vec<(String, bool)> = (0..total).map(|i| (format!("s{i}"), i < pos)).collect();
        for seed in 0..5 {
            let kept = balance_dataset(&labels, Fraction::one_third(), seed).unwrap();
            let kept_pos = kept.iter().filter(|id| id[1..].parse::<usize>().unwrap() < pos).count();
            ok &= kept.len() == want && kept_pos == pos && 3 * kept_pos == kept.len();
        }
        details.push(format!("{pos}/{total} -> {pos}/{want}"));
    }
    verdict(ok, format!("{}, positive fraction 1/3 over 5 seeds", details.join(", ")))
}

pub fn criterion3() -> Outcome {
    let mut rng = rng_from(2024);
    let mut auc_bad = 0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=20);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        // a small score alphabet forces ties
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64 * 0.25).collect();
        let (mut num, mut pairs) = (0u128, 0u128);
        for i in (0..n).filter(|&i| labels[i]) {
            for j in (0..n).filter(|&j| !labels[j]) {
                pairs += 1;
                num += match scores[i].total_cmp(&scores[j]) {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
        let a = roc_auc_exact(&scores, &labels).unwrap();
        // num / (2 pairs) == a.numerator / a.denominator, cross-multiplied
        auc_bad += (num * a.denominator != a.numerator * 2 * pairs) as usize;
    }
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 0..=12u32 {
        for b in 0..=n as u64 {
            let c = n as u64 - b;
            // every sequence of n discordant pairs is equally likely under
            // the null; count those at least as far from n/2 as b
            let dev = |k: u64| (2 * k as i64 - n as i64).abs();
            let extreme = (0u32..1 << n).filter(|s| dev(s.count_ones() as u64) >= dev(b)).count();
            let p = extreme as f64 / (1u64 << n) as f64;
            let r = mcnemar_counts(b, c);
            assert_eq!(r.method, McNemarMethod::ExactBinomial);
            worst = worst.max((r.p_value - p).abs()).max((exact_p(b, c) - p).abs());
            cases += 1;
        }
    }
    verdict(
        auc_bad == 0 && worst <= 1e-9,
        format!("AUROC exact on 1000/1000 instances ({auc_bad} mismatches); McNemar {cases} cases, max |dp| {worst:.1e}"),
    )
}

const BITS: usize = 320;
const RM: RoundingMode = RoundingMode::ToEven;

/// Decimal literal at working precision.
fn big(s: &str, cc: &mut Consts) -> BigFloat {
    BigFloat::parse(s, Radix::Dec, BITS, RM, cc)
}

pub fn criterion4() -> Outcome {
    let (p, rm) = (BITS, RM);
    let mut cc = Consts::new().unwrap();
    let to_f64 = |x: &BigFloat| format!("{x}").parse::<f64>().unwrap();
    let mut worst = 0.0f64;
    let mut decreasing = true;
    let mut compared = 0;
    let mut underflow_ok = true;
    let mut notes = Vec::new();
    // The first setting is the published one. Its exact value drops below
    // the normal f64 range after a few thousand epochs; past that point the
    // iterate only has to underflow too. The other two stay representable
    // for all 10,000 epochs.
    for (alpha0, gamma, lambda) in [("0.001", "0.0003", "0.75"), ("0.01", "0.00001", "0.75"), ("0.1", "0.00001", "1")] {
        let (g, l) = (big(gamma, &mut cc), big(lambda, &mut cc));
        let minus_l = l.neg();
        let one = big("1", &mut cc);
        let mut exact = big(alpha0, &mut cc);
        let mut a = alpha0.parse::<f64>().unwrap();
        let (gf, lf) = (gamma.parse::<f64>().unwrap(), lambda.parse::<f64>().unwrap());
        let mut last_normal = None;
        for n in 0..10_000u64 {
            let next = lr_schedule(a, n, gf, lf);
            let base = one.add(&g.mul(&BigFloat::from_u64(n, p), p, rm), p, rm);
            exact = exact.mul(&base.pow(&minus_l, p, rm, &mut cc), p, rm);
            let e = to_f64(&exact);
            if e >= f64::MIN_POSITIVE {
                worst = worst.max(((next - e) / e).abs());
                if n > 0 && !(next < a) {
                    decreasing = false;
                }
                compared += 1;
                last_normal = Some(n + 1);
            } else {
                underflow_ok &= next < f64::MIN_POSITIVE && next <= a;
            }
            a = next;
        }
        notes.push(format!(
            "(γ={gamma}, λ={lambda}) normal through epoch {}",
            last_normal.unwrap_or(0)
        ));
    }
    let spot = lr_schedule(0.001, 1000, 0.0003, 0.75);
    let spot_exact = {
        let base = big("1.3", &mut cc);
        let v = base.pow(&big("-0.75", &mut cc), p, rm, &mut cc).mul(&big("0.001", &mut cc), p, rm);
        to_f64(&v)
    };
    let spot_err = ((spot - spot_exact) / spot_exact).abs();
    let rounded = format!("{spot:.3e}");
    verdict(
        worst <= 1e-12 && decreasing && underflow_ok && spot_err <= 1e-6 && rounded == "8.214e-4",
        format!(
            "10,000 epochs x 3 settings, {compared} representable values, max rel err {worst:.1e} [{}]; \
             strictly decreasing after the first step: {decreasing}; spot {spot:.10e} ({rounded}), rel err {spot_err:.1e}",
            notes.join(", ")
        ),
    )
}

pub fn criterion5() -> Outcome {
    let mut rng = rng_from(5);
    let (mut ce_err, mut above) = (0.0f64, 0usize);
    for _ in 0..1000 {
        let z: f64 = rng.random_range(-30.0..30.0);
        let y = rng.random_bool(0.5);
        // -ln σ(±z) in a form without cancellation
        let s = if y { z } else { -z };
        let ce = if s > 0.0 { (-s).exp().ln_1p() } else { -s + s.exp().ln_1p() };
        ce_err = ce_err.max((focal_loss(z, y, 0.0) - ce).abs()).max((bce_with_logits(z, y) - ce).abs());
        let gamma: f64 = rng.random_range(0.0..5.0);
        above += (focal_loss(z, y, gamma) > ce) as usize;
    }
    let half_ln2 = (focal_loss(0.0, true, 1.0) - 0.5 * std::f64::consts::LN_2).abs();
    verdict(
        ce_err <= 1e-9 && half_ln2 <= 1e-9 && above == 0,
        format!("|FL(γ=0) - CE| max {ce_err:.1e}; |FL(0, y=1, γ=1) - ln2/2| {half_ln2:.1e}; {above} points above CE"),
    )
}

pub fn criterion12() -> Outcome {
    let c = Compartment::FemoralCartilage;
    let mask = |cells: &[[usize; 3]]| {
        let mut m = SegmentationMask::background([2, 2, 2]);
        for &i in cells {
            m.set(i, c);
        }
        m
    };
    // |A| = |B| = 4 with 2 shared voxels
    let a = mask(&[[0, 0, 0], [0, 0, 1], [0, 1, 0], [0, 1, 1]]);
    let b = mask(&[[0, 0, 0], [0, 0, 1], [1, 0, 0], [1, 0, 1]]);
    let fixture = dsc(&a, &b, c).unwrap();
    let disjoint = dsc(&mask(&[[0, 0, 0]]), &mask(&[[1, 1, 1]]), c).unwrap();
    let mut rng = rng_from(12);
    let mut sym = true;
    let mut selfone = true;
    for _ in 0..200 {
        let random = |rng: &mut uda_core::rng::Rng| {
            SegmentationMask::new(Array3::from_shape_fn((6, 5, 4), |_| rng.random_range(0..7u16))).unwrap()
        };
        let (x, y) = (random(&mut rng), random(&mut rng));
        for comp in Compartment::ALL {
            sym &= dsc(&x, &y, comp).unwrap() == dsc(&y, &x, comp).unwrap();
            selfone &= dsc(&x, &x, comp).unwrap() == 1.0;
        }
    }
    verdict(
        fixture == 0.5 && disjoint == 0.0 && sym && selfone,
        format!("2*2/8 fixture {fixture}, disjoint {disjoint}, symmetric {sym}, dsc(a,a)=1 {selfone} over 200 random pairs"),
    )
}
