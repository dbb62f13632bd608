use ndarray::Array2;

use uda_core::dataio::{intensity_histogram, synthesize, ShiftParams};
use uda_core::evaluation::domain_probe_accuracy;
use uda_core::volume::{Domain, VolumeSample};

fn histograms(samples: &[VolumeSample], lo: f64, hi: f64) -> Array2<f64> {
    let rows: Vec<Vec<f64>> = samples.iter().map(|s| intensity_histogram(&s.voxels, 32, lo, hi)).collect();
    Array2::from_shape_fn((rows.len(), 32), |(i, j)| rows[i][j])
}

#[test]
fn default_shift_is_visible_to_a_histogram_probe() {
    let p = ShiftParams::default();
    let src = synthesize(100, Domain::Source, &p, 21).unwrap();
    let tgt = synthesize(100, Domain::Target, &p, 22).unwrap();
    let all = src.iter().chain(&tgt).flat_map(|s| s.voxels.iter().map(|&x| x as f64));
    let (lo, hi) = all.fold((f64::MAX, f64::MIN), |(a, b), x| (a.min(x), b.max(x)));
    let acc = domain_probe_accuracy(&histograms(&src, lo, hi), &histograms(&tgt, lo, hi), 5).unwrap();
    assert!(acc >= 0.9, "probe accuracy {acc}");
}

#[test]
fn no_shift_preset_is_not() {
    let p = ShiftParams::preset("none").unwrap();
    let src = synthesize(60, Domain::Source, &p, 31).unwrap();
    let tgt = synthesize(60, Domain::Target, &p, 32).unwrap();
    let all = src.iter().chain(&tgt).flat_map(|s| s.voxels.iter().map(|&x| x as f64));
    let (lo, hi) = all.fold((f64::MAX, f64::MIN), |(a, b), x| (a.min(x), b.max(x)));
    let acc = domain_probe_accuracy(&histograms(&src, lo, hi), &histograms(&tgt, lo, hi), 5).unwrap();
    assert!(acc <= 0.75, "probe accuracy {acc}");
}
