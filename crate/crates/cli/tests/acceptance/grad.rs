//! Analytic gradients against central finite differences of the f64
//! reference networks.

use ndarray::{Array1, Array2, Axis};
use rand::Rng as _;
use uda_core::dataio::{synthesize, ShiftParams};
use uda_core::nn::loss::{bce_batch, focal_batch};
use uda_core::nn::{build_discriminator, build_head, Encoder, EncoderConfig, Gradients, Mlp, ParamStore};
use uda_core::preprocess::{preprocess_sample, PreprocessConfig};
use uda_core::rng::rng_from;
use uda_core::training::{AdaptConfig, SourceTrainConfig};
use uda_core::volume::{Domain, VolumeSample};

use crate::reference::{self as r, Weights};
use crate::Outcome;

const PROBES: usize = 10;
const STEP: f64 = 1e-5;
const TOLERANCE: f64 = 1e-3;

struct Probe {
    name: String,
    analytic: f64,
    numeric: f64,
}

impl Probe {
    fn rel_err(&self) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.analytic - self.numeric).abs() / scale
        }
    }
}

/// `(name, gradient)` per tensor, in store order.
fn named(store: &ParamStore, g: &Gradients, prefix: &str) -> Vec<(String, Vec<f32>)> {
    store
        .iter()
        .zip(&g.0)
        .map(|(p, g)| (format!("{prefix}{}", p.name), g.clone()))
        .collect()
}

/// Pick `PROBES` scalars (uniform tensor, then uniform element) whose
/// analytic gradient is nonzero, and difference `loss` along each.
fn probe(grads: &[(String, Vec<f32>)], w: &Weights, loss: impl Fn(&Weights) -> f64, seed: u64) -> Vec<Probe> {
    let mut rng = rng_from(seed);
    let mut out = Vec::new();
    let mut w = w.clone();
    for _ in 0..100_000 {
        if out.len() == PROBES {
            break;
        }
        let (name, g) = &grads[rng.random_range(0..grads.len())];
        let j = rng.random_range(0..g.len());
        if g[j] == 0.0 {
            continue;
        }
        let orig = w[name][j];
        w.get_mut(name).unwrap()[j] = orig + STEP;
        let up = loss(&w);
        w.get_mut(name).unwrap()[j] = orig - STEP;
        let down = loss(&w);
        w.get_mut(name).unwrap()[j] = orig;
        out.push(Probe {
            name: format!("{name}[{j}]"),
            analytic: g[j] as f64,
            numeric: (up - down) / (2.0 * STEP),
        });
    }
    out
}

fn stack(rows: &[Array1<f32>]) -> Array2<f32> {
    let views: Vec<_> = rows.iter().map(|r| r.view()).collect();
    ndarray::stack(Axis(0), &views).unwrap()
}

fn samples(domain: Domain, seed: u64) -> Vec<VolumeSample> {
    let pre = PreprocessConfig::desk();
    synthesize(2, domain, &ShiftParams::default(), seed)
        .unwrap()
        .iter()
        .map(|v| preprocess_sample(v, &pre).unwrap())
        .collect()
}

/// Encoder parameter gradients of `Σ_i <features_i, upstream_i>`.
fn encoder_grads(enc: &Encoder, xs: &[VolumeSample], upstream: &Array2<f32>) -> Gradients {
    let parts = xs
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let (_, tape) = enc.forward_train(&x.voxels).unwrap();
            enc.backward(&tape, &upstream.row(i).to_owned())
        })
        .collect();
    Gradients::sum(parts).unwrap()
}

fn summary(what: &str, probes: &[Probe]) -> (bool, String) {
    let worst = probes.iter().max_by(|a, b| a.rel_err().total_cmp(&b.rel_err())).unwrap();
    let ok = probes.len() == PROBES && worst.rel_err() <= TOLERANCE;
    (
        ok,
        format!(
            "{what}: {} probes, max rel err {:.2e} at {} ({:.6e} vs {:.6e})",
            probes.len(),
            worst.rel_err(),
            worst.name,
            worst.analytic,
            worst.numeric
        ),
    )
}

pub fn criterion6() -> Outcome {
    let cfg = EncoderConfig::desk();
    let gamma = SourceTrainConfig::desk().focal_gamma;
    let hidden = AdaptConfig::desk().discriminator_hidden;
    let enc = Encoder::new(cfg.clone(), 11).unwrap();
    let head = build_head(enc.feature_dim(), 12).unwrap();
    let disc: Mlp = build_discriminator(enc.feature_dim(), &hidden, 13).unwrap();
    let src = samples(Domain::Source, 14);
    let tgt = samples(Domain::Target, 15);
    let src_labels = [true, false];
    let feats = |xs: &[VolumeSample]| stack(&xs.iter().map(|x| enc.forward(&x.voxels).unwrap()).collect::<Vec<_>>());
    let (fs, ft) = (feats(&src), feats(&tgt));
    let mut lines = Vec::new();
    let mut all_ok = true;

    // encoder + head under the focal loss
    {
        let (logits, tape) = head.forward_train(&fs).unwrap();
        let (_, gl) = focal_batch(&logits, &src_labels, gamma);
        let (gh, gf) = head.backward(&tape, &gl);
        let ge = encoder_grads(&enc, &src, &gf);
        let mut grads = named(enc.params(), &ge, "");
        grads.extend(named(head.params(), &gh, ""));
        let mut w = r::weights(enc.params(), "");
        w.extend(r::weights(head.params(), ""));
        let loss = |w: &Weights| {
            src.iter()
                .zip(src_labels)
                .map(|(x, y)| r::focal(r::mlp(w, "head", 0, 0.0, &r::encoder(&cfg, w, &x.voxels)), y, gamma))
                .sum::<f64>()
                / src.len() as f64
        };
        let (ok, line) = summary("encoder+head", &probe(&grads, &w, loss, 16));
        all_ok &= ok;
        lines.push(line);
    }

    // discriminator: source = 1, target = 0
    {
        let (ls, ts) = disc.forward_train(&fs).unwrap();
        let (lt, tt) = disc.forward_train(&ft).unwrap();
        let (_, gs) = bce_batch(&ls, &[true, true]);
        let (_, gt) = bce_batch(&lt, &[false, false]);
        let (mut gd, _) = disc.backward(&ts, &gs);
        gd.add_assign(&disc.backward(&tt, &gt).0);
        let grads = named(disc.params(), &gd, "");
        let w = r::weights(disc.params(), "");
        let rows = |f: &Array2<f32>| -> Vec<Vec<f64>> {
            f.axis_iter(Axis(0)).map(|r| r.iter().map(|&v| v as f64).collect()).collect()
        };
        let (rs, rt) = (rows(&fs), rows(&ft));
        let loss = |w: &Weights| {
            let d = |x: &Vec<f64>| r::mlp(w, "discriminator", hidden.len(), 0.2, x);
            rs.iter().map(|x| r::bce(d(x), true)).sum::<f64>() / 2.0
                + rt.iter().map(|x| r::bce(d(x), false)).sum::<f64>() / 2.0
        };
        let (ok, line) = summary("discriminator", &probe(&grads, &w, loss, 17));
        all_ok &= ok;
        lines.push(line);
    }

    // target encoder through the discriminator with inverted labels
    {
        let (lt, tt) = disc.forward_train(&ft).unwrap();
        let (_, g) = bce_batch(&lt, &[true, true]);
        let (_, gx) = disc.backward(&tt, &g);
        let ge = encoder_grads(&enc, &tgt, &gx);
        let grads = named(enc.params(), &ge, "");
        let mut w = r::weights(enc.params(), "");
        w.extend(r::weights(disc.params(), ""));
        let loss = |w: &Weights| {
            tgt.iter()
                .map(|x| r::bce(r::mlp(w, "discriminator", hidden.len(), 0.2, &r::encoder(&cfg, w, &x.voxels)), true))
                .sum::<f64>()
                / tgt.len() as f64
        };
        let (ok, line) = summary("encoder via discriminator", &probe(&grads, &w, loss, 18));
        all_ok &= ok;
        lines.push(line);
    }

    let detail = lines.join("; ");
    if all_ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}
