//! Synthetic knee-like phantoms with planted lesions and a parameterized
//! acquisition shift between the two domains.
//!
//! Geometry lives in normalized coordinates `[-1, 1]^3`: x runs
//! medial-lateral, y inferior-superior, z posterior-anterior (the slice
//! axis). A phantom has femur, tibia and patella bone inside a soft-tissue
//! envelope, cartilage shells on the articular surfaces, and two menisci
//! in the tibiofemoral gap. Positive subchondral-bone samples carry a
//! bright blob just beneath an articular bone surface; positive
//! cartilage/meniscus samples carry a bright defect in a tibial cartilage
//! plate or meniscus.

use std::path::{Path, PathBuf};

use ndarray::Array3;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::manifest::{save_manifest, DatasetManifest, ManifestEntry, ManifestMeta};
use crate::error::{Error, Result};
use crate::exec;
use crate::phenotype::{Phenotype, PhenotypeLabel};
use crate::rng::{derive_indexed, derive_seed, rng_from, Rng};
use crate::volume::{write_mask, write_volume, Compartment, Domain, SegmentationMask, Shape3, VolumeSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TissueIntensities {
    pub background: f64,
    pub soft_tissue: f64,
    pub bone: f64,
    pub cartilage: f64,
    pub meniscus: f64,
}

/// Acquisition model of one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainParams {
    pub shape: Shape3,
    pub spacing: [f64; 3],
    pub tissue: TissueIntensities,
    /// Applied as `gain · v + offset` after rendering tissue and lesions.
    pub gain: f64,
    pub offset: f64,
    /// Gaussian blur width in voxels (0 disables).
    pub smoothing_sd: f64,
    /// Per-sample amplitude range of an alternating-slice intensity
    /// artifact inside the body.
    pub stripe_amplitude: [f64; 2],
    pub noise_sd: f64,
    /// Maximum per-axis translation and relative scale jitter of the
    /// anatomy, in normalized units.
    pub geometry_jitter: f64,
    /// Per-sample relative jitter of each tissue intensity.
    #[serde(default)]
    pub tissue_jitter: f64,
    /// Multiplier on lesion contrasts.
    pub lesion_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionParams {
    /// Radius range in normalized units.
    pub radius_range: [f64; 2],
    /// Peak intensity added by a subchondral bone lesion.
    pub bml_contrast: f64,
    /// Peak intensity added by a cartilage or meniscus defect.
    pub defect_contrast: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftParams {
    pub source: DomainParams,
    pub target: DomainParams,
    pub lesion: LesionParams,
    /// Fraction of positives for each phenotype.
    pub prevalence: f64,
}

impl DomainParams {
    fn source_default() -> Self {
        DomainParams {
            shape: [64, 64, 32],
            spacing: [0.6, 0.6, 1.2],
            tissue: TissueIntensities {
                background: 0.0,
                soft_tissue: 0.35,
                bone: 0.5,
                cartilage: 0.9,
                meniscus: 0.1,
            },
            gain: 1.0,
            offset: 0.0,
            smoothing_sd: 0.0,
            stripe_amplitude: [0.0, 0.0],
            noise_sd: 0.03,
            geometry_jitter: 0.1,
            tissue_jitter: 0.25,
            lesion_gain: 1.0,
        }
    }

    fn target_default() -> Self {
        DomainParams {
            shape: [56, 56, 28],
            spacing: [0.6 * 64.0 / 56.0, 0.6 * 64.0 / 56.0, 1.2 * 32.0 / 28.0],
            tissue: TissueIntensities {
                background: 0.0,
                soft_tissue: 0.5,
                bone: 0.85,
                cartilage: 0.6,
                meniscus: 0.1,
            },
            gain: 1.5,
            offset: 0.1,
            smoothing_sd: 0.6,
            stripe_amplitude: [0.6, 0.6],
            noise_sd: 0.05,
            geometry_jitter: 0.1,
            tissue_jitter: 0.25,
            lesion_gain: 0.6,
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("{name} domain: {m}")));
        if self.shape.iter().any(|&n| n < 4) {
            return bad(format!("shape {:?} too small", self.shape));
        }
        if self.spacing.iter().any(|s| !(*s > 0.0)) {
            return bad("spacing must be positive".into());
        }
        if !(self.gain > 0.0) || !self.offset.is_finite() {
            return bad("gain must be positive and offset finite".into());
        }
        if !(self.smoothing_sd >= 0.0 && self.noise_sd >= 0.0 && self.lesion_gain >= 0.0) {
            return bad("smoothing, noise and lesion gain must be non-negative".into());
        }
        let [a, b] = self.stripe_amplitude;
        if !(a >= 0.0 && b >= a) {
            return bad("stripe amplitude range must be ordered and non-negative".into());
        }
        if !(0.0..0.3).contains(&self.geometry_jitter) {
            return bad("geometry jitter must lie in [0, 0.3)".into());
        }
        if !(0.0..1.0).contains(&self.tissue_jitter) {
            return bad("tissue jitter must lie in [0, 1)".into());
        }
        Ok(())
    }
}

impl Default for ShiftParams {
    fn default() -> Self {
        ShiftParams {
            source: DomainParams::source_default(),
            target: DomainParams::target_default(),
            lesion: LesionParams {
                radius_range: [0.2, 0.3],
                bml_contrast: 1.2,
                defect_contrast: 0.5,
            },
            prevalence: 1.0 / 3.0,
        }
    }
}

impl ShiftParams {
    /// Named presets: `default`, `none` (target rendered like the source
    /// apart from its grid), `strong`.
    pub fn preset(name: &str) -> Result<Self> {
        let mut p = ShiftParams::default();
        match name {
            "default" => {}
            "none" => {
                let t = &mut p.target;
                t.tissue = p.source.tissue.clone();
                t.gain = 1.0;
                t.offset = 0.0;
                t.smoothing_sd = 0.0;
                t.stripe_amplitude = [0.0, 0.0];
                t.noise_sd = p.source.noise_sd;
                t.lesion_gain = 1.0;
            }
            "strong" => {
                p.target.stripe_amplitude = [0.9, 0.9];
                p.target.smoothing_sd = 0.9;
                p.target.lesion_gain = 0.5;
            }
            other => return Err(Error::arg("shift_preset", format!("unknown preset `{other}`"))),
        }
        Ok(p)
    }

    pub fn domain(&self, d: Domain) -> &DomainParams {
        match d {
            Domain::Source => &self.source,
            Domain::Target => &self.target,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate("source")?;
        self.target.validate("target")?;
        if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
            return Err(Error::Config(format!("prevalence {} outside (0, 1)", self.prevalence)));
        }
        let [a, b] = self.lesion.radius_range;
        if !(a > 0.0 && b >= a) {
            return Err(Error::Config("lesion radii must be positive and ordered".into()));
        }
        if !(self.lesion.bml_contrast.is_finite() && self.lesion.defect_contrast.is_finite()) {
            return Err(Error::Config("lesion contrasts must be finite".into()));
        }
        Ok(())
    }
}

/// Number of positives among `n` samples: the two-class largest-remainder
/// rounding of `n · prevalence`; an exact half goes to the rarer class.
pub fn positive_count(n: usize, prevalence: f64) -> usize {
    let exact = n as f64 * prevalence;
    let floor = exact.floor();
    let rem = exact - floor;
    let extra = if rem > 0.5 || (rem == 0.5 && prevalence < 0.5) { 1 } else { 0 };
    (floor as usize + extra).min(n)
}

struct Ellipsoid {
    c: [f64; 3],
    r: [f64; 3],
}

impl Ellipsoid {
    /// Squared normalized radius; `< 1` is inside.
    fn rho(&self, q: [f64; 3]) -> f64 {
        (0..3).map(|a| ((q[a] - self.c[a]) / self.r[a]).powi(2)).sum()
    }

    fn grown(&self, by: f64) -> Ellipsoid {
        Ellipsoid {
            c: self.c,
            r: self.r.map(|r| r + by),
        }
    }
}

const FEMUR: Ellipsoid = Ellipsoid {
    c: [0.0, 0.45, 0.0],
    r: [0.7, 0.4, 0.6],
};
const TIBIA: Ellipsoid = Ellipsoid {
    c: [0.0, -0.5, 0.0],
    r: [0.75, 0.3, 0.6],
};
const PATELLA: Ellipsoid = Ellipsoid {
    c: [0.0, 0.35, 0.8],
    r: [0.25, 0.2, 0.12],
};
const BODY: Ellipsoid = Ellipsoid {
    c: [0.0, 0.0, 0.0],
    r: [0.95, 0.95, 0.95],
};
const MEDIAL_MENISCUS: Ellipsoid = Ellipsoid {
    c: [-0.55, -0.13, 0.0],
    r: [0.18, 0.06, 0.45],
};
const LATERAL_MENISCUS: Ellipsoid = Ellipsoid {
    c: [0.55, -0.13, 0.0],
    r: [0.18, 0.06, 0.45],
};
const CARTILAGE: f64 = 0.07;

#[derive(Clone, Copy, PartialEq)]
enum Tissue {
    Background,
    Soft,
    Bone,
    Cartilage,
    Meniscus,
}

fn classify(q: [f64; 3]) -> (Tissue, Compartment) {
    if FEMUR.rho(q) < 1.0 || TIBIA.rho(q) < 1.0 || PATELLA.rho(q) < 1.0 {
        return (Tissue::Bone, Compartment::Background);
    }
    if FEMUR.grown(CARTILAGE).rho(q) < 1.0 && q[1] < FEMUR.c[1] {
        return (Tissue::Cartilage, Compartment::FemoralCartilage);
    }
    if TIBIA.grown(CARTILAGE).rho(q) < 1.0 && q[1] > TIBIA.c[1] {
        let c = if q[0] < 0.0 {
            Compartment::MedialTibialCartilage
        } else {
            Compartment::LateralTibialCartilage
        };
        return (Tissue::Cartilage, c);
    }
    if PATELLA.grown(CARTILAGE).rho(q) < 1.0 && q[2] < PATELLA.c[2] {
        return (Tissue::Cartilage, Compartment::PatellarCartilage);
    }
    if MEDIAL_MENISCUS.rho(q) < 1.0 {
        return (Tissue::Meniscus, Compartment::MedialMeniscus);
    }
    if LATERAL_MENISCUS.rho(q) < 1.0 {
        return (Tissue::Meniscus, Compartment::LateralMeniscus);
    }
    if BODY.rho(q) < 1.0 {
        (Tissue::Soft, Compartment::Background)
    } else {
        (Tissue::Background, Compartment::Background)
    }
}

struct Blob {
    c: [f64; 3],
    r: f64,
    peak: f64,
    /// Tissue the blob brightens.
    within: &'static [Tissue],
}

impl Blob {
    fn add(&self, q: [f64; 3], t: Tissue) -> f64 {
        if !self.within.contains(&t) {
            return 0.0;
        }
        let d2: f64 = (0..3).map(|a| (q[a] - self.c[a]).powi(2)).sum::<f64>() / (self.r * self.r);
        if d2 < 1.0 {
            self.peak * (1.0 - d2)
        } else {
            0.0
        }
    }
}

fn uniform(rng: &mut Rng, [a, b]: [f64; 2]) -> f64 {
    if b > a {
        rng.random_range(a..b)
    } else {
        a
    }
}

/// Height of an ellipsoid's upper (`sign = 1`) or lower surface at (x, z).
fn surface_y(e: &Ellipsoid, x: f64, z: f64, sign: f64) -> f64 {
    let s = 1.0 - ((x - e.c[0]) / e.r[0]).powi(2) - ((z - e.c[2]) / e.r[2]).powi(2);
    e.c[1] + sign * e.r[1] * s.max(0.0).sqrt()
}

fn bml_blob(rng: &mut Rng, lesion: &LesionParams, gain: f64) -> Blob {
    let r = uniform(rng, lesion.radius_range);
    let tibial = rng.random::<bool>();
    let x = rng.random_range(-0.45..0.45);
    let z = rng.random_range(-0.3..0.3);
    let y = if tibial {
        surface_y(&TIBIA, x, z, 1.0) - 0.02 - 0.5 * r
    } else {
        surface_y(&FEMUR, x, z, -1.0) + 0.02 + 0.5 * r
    };
    Blob {
        c: [x, y, z],
        r,
        peak: lesion.bml_contrast * gain,
        within: &[Tissue::Bone],
    }
}

fn defect_blob(rng: &mut Rng, lesion: &LesionParams, gain: f64) -> Blob {
    let r = uniform(rng, lesion.radius_range);
    let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let x = side * rng.random_range(0.2..0.6);
    let z = rng.random_range(-0.3..0.3);
    Blob {
        c: [x, -0.14, z],
        r,
        peak: lesion.defect_contrast * gain,
        within: &[Tissue::Cartilage, Tissue::Meniscus],
    }
}

/// Separable Gaussian blur with clamped edges.
fn blur(v: &mut Array3<f32>, sd: f64) {
    if sd <= 0.0 {
        return;
    }
    let rad = (3.0 * sd).ceil() as isize;
    let k: Vec<f64> = (-rad..=rad).map(|i| (-(i * i) as f64 / (2.0 * sd * sd)).exp()).collect();
    let norm: f64 = k.iter().sum();
    for axis in 0..3 {
        let src = v.clone();
        let n = src.shape()[axis] as isize;
        for (idx, out) in v.indexed_iter_mut() {
            let mut acc = 0.0;
            for (o, w) in (-rad..=rad).zip(&k) {
                let mut j = [idx.0, idx.1, idx.2];
                j[axis] = (j[axis] as isize + o).clamp(0, n - 1) as usize;
                acc += w * src[j] as f64;
            }
            *out = (acc / norm) as f32;
        }
    }
}

/// Render one raw sample of `domain`.
fn render(
    id: String,
    domain: Domain,
    params: &ShiftParams,
    label: PhenotypeLabel,
    seed: u64,
) -> Result<VolumeSample> {
    let d = params.domain(domain);
    let mut rng = rng_from(seed);
    let j = d.geometry_jitter;
    let shift: [f64; 3] = std::array::from_fn(|_| if j > 0.0 { rng.random_range(-j..j) } else { 0.0 });
    let scale = if j > 0.0 { 1.0 + rng.random_range(-j..j) } else { 1.0 };
    let stripe = uniform(&mut rng, d.stripe_amplitude);
    let noise_seed: u64 = rng.random();
    let mut blobs = Vec::new();
    let bml = bml_blob(&mut rng, &params.lesion, d.lesion_gain);
    let defect = defect_blob(&mut rng, &params.lesion, d.lesion_gain);
    if label.subchondral_bone == Some(true) {
        blobs.push(bml);
    }
    if label.cartilage_meniscus == Some(true) {
        blobs.push(defect);
    }

    let [nx, ny, nz] = d.shape;
    let tj = d.tissue_jitter;
    let mut jit = |v: f64| if tj > 0.0 { v * (1.0 + rng.random_range(-tj..tj)) } else { v };
    let t = TissueIntensities {
        background: d.tissue.background,
        soft_tissue: jit(d.tissue.soft_tissue),
        bone: jit(d.tissue.bone),
        cartilage: jit(d.tissue.cartilage),
        meniscus: jit(d.tissue.meniscus),
    };
    let mut labels = Array3::<u16>::zeros(d.shape);
    let mut body = Array3::<bool>::from_elem(d.shape, false);
    let mut vox = Array3::<f32>::zeros(d.shape);
    for ((x, y, z), out) in vox.indexed_iter_mut() {
        let p = [
            (x as f64 + 0.5) / nx as f64 * 2.0 - 1.0,
            (y as f64 + 0.5) / ny as f64 * 2.0 - 1.0,
            (z as f64 + 0.5) / nz as f64 * 2.0 - 1.0,
        ];
        let q: [f64; 3] = std::array::from_fn(|a| (p[a] - shift[a]) / scale);
        let (tissue, comp) = classify(q);
        let mut v = match tissue {
            Tissue::Background => t.background,
            Tissue::Soft => t.soft_tissue,
            Tissue::Bone => t.bone,
            Tissue::Cartilage => t.cartilage,
            Tissue::Meniscus => t.meniscus,
        };
        v += blobs.iter().map(|b| b.add(q, tissue)).sum::<f64>();
        *out = (d.gain * v + d.offset) as f32;
        labels[[x, y, z]] = comp.id();
        body[[x, y, z]] = tissue != Tissue::Background;
    }
    blur(&mut vox, d.smoothing_sd);
    let mut nrng = rng_from(noise_seed);
    let normal = Normal::new(0.0, d.noise_sd.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    for ((x, y, z), v) in vox.indexed_iter_mut() {
        if body[[x, y, z]] {
            *v += (if z % 2 == 0 { stripe } else { -stripe }) as f32;
        }
        if d.noise_sd > 0.0 {
            *v += normal.sample(&mut nrng) as f32;
        }
    }
    let mut s = VolumeSample::new(id, vox, d.spacing, domain)?.with_mask(SegmentationMask::new(labels)?)?;
    s.label = Some(label);
    Ok(s)
}

fn domain_tag(domain: Domain) -> &'static str {
    match domain {
        Domain::Source => "source",
        Domain::Target => "target",
    }
}

/// Labels for `n` samples: each phenotype independently gets exactly
/// `positive_count(n, prevalence)` positives at seeded positions.
fn assign_labels(n: usize, prevalence: f64, seed: u64, domain: Domain) -> Vec<PhenotypeLabel> {
    let mut labels = vec![PhenotypeLabel::default(); n];
    let k = positive_count(n, prevalence);
    for p in Phenotype::ALL {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng_from(derive_seed(
            seed,
            &format!("synth/{}/labels/{}", domain_tag(domain), p.as_str()),
        )));
        let mut flags = vec![false; n];
        for &i in &idx[..k] {
            flags[i] = true;
        }
        for (l, f) in labels.iter_mut().zip(flags) {
            l.set(p, Some(f));
        }
    }
    labels
}

pub fn sample_id(domain: Domain, i: usize) -> String {
    format!("{}-{i:04}", domain_tag(domain))
}

/// Generate `n` raw samples in memory. Sample `i` depends only on
/// `(seed, domain, i)` and its labels.
pub fn synthesize(n: usize, domain: Domain, params: &ShiftParams, seed: u64) -> Result<Vec<VolumeSample>> {
    if n == 0 {
        return Err(Error::arg("n", "must be at least 1"));
    }
    params.validate()?;
    let labels = assign_labels(n, params.prevalence, seed, domain);
    let tag = format!("synth/{}", domain_tag(domain));
    exec::try_map_range(n, |i| {
        render(
            sample_id(domain, i),
            domain,
            params,
            labels[i],
            derive_indexed(seed, &tag, i as u64),
        )
    })
}

/// Write samples and their masks under `dir` and return a manifest whose
/// paths are relative to `dir`.
pub fn write_dataset(samples: &[VolumeSample], dir: &Path, meta: ManifestMeta) -> Result<DatasetManifest> {
    let vol_dir = dir.join("volumes");
    std::fs::create_dir_all(&vol_dir).map_err(|e| Error::io(&vol_dir, e))?;
    let entries = exec::try_map_range(samples.len(), |i| {
        let s = &samples[i];
        let vol = PathBuf::from("volumes").join(format!("{}.vol.json", s.sample_id));
        write_volume(&dir.join(&vol), s)?;
        let mask = match &s.mask {
            Some(m) => {
                let p = PathBuf::from("volumes").join(format!("{}.mask.json", s.sample_id));
                write_mask(&dir.join(&p), m, s)?;
                Some(p)
            }
            None => None,
        };
        Ok::<_, Error>(ManifestEntry {
            sample_id: s.sample_id.clone(),
            volume: vol,
            mask,
            domain: s.domain,
            labels: s.label,
            split: None,
        })
    })?;
    let manifest = DatasetManifest { meta, entries };
    save_manifest(&manifest, &dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Generate `n` samples of `domain` and store them, with `manifest.json`,
/// under `dir`.
pub fn generate_synthetic(
    n: usize,
    domain: Domain,
    params: &ShiftParams,
    seed: u64,
    dir: &Path,
) -> Result<DatasetManifest> {
    let samples = synthesize(n, domain, params, seed)?;
    let meta = ManifestMeta {
        seed: Some(seed),
        generator: Some(serde_json::json!({
            "kind": "phantom",
            "n": n,
            "domain": domain,
            "params": params,
        })),
        ..ManifestMeta::default()
    };
    write_dataset(&samples, dir, meta)
}

/// Normalized intensity histogram over `[lo, hi)`; values outside are
/// clamped into the edge bins.
pub fn intensity_histogram(v: &Array3<f32>, bins: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    let w = (hi - lo) / bins as f64;
    for &x in v {
        let b = (((x as f64 - lo) / w).floor().max(0.0) as usize).min(bins - 1);
        h[b] += 1.0;
    }
    let n = v.len() as f64;
    h.iter_mut().for_each(|c| *c /= n);
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prevalence_counts() {
        assert_eq!(positive_count(100, 1.0 / 3.0), 33);
        assert_eq!(positive_count(50, 1.0 / 3.0), 17);
        assert_eq!(positive_count(3, 0.5), 1);
        assert_eq!(positive_count(10, 0.3), 3);
        let s = synthesize(12, Domain::Source, &ShiftParams::default(), 1).unwrap();
        let pos = s.iter().filter(|v| v.label.unwrap().subchondral_bone == Some(true)).count();
        assert_eq!(pos, 4);
    }

    #[test]
    fn phantom_has_every_compartment() {
        let s = &synthesize(1, Domain::Target, &ShiftParams::default(), 2).unwrap()[0];
        assert_eq!(s.shape(), [56, 56, 28]);
        let labels = s.mask.as_ref().unwrap().labels();
        for c in Compartment::ALL {
            assert!(labels.iter().any(|&l| l == c.id()), "{c:?} missing");
        }
    }

    #[test]
    fn same_seed_same_samples() {
        let p = ShiftParams::default();
        let a = synthesize(3, Domain::Source, &p, 9).unwrap();
        let b = synthesize(3, Domain::Source, &p, 9).unwrap();
        assert_eq!(a, b);
        assert!(ShiftParams::preset("none").is_ok());
        assert!(ShiftParams::preset("nope").is_err());
    }

    #[test]
    fn tissue_jitter_varies_samples_within_a_domain() {
        let mean = |v: &VolumeSample| v.voxels.iter().map(|&x| x as f64).sum::<f64>() / v.voxels.len() as f64;
        let spread = |jitter: f64| {
            let mut p = ShiftParams::default();
            p.source.tissue_jitter = jitter;
            p.source.noise_sd = 0.0;
            let m: Vec<f64> = synthesize(6, Domain::Source, &p, 4).unwrap().iter().map(mean).collect();
            m.iter().cloned().fold(f64::MIN, f64::max) - m.iter().cloned().fold(f64::MAX, f64::min)
        };
        assert!(spread(0.25) > spread(0.0));
        let mut p = ShiftParams::default();
        p.target.tissue_jitter = 1.0;
        assert!(matches!(p.validate(), Err(Error::Config(_))));
    }
}
