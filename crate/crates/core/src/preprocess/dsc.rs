use crate::error::{Error, Result};
use crate::volume::{Compartment, SegmentationMask};

/// Dice similarity coefficient `2|A∩B| / (|A|+|B|)` for one compartment.
/// Two empty sets score 1.
pub fn dsc(a: &SegmentationMask, b: &SegmentationMask, compartment: Compartment) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::arg(
            "mask",
            format!("shape mismatch {:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    let id = compartment.id();
    let (mut na, mut nb, mut both) = (0u64, 0u64, 0u64);
    for (&x, &y) in a.labels().iter().zip(b.labels().iter()) {
        let (ia, ib) = (x == id, y == id);
        na += ia as u64;
        nb += ib as u64;
        both += (ia && ib) as u64;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (na + nb) as f64)
}
