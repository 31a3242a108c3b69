use serde::{Deserialize, Serialize};

use super::{residual_dispersion_per_channel, CompensationDevice, LinkPlan};
use crate::source::{ChannelPair, ChannelPlan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub device: CompensationDevice,
    pub max_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompensationPlan {
    /// Units chosen from each catalog entry, in catalog order.
    pub counts: Vec<usize>,
    /// Residual spread at the target channel, ps.
    pub target_residual_ps: f64,
    pub insertion_loss_db: f64,
    /// (label, residual ps) for every channel of the plan.
    pub profile: Vec<(String, f64)>,
    /// False when the best allocation still exceeds the threshold.
    pub feasible: bool,
}

impl CompensationPlan {
    pub fn device_count(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn devices<'a>(&'a self, catalog: &'a [CatalogEntry]) -> impl Iterator<Item = &'a CompensationDevice> {
        catalog
            .iter()
            .zip(&self.counts)
            .flat_map(|(e, &n)| std::iter::repeat_n(&e.device, n))
    }
}

// Residuals closer than this count as a tie.
const TIE_PS: f64 = 1e-9;

/// Exhaustive search over integer device counts (each entry up to its
/// `max_count`) added to arm A. Minimizes `|residual|` at `target`, then
/// insertion loss, then device count; remaining ties go to the
/// lexicographically smallest count vector.
pub fn plan_compensation(
    link: &LinkPlan,
    catalog: &[CatalogEntry],
    target: &ChannelPair,
    channels: &ChannelPlan,
    threshold_ps: f64,
) -> CompensationPlan {
    let fwhm = channels.channel_fwhm_nm;
    let base = residual_dispersion_per_channel(target, link, fwhm);
    let unit: Vec<f64> = catalog.iter().map(|e| e.device.dispersion(target.signal_nm()) * fwhm).collect();

    let mut counts = vec![0usize; catalog.len()];
    let mut best: Option<(f64, f64, usize, Vec<usize>)> = None;
    loop {
        let residual = base + counts.iter().zip(&unit).map(|(&n, u)| n as f64 * u).sum::<f64>();
        let loss: f64 = counts.iter().zip(catalog).map(|(&n, e)| n as f64 * e.device.insertion_loss_db).sum();
        let total: usize = counts.iter().sum();
        let better = match &best {
            None => true,
            Some((r, l, c, _)) => {
                let (ra, rb) = (residual.abs(), r.abs());
                if (ra - rb).abs() > TIE_PS {
                    ra < rb
                } else if (loss - l).abs() > 1e-12 {
                    loss < *l
                } else {
                    total < *c
                }
            }
        };
        if better {
            best = Some((residual, loss, total, counts.clone()));
        }
        // odometer increment
        let mut i = 0;
        while i < counts.len() {
            if counts[i] < catalog[i].max_count {
                counts[i] += 1;
                break;
            }
            counts[i] = 0;
            i += 1;
        }
        if i == counts.len() {
            break;
        }
    }
    let (target_residual_ps, insertion_loss_db, _, counts) = best.expect("at least the empty allocation");

    let mut planned = link.clone();
    for (e, &n) in catalog.iter().zip(&counts) {
        planned.arm_a.devices.extend(std::iter::repeat_n(e.device.clone(), n));
    }
    let profile = channels
        .pairs
        .iter()
        .map(|p| (p.label.clone(), residual_dispersion_per_channel(p, &planned, fwhm)))
        .collect();
    CompensationPlan {
        counts,
        target_residual_ps,
        insertion_loss_db,
        profile,
        feasible: target_residual_ps.abs() <= threshold_ps,
    }
}
