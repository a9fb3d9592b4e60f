// SPDX-License-Identifier: Apache-2.0

use super::{compute_r, AuctionError, BidTrace, SlotAuction, DEFAULT_R_CUTOFF};
use crate::distributions::nearest_rank;
use crate::units::{Fraction, SlotTimeMs};

/// Which bid timestamp goes on the x axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Abscissa {
    #[default]
    Eligible,
    Received,
}

impl Abscissa {
    fn of(self, bid: &BidTrace) -> i64 {
        match self {
            Abscissa::Eligible => bid.eligible_at.ms(),
            Abscissa::Received => bid.received_at.ms(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordinate {
    /// Bid value over the auction maximum; bids after the cutoff are skipped.
    RValue,
    GasUsed,
    TxCount,
    /// Bid value in wei.
    Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSpec {
    pub abscissa: Abscissa,
    pub ordinate: Ordinate,
    pub bin_width_ms: i64,
    /// Half-open `[lo, hi)`; derived from the data when absent.
    pub range: Option<(i64, i64)>,
    pub cutoff: SlotTimeMs,
}

impl CurveSpec {
    pub fn new(ordinate: Ordinate) -> Self {
        Self {
            abscissa: Abscissa::Eligible,
            ordinate,
            bin_width_ms: 100,
            range: None,
            cutoff: DEFAULT_R_CUTOFF,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveBin {
    pub lo_ms: i64,
    pub hi_ms: i64,
    pub count: usize,
    pub q25: Option<Fraction>,
    pub q50: Option<Fraction>,
    pub q95: Option<Fraction>,
}

/// Per-bin nearest-rank quantiles of an ordinate against bid time.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedCurve {
    pub bin_edges: Vec<i64>,
    pub bins: Vec<CurveBin>,
}

impl BinnedCurve {
    pub fn total_count(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }
}

pub fn binned_quantile_curve(auctions: &[SlotAuction], spec: &CurveSpec) -> Result<BinnedCurve, AuctionError> {
    let ordinate = spec.ordinate;
    let cutoff = spec.cutoff;
    binned_quantile_curve_by(
        auctions,
        spec,
        |bid, auction| -> Result<Option<Fraction>, AuctionError> {
            Ok(match ordinate {
                Ordinate::RValue => {
                    if bid.eligible_at > cutoff {
                        None
                    } else {
                        Some(compute_r(bid, auction, cutoff)?.to_fraction()?)
                    }
                }
                Ordinate::GasUsed => Some(Fraction::from_integer(bid.gas_used as i128)),
                Ordinate::TxCount => Some(Fraction::from_integer(bid.tx_count as i128)),
                Ordinate::Value => Some(Fraction::from_integer(bid.value.to_i128()?)),
            })
        },
    )
}

/// Like [`binned_quantile_curve`] with a caller-supplied ordinate. Bids for
/// which `ordinate` yields `None` are skipped.
pub fn binned_quantile_curve_by<F>(
    auctions: &[SlotAuction],
    spec: &CurveSpec,
    mut ordinate: F,
) -> Result<BinnedCurve, AuctionError>
where
    F: FnMut(&BidTrace, &SlotAuction) -> Result<Option<Fraction>, AuctionError>,
{
    if auctions.is_empty() {
        return Err(AuctionError::EmptyInput);
    }
    let width = spec.bin_width_ms;
    if width <= 0 {
        return Err(AuctionError::InvalidBinWidth(width));
    }
    let mut points: Vec<(i64, Fraction)> = Vec::new();
    for auction in auctions {
        for bid in auction.bids() {
            if let Some(y) = ordinate(bid, auction)? {
                points.push((spec.abscissa.of(bid), y));
            }
        }
    }
    let (lo, hi) = match spec.range {
        Some((lo, hi)) => (lo, hi.max(lo + width)),
        None => {
            let min = points.iter().map(|p| p.0).min().unwrap_or(0);
            let max = points.iter().map(|p| p.0).max().unwrap_or(0);
            (min.div_euclid(width) * width, (max.div_euclid(width) + 1) * width)
        }
    };
    let n_bins = ((hi - lo) + width - 1).div_euclid(width) as usize;
    let mut buckets: Vec<Vec<Fraction>> = vec![Vec::new(); n_bins];
    for (x, y) in points {
        if x < lo || x >= lo + n_bins as i64 * width {
            continue;
        }
        buckets[((x - lo) / width) as usize].push(y);
    }
    let bin_edges: Vec<i64> = (0..=n_bins).map(|i| lo + i as i64 * width).collect();
    let bins = buckets
        .into_iter()
        .enumerate()
        .map(|(i, mut ys)| {
            ys.sort();
            let pick = |q: f64| (!ys.is_empty()).then(|| ys[nearest_rank(q, ys.len()) - 1]);
            CurveBin {
                lo_ms: bin_edges[i],
                hi_ms: bin_edges[i + 1],
                count: ys.len(),
                q25: pick(0.25),
                q50: pick(0.50),
                q95: pick(0.95),
            }
        })
        .collect();
    Ok(BinnedCurve { bin_edges, bins })
}
