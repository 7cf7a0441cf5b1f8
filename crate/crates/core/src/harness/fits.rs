use serde::Serialize;

use super::records::RecordRow;
use crate::error::{Error, Result};
use crate::group_models::wcs_slope;
use crate::psychometrics::{fit_curve, FitResult, FitSummary, ResponseTable};
use crate::trials::Choice;

/// Dyad fits with fewer disagreement trials than this are flagged.
pub const MIN_DISAGREEMENTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct DyadFits {
    pub dyad: u32,
    pub members: [FitResult; 2],
    pub group: FitResult,
    pub n_trials: usize,
    pub n_disagreements: usize,
    pub group_timeouts: usize,
}

impl DyadFits {
    pub fn slopes(&self) -> [f64; 2] {
        self.members.map(|m| m.curve.slope())
    }

    pub fn s_max(&self) -> f64 {
        let [a, b] = self.slopes();
        a.max(b)
    }

    /// `s_min / s_max` of the fitted members.
    pub fn sensitivity_ratio(&self) -> f64 {
        let [a, b] = self.slopes();
        a.min(b) / a.max(b)
    }

    /// Observed `s_dyad / s_max`.
    pub fn collective_benefit(&self) -> f64 {
        self.group.curve.slope() / self.s_max()
    }

    pub fn wcs_predicted_slope(&self) -> Result<f64> {
        let [a, b] = self.slopes();
        wcs_slope(a, b)
    }

    pub fn low_confidence(&self) -> bool {
        self.n_disagreements < MIN_DISAGREEMENTS
    }

    /// Index of the less sensitive member.
    pub fn worst_member(&self) -> usize {
        let [a, b] = self.slopes();
        if b < a {
            1
        } else {
            0
        }
    }
}

fn table<I>(responses: I) -> Result<ResponseTable>
where
    I: IntoIterator<Item = (f64, Choice)>,
{
    ResponseTable::from_responses(responses.into_iter().map(|(d, c)| (d, c == Choice::Second)))
}

pub fn member_table(rows: &[&RecordRow], member: usize) -> Result<ResponseTable> {
    table(rows.iter().map(|r| (r.delta_c, if member == 0 { r.choice1 } else { r.choice2 })))
}

/// Agreement choices pooled with negotiated choices; timeouts left out.
pub fn dyad_table(rows: &[&RecordRow]) -> Result<ResponseTable> {
    table(rows.iter().filter_map(|r| r.dyad_choice().map(|c| (r.delta_c, c))))
}

pub fn fit_dyad(rows: &[&RecordRow]) -> Result<DyadFits> {
    let dyad = rows
        .first()
        .map(|r| r.dyad)
        .ok_or_else(|| Error::invalid("no records for dyad"))?;
    Ok(DyadFits {
        dyad,
        members: [fit_curve(&member_table(rows, 0)?)?, fit_curve(&member_table(rows, 1)?)?],
        group: fit_curve(&dyad_table(rows)?)?,
        n_trials: rows.len(),
        n_disagreements: rows.iter().filter(|r| !r.agreed).count(),
        group_timeouts: rows
            .iter()
            .filter(|r| r.group_completed == Some(false))
            .count(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockFitsJson {
    pub block: u32,
    pub member1: Option<FitSummary>,
    pub member2: Option<FitSummary>,
    pub group: Option<FitSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DyadFitsJson {
    pub dyad: u32,
    pub member1: FitSummary,
    pub member2: FitSummary,
    pub group: FitSummary,
    pub n_trials: usize,
    pub n_disagreements: usize,
    pub group_timeouts: usize,
    pub low_confidence: bool,
    pub sensitivity_ratio: f64,
    pub collective_benefit: f64,
    pub wcs_predicted_slope: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_block: Option<Vec<BlockFitsJson>>,
}

impl DyadFitsJson {
    pub fn new(fits: &DyadFits) -> Result<Self> {
        Ok(Self {
            dyad: fits.dyad,
            member1: fits.members[0].summary(),
            member2: fits.members[1].summary(),
            group: fits.group.summary(),
            n_trials: fits.n_trials,
            n_disagreements: fits.n_disagreements,
            group_timeouts: fits.group_timeouts,
            low_confidence: fits.low_confidence(),
            sensitivity_ratio: fits.sensitivity_ratio(),
            collective_benefit: fits.collective_benefit(),
            wcs_predicted_slope: fits.wcs_predicted_slope()?,
            per_block: None,
        })
    }
}

/// Per-block fits; tables too small to fit are reported as `null`.
pub fn fit_blocks(rows: &[&RecordRow]) -> Vec<BlockFitsJson> {
    let mut blocks: Vec<u32> = rows.iter().map(|r| r.block).collect();
    blocks.sort_unstable();
    blocks.dedup();
    blocks
        .into_iter()
        .map(|b| {
            let sub: Vec<&RecordRow> = rows.iter().copied().filter(|r| r.block == b).collect();
            let fit = |t: Result<ResponseTable>| t.and_then(|t| fit_curve(&t)).ok().map(|f| f.summary());
            BlockFitsJson {
                block: b,
                member1: fit(member_table(&sub, 0)),
                member2: fit(member_table(&sub, 1)),
                group: fit(dyad_table(&sub)),
            }
        })
        .collect()
}
