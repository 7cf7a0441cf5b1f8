//! Record- and trajectory-level measures: leadership, first mover, first
//! crossing, peak force, mechanical work, velocity ratios and predictor
//! accuracies.

use serde::{Deserialize, Serialize};

use crate::coupling_sim::{GroupOutcome, TrajectoryLog};
use crate::error::{Error, Result};
use crate::stats::{describe, SampleSummary};
use crate::trials::{Choice, TrialSpec};

/// Thresholds of the first-crossing analysis, in normalized position units.
pub const DEFAULT_CROSSING_THRESHOLDS: [f64; 7] = [0.05, 0.08, 0.10, 0.15, 0.20, 0.25, 0.30];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Member {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Member {
    pub const BOTH: [Member; 2] = [Member::One, Member::Two];

    pub fn index(self) -> usize {
        match self {
            Member::One => 0,
            Member::Two => 1,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn other(self) -> Member {
        match self {
            Member::One => Member::Two,
            Member::Two => Member::One,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberOutcome {
    pub choice: Choice,
    pub x: f64,
    pub confidence: f64,
    pub rt: f64,
    pub initiation_time: Option<f64>,
    /// The individual movement reached the target before the timeout.
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub dyad: u32,
    pub spec: TrialSpec,
    pub members: [MemberOutcome; 2],
    /// Present iff the members disagreed.
    pub group: Option<GroupOutcome>,
}

impl TrialRecord {
    pub fn member(&self, m: Member) -> &MemberOutcome {
        &self.members[m.index()]
    }

    pub fn agreed(&self) -> bool {
        self.members[0].choice == self.members[1].choice
    }

    pub fn correct_answer(&self) -> Choice {
        self.spec.correct_answer()
    }

    pub fn member_correct(&self, m: Member) -> bool {
        self.member(m).choice == self.correct_answer()
    }

    /// The shared choice on agreement, the negotiated one otherwise; `None`
    /// after a group timeout.
    pub fn group_choice(&self) -> Option<Choice> {
        match &self.group {
            None => Some(self.members[0].choice),
            Some(g) => g.choice,
        }
    }

    pub fn group_correct(&self) -> Option<bool> {
        self.group_choice().map(|c| c == self.correct_answer())
    }

    /// Disagreement trial whose group phase finished.
    pub fn completed_group(&self) -> Option<&GroupOutcome> {
        self.group.as_ref().filter(|g| g.completed && g.choice.is_some())
    }
}

pub fn leader_of(record: &TrialRecord) -> Result<Member> {
    let group = match &record.group {
        None => return Err(Error::NotApplicable("members agreed; no leader".into())),
        Some(g) => g,
    };
    let choice = group
        .choice
        .filter(|_| group.completed)
        .ok_or_else(|| Error::NotApplicable("group phase timed out".into()))?;
    Member::BOTH
        .into_iter()
        .find(|&m| record.member(m).choice == choice)
        .ok_or_else(|| Error::NotApplicable("no member chose the group answer".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FirstMover {
    Member(Member),
    Unpredictable,
}

impl FirstMover {
    pub fn member(self) -> Option<Member> {
        match self {
            FirstMover::Member(m) => Some(m),
            FirstMover::Unpredictable => None,
        }
    }
}

fn earlier(a: Option<f64>, b: Option<f64>) -> FirstMover {
    match (a, b) {
        (Some(a), Some(b)) if a < b => FirstMover::Member(Member::One),
        (Some(a), Some(b)) if b < a => FirstMover::Member(Member::Two),
        (Some(_), None) => FirstMover::Member(Member::One),
        (None, Some(_)) => FirstMover::Member(Member::Two),
        _ => FirstMover::Unpredictable,
    }
}

fn group_onsets(record: &TrialRecord) -> [Option<f64>; 2] {
    match &record.group {
        Some(g) => [g.log.force_onset(0), g.log.force_onset(1)],
        None => [None, None],
    }
}

/// Member with the smaller individual response time; ties go to the earlier
/// group-phase force onset.
pub fn first_mover(record: &TrialRecord) -> FirstMover {
    let [a, b] = record.members.map(|m| m.rt);
    if a < b {
        FirstMover::Member(Member::One)
    } else if b < a {
        FirstMover::Member(Member::Two)
    } else {
        let [oa, ob] = group_onsets(record);
        earlier(oa, ob)
    }
}

/// Member whose group-phase force starts first.
pub fn first_mover_by_onset(record: &TrialRecord) -> FirstMover {
    let [a, b] = group_onsets(record);
    earlier(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub side: Choice,
    pub step: usize,
    pub time: f64,
    pub member: Member,
}

/// First step at which either handle leaves `[-x_thresh, x_thresh]`. When
/// both leave on the same step the larger excursion wins, member 1 on a tie.
pub fn first_crossing(log: &TrajectoryLog, x_thresh: f64) -> Result<Option<Crossing>> {
    if !(x_thresh > 0.0 && x_thresh < 1.0) {
        return Err(Error::invalid(format!("x_thresh must lie in (0, 1), got {x_thresh}")));
    }
    for (k, s) in log.samples.iter().enumerate() {
        let [a, b] = s.x.map(f64::abs);
        let member = match (a > x_thresh, b > x_thresh) {
            (false, false) => continue,
            (true, false) => Member::One,
            (false, true) => Member::Two,
            (true, true) if b > a => Member::Two,
            (true, true) => Member::One,
        };
        let side = Choice::from_sign(s.x[member.index()]).expect("outside a positive band");
        return Ok(Some(Crossing {
            side,
            step: k,
            time: log.time(k),
            member,
        }));
    }
    Ok(None)
}

/// Largest applied force magnitude.
pub fn peak_force(log: &TrajectoryLog, member: Member) -> f64 {
    log.samples
        .iter()
        .map(|s| s.f[member.index()].abs())
        .fold(0.0, f64::max)
}

/// `(1/N) Σ_k f[k-1] (x[k] - x[k-1])` over the N increments of the log.
/// The force held during a step multiplies that step's displacement.
pub fn mechanical_work(log: &TrajectoryLog, member: Member) -> Result<f64> {
    if log.len() < 2 {
        return Err(Error::invalid("mechanical work needs at least two samples"));
    }
    let i = member.index();
    let total: f64 = log
        .samples
        .windows(2)
        .map(|w| w[0].f[i] * (w[1].x[i] - w[0].x[i]))
        .sum();
    Ok(total / (log.len() - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityRatios {
    pub velo_l: f64,
    pub velo_f: f64,
    pub velo_d: f64,
    pub leader_ratio: f64,
    pub follower_ratio: f64,
}

/// Mean handle speeds of Leader and Follower before the first crossing,
/// relative to the mean display speed from the crossing until the display
/// first reaches `movement_end` (or the log ends).
pub fn trial_velocity_ratios(
    log: &TrajectoryLog,
    leader: Member,
    x_thresh: f64,
    movement_end: f64,
) -> Result<Option<VelocityRatios>> {
    let Some(cross) = first_crossing(log, x_thresh)? else {
        return Ok(None);
    };
    let pre = &log.samples[..cross.step];
    let end = log.samples[cross.step..]
        .iter()
        .position(|s| s.x_display().abs() >= movement_end)
        .map_or(log.len(), |off| cross.step + off);
    let post = &log.samples[cross.step..end];
    if pre.is_empty() || post.is_empty() {
        return Ok(None);
    }
    let mean_abs = |it: &mut dyn Iterator<Item = f64>, n: usize| it.map(f64::abs).sum::<f64>() / n as f64;
    let (l, f) = (leader.index(), leader.other().index());
    let velo_l = mean_abs(&mut pre.iter().map(|s| s.v[l]), pre.len());
    let velo_f = mean_abs(&mut pre.iter().map(|s| s.v[f]), pre.len());
    let velo_d = mean_abs(&mut post.iter().map(|s| s.v_display()), post.len());
    if velo_d == 0.0 {
        return Ok(None);
    }
    Ok(Some(VelocityRatios {
        velo_l,
        velo_f,
        velo_d,
        leader_ratio: velo_l / velo_d,
        follower_ratio: velo_f / velo_d,
    }))
}

/// Per-record ratios; `None` for agreement trials, timeouts and trials
/// without a usable crossing.
pub fn velocity_ratios(
    records: &[TrialRecord],
    x_thresh: f64,
    movement_end: f64,
) -> Result<Vec<Option<VelocityRatios>>> {
    records
        .iter()
        .map(|r| match r.completed_group() {
            Some(g) => trial_velocity_ratios(&g.log, leader_of(r)?, x_thresh, movement_end),
            None => Ok(None),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Predictor {
    /// Smaller individual response time.
    FirstMover,
    /// Earlier group-phase force onset.
    FirstMoverOnset,
    /// Side of the first exit from the given band.
    FirstCrossing(f64),
    PeakForce,
    MechanicalWork,
    /// Always names the same member; a chance baseline.
    FixedMember(Member),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Not a completed disagreement trial.
    NotApplicable,
    /// Applicable, but the predictor makes no prediction.
    Excluded,
    Hit,
    Miss,
}

impl Predictor {
    pub fn name(&self) -> &'static str {
        match self {
            Predictor::FirstMover => "first_mover",
            Predictor::FirstMoverOnset => "first_mover_onset",
            Predictor::FirstCrossing(_) => "first_crossing",
            Predictor::PeakForce => "peak_force",
            Predictor::MechanicalWork => "mechanical_work",
            Predictor::FixedMember(_) => "fixed_member",
        }
    }

    pub fn threshold(&self) -> Option<f64> {
        match self {
            Predictor::FirstCrossing(t) => Some(*t),
            _ => None,
        }
    }

    pub fn evaluate(&self, record: &TrialRecord) -> Result<Verdict> {
        let Some(group) = record.completed_group() else {
            return Ok(Verdict::NotApplicable);
        };
        let leader = leader_of(record)?;
        let larger = |a: f64, b: f64| {
            if a > b {
                Some(Member::One)
            } else if b > a {
                Some(Member::Two)
            } else {
                None
            }
        };
        let predicted = match *self {
            Predictor::FirstMover => first_mover(record).member(),
            Predictor::FirstMoverOnset => first_mover_by_onset(record).member(),
            Predictor::FirstCrossing(t) => {
                // a side prediction: compare with the group choice directly
                return Ok(match first_crossing(&group.log, t)? {
                    None => Verdict::Excluded,
                    Some(c) if Some(c.side) == group.choice => Verdict::Hit,
                    Some(_) => Verdict::Miss,
                });
            }
            Predictor::PeakForce => larger(
                peak_force(&group.log, Member::One),
                peak_force(&group.log, Member::Two),
            ),
            Predictor::MechanicalWork => larger(
                mechanical_work(&group.log, Member::One)?,
                mechanical_work(&group.log, Member::Two)?,
            ),
            Predictor::FixedMember(m) => Some(m),
        };
        Ok(match predicted {
            None => Verdict::Excluded,
            Some(m) if m == leader => Verdict::Hit,
            Some(_) => Verdict::Miss,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub hits: usize,
    /// Trials with a prediction.
    pub n: usize,
    pub excluded: usize,
}

impl Tally {
    pub fn add(&mut self, v: Verdict) {
        match v {
            Verdict::NotApplicable => {}
            Verdict::Excluded => self.excluded += 1,
            Verdict::Hit => {
                self.hits += 1;
                self.n += 1;
            }
            Verdict::Miss => self.n += 1,
        }
    }

    pub fn merge(&mut self, other: &Tally) {
        self.hits += other.hits;
        self.n += other.n;
        self.excluded += other.excluded;
    }

    /// Percentage of correct predictions.
    pub fn accuracy(&self) -> Result<f64> {
        if self.n == 0 {
            return Err(Error::NotApplicable("no trial to score the predictor on".into()));
        }
        Ok(100.0 * self.hits as f64 / self.n as f64)
    }
}

pub fn predictor_tally(records: &[TrialRecord], predictor: Predictor) -> Result<Tally> {
    let mut tally = Tally::default();
    for r in records {
        tally.add(predictor.evaluate(r)?);
    }
    Ok(tally)
}

/// Percentage of completed disagreement trials where the predictor names the
/// group's choice.
pub fn predictor_accuracy(records: &[TrialRecord], predictor: Predictor) -> Result<f64> {
    predictor_tally(records, predictor)?.accuracy()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSummary {
    pub x_thresh: f64,
    pub individual: Option<SampleSummary>,
    pub group: Option<SampleSummary>,
    /// Individual initiation times as recorded during simulation.
    pub individual_initiation: Option<SampleSummary>,
    /// First exit from `±x_thresh` during the group phase.
    pub group_initiation: Option<SampleSummary>,
    pub group_timeouts: usize,
}

pub fn decision_time_summary(records: &[TrialRecord], x_thresh: f64) -> Result<TimeSummary> {
    let individual: Vec<f64> = records.iter().flat_map(|r| r.members.map(|m| m.rt)).collect();
    let ind_init: Vec<f64> = records
        .iter()
        .flat_map(|r| r.members.iter().filter_map(|m| m.initiation_time))
        .collect();
    let mut group = Vec::new();
    let mut group_init = Vec::new();
    let mut timeouts = 0;
    for r in records {
        match (&r.group, r.completed_group()) {
            (Some(_), None) => timeouts += 1,
            (_, Some(g)) => {
                group.push(g.decision_time);
                if let Some(c) = first_crossing(&g.log, x_thresh)? {
                    group_init.push(c.time);
                }
            }
            (None, None) => {}
        }
    }
    Ok(TimeSummary {
        x_thresh,
        individual: describe(&individual),
        group: describe(&group),
        individual_initiation: describe(&ind_init),
        group_initiation: describe(&group_init),
        group_timeouts: timeouts,
    })
}

/// Per-trial leadership measures of a completed disagreement trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadershipRow {
    pub dyad: u32,
    pub block: u32,
    pub trial: u32,
    pub leader: Member,
    pub first_mover: Option<Member>,
    pub first_mover_onset: Option<Member>,
    pub crossing_member: Option<Member>,
    pub crossing_side: Option<Choice>,
    pub peak_leader: f64,
    pub peak_follower: f64,
    pub work_leader: f64,
    pub work_follower: f64,
    pub velo_l_ratio: Option<f64>,
    pub velo_f_ratio: Option<f64>,
    pub decision_time: f64,
}

pub fn leadership_row(record: &TrialRecord, x_thresh: f64, movement_end: f64) -> Result<Option<LeadershipRow>> {
    let Some(g) = record.completed_group() else {
        return Ok(None);
    };
    let leader = leader_of(record)?;
    let follower = leader.other();
    let crossing = first_crossing(&g.log, x_thresh)?;
    let ratios = trial_velocity_ratios(&g.log, leader, x_thresh, movement_end)?;
    Ok(Some(LeadershipRow {
        dyad: record.dyad,
        block: record.spec.block_index,
        trial: record.spec.trial_index,
        leader,
        first_mover: first_mover(record).member(),
        first_mover_onset: first_mover_by_onset(record).member(),
        crossing_member: crossing.map(|c| c.member),
        crossing_side: crossing.map(|c| c.side),
        peak_leader: peak_force(&g.log, leader),
        peak_follower: peak_force(&g.log, follower),
        work_leader: mechanical_work(&g.log, leader)?,
        work_follower: mechanical_work(&g.log, follower)?,
        velo_l_ratio: ratios.map(|v| v.leader_ratio),
        velo_f_ratio: ratios.map(|v| v.follower_ratio),
        decision_time: g.decision_time,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling_sim::LogSample;

    fn log_from(x1: &[f64], x2: &[f64]) -> TrajectoryLog {
        TrajectoryLog {
            dt: 0.001,
            samples: x1
                .iter()
                .zip(x2)
                .map(|(&a, &b)| LogSample { x: [a, b], ..Default::default() })
                .collect(),
        }
    }

    fn outcome(choice: Choice, rt: f64) -> MemberOutcome {
        MemberOutcome {
            choice,
            x: choice.sign(),
            confidence: 1.0,
            rt,
            initiation_time: None,
            completed: true,
        }
    }

    fn record(c1: Choice, c2: Choice, group: Option<Choice>) -> TrialRecord {
        TrialRecord {
            dyad: 1,
            spec: TrialSpec::new(1, 1, Choice::Second, 25.0, 1).unwrap(),
            members: [outcome(c1, 0.8), outcome(c2, 1.2)],
            group: group.map(|c| GroupOutcome {
                choice: Some(c),
                decision_time: 2.0,
                completed: true,
                log: log_from(&[0.0, 0.5], &[0.0, 0.5]),
            }),
        }
    }

    #[test]
    fn leader_definition() {
        use Choice::*;
        assert_eq!(leader_of(&record(First, Second, Some(Second))).unwrap(), Member::Two);
        assert_eq!(leader_of(&record(Second, First, Some(Second))).unwrap(), Member::One);
        assert!(matches!(
            leader_of(&record(First, First, None)),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn first_mover_rules() {
        let mut r = record(Choice::First, Choice::Second, Some(Choice::First));
        assert_eq!(first_mover(&r), FirstMover::Member(Member::One));
        r.members[1].rt = 0.8;
        let g = r.group.as_mut().unwrap();
        g.log = log_from(&[0.0; 400], &[0.0; 400]);
        g.log.samples[250].f[0] = 1.0;
        g.log.samples[300].f[1] = -1.0;
        assert_eq!(first_mover(&r), FirstMover::Member(Member::One));
        let g = r.group.as_mut().unwrap();
        g.log.samples[250].f[0] = 0.0;
        g.log.samples[350].f[0] = 1.0;
        assert_eq!(first_mover(&r), FirstMover::Member(Member::Two));
        let g = r.group.as_mut().unwrap();
        g.log.samples[300].f[1] = 0.0;
        g.log.samples[350].f[1] = -1.0;
        assert_eq!(first_mover(&r), FirstMover::Unpredictable);
    }

    #[test]
    fn crossing_constructed() {
        let log = log_from(&[0.0, 0.02, 0.06, 0.1], &[0.0, 0.01, 0.04, 0.08]);
        let c = first_crossing(&log, 0.05).unwrap().unwrap();
        assert_eq!((c.step, c.member, c.side), (2, Member::One, Choice::Second));
        let log = log_from(&[0.0, -0.07], &[0.0, -0.09]);
        let c = first_crossing(&log, 0.05).unwrap().unwrap();
        assert_eq!((c.member, c.side), (Member::Two, Choice::First));
        let log = log_from(&[0.0, 0.07], &[0.0, 0.07]);
        assert_eq!(first_crossing(&log, 0.05).unwrap().unwrap().member, Member::One);
        assert_eq!(first_crossing(&log, 0.5).unwrap(), None);
        assert!(first_crossing(&log, 1.0).is_err());
    }

    #[test]
    fn peak_and_work() {
        let mut log = log_from(&[0.0, 0.1, 0.2], &[0.0, 0.1, 0.2]);
        for (s, f) in log.samples.iter_mut().zip([0.1, -0.5, 0.3]) {
            s.f[0] = f;
        }
        assert_eq!(peak_force(&log, Member::One), 0.5);
        assert_eq!(peak_force(&log, Member::Two), 0.0);
        for s in &mut log.samples {
            s.f = [1.0, -1.0];
        }
        assert_eq!(mechanical_work(&log, Member::One).unwrap(), 0.1);
        assert!(mechanical_work(&log, Member::Two).unwrap() < 0.0);
        assert!(mechanical_work(&log_from(&[0.0], &[0.0]), Member::One).is_err());
    }

    #[test]
    fn velocity_ratio_constructed() {
        // leader moves at 0.2/s until the crossing, then the dyad at 0.2/s
        let dt = 0.01;
        let mut samples = Vec::new();
        let mut x = 0.0;
        for _ in 0..100 {
            samples.push(LogSample { x: [x, x], v: [0.2, 0.2], ..Default::default() });
            x += 0.2 * dt;
        }
        let log = TrajectoryLog { dt, samples: samples.clone() };
        let r = trial_velocity_ratios(&log, Member::One, 0.05, 0.95).unwrap().unwrap();
        assert!((r.leader_ratio - 1.0).abs() < 1e-12);

        for s in samples.iter_mut().filter(|s| s.x[0] <= 0.05) {
            s.v[0] = 0.22;
        }
        let log = TrajectoryLog { dt, samples };
        let r = trial_velocity_ratios(&log, Member::One, 0.05, 0.95).unwrap().unwrap();
        assert!((r.leader_ratio - 1.1).abs() < 1e-12);
        assert!((r.follower_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_member_and_empty_denominator() {
        use Choice::*;
        let recs = vec![
            record(First, Second, Some(First)),
            record(First, Second, Some(Second)),
            record(First, First, None),
        ];
        let acc = predictor_accuracy(&recs, Predictor::FixedMember(Member::One)).unwrap();
        assert_eq!(acc, 50.0);
        let only_agreed = vec![record(First, First, None)];
        assert!(matches!(
            predictor_accuracy(&only_agreed, Predictor::PeakForce),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn time_summary_without_groups() {
        let recs = vec![record(Choice::First, Choice::First, None)];
        let s = decision_time_summary(&recs, 0.05).unwrap();
        assert_eq!(s.individual.unwrap().n, 2);
        assert!(s.group.is_none());
    }
}
