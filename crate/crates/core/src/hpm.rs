//! Hard prototype mining (HPM) batch planning.
//!
//! A pass walks over a set of anchor speakers in random order, `A` anchors
//! per batch. Every anchor contributes `U` utterances from each of its `I`
//! most similar speakers (itself included), so a batch holds `A * I * U`
//! entries.
//!
//! Two anchor sets are supported:
//!
//! * broad: every speaker anchors once per pass;
//! * balanced: all target-domain speakers plus an equal number of
//!   out-of-domain speakers. Out-of-domain speakers are drawn without
//!   replacement across passes; the pool is reshuffled once exhausted.
//!
//! # Randomness
//!
//! Every random decision uses a ChaCha8 generator keyed by the config seed.
//! Streams are split as follows:
//!
//! * `(pass_id << 32) | 0`: anchor order of the pass;
//! * `(pass_id << 32) | (1 + g)`: utterance sampling for anchor group `g`;
//! * `(1 << 63) | cycle`: shuffle of the out-of-domain pool for the
//!   `cycle`-th sweep over it.
//!
//! Pass ids must therefore stay below `2^31`.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math::{Domain, Embedding};
use crate::prototypes::{PrototypeMatrix, SimilarityMatrix};

const MAX_PASS_ID: u64 = 1 << 31;
const POOL_STREAM: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlannerMode {
    Broad,
    Balanced,
}

impl fmt::Display for PlannerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlannerMode::Broad => "broad",
            PlannerMode::Balanced => "balanced",
        })
    }
}

impl FromStr for PlannerMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "broad" => Ok(PlannerMode::Broad),
            "balanced" => Ok(PlannerMode::Balanced),
            _ => Err(format!("unknown planner mode '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    pub batch_size: usize,
    pub anchors_per_batch: usize,
    pub imposters_per_anchor: usize,
    pub utterances_per_speaker: usize,
    pub mode: PlannerMode,
    pub seed: u64,
    /// Only consider imposters from the anchor's own domain. Off by default:
    /// imposter search is global.
    pub restrict_imposters_to_anchor_domain: bool,
}

impl PlannerConfig {
    /// Batch of 128 built from 16 anchors, 8 speakers per anchor and 1
    /// utterance per speaker.
    pub fn with_defaults(mode: PlannerMode, seed: u64) -> Self {
        Self {
            batch_size: 128,
            anchors_per_batch: 16,
            imposters_per_anchor: 8,
            utterances_per_speaker: 1,
            mode,
            seed,
            restrict_imposters_to_anchor_domain: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, i, u) = (
            self.anchors_per_batch,
            self.imposters_per_anchor,
            self.utterances_per_speaker,
        );
        if a == 0 || i == 0 || u == 0 {
            return Err(Error::ConfigInvalid(
                "anchors, imposters and utterances per speaker must all be >= 1".into(),
            ));
        }
        if a * i * u != self.batch_size {
            return Err(Error::ConfigInvalid(format!(
                "{a} anchors x {i} speakers x {u} utterances != batch size {}",
                self.batch_size
            )));
        }
        Ok(())
    }

    fn group_size(&self) -> usize {
        self.imposters_per_anchor * self.utterances_per_speaker
    }
}

/// Utterance ids available for each prototype speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceInventory {
    utterances: Vec<Vec<String>>,
    domains: Vec<Domain>,
}

impl UtteranceInventory {
    pub fn new(utterances: Vec<Vec<String>>, domains: Vec<Domain>) -> Result<Self> {
        if utterances.len() != domains.len() {
            return Err(Error::DimensionMismatch {
                expected: domains.len(),
                found: utterances.len(),
            });
        }
        if let Some(speaker) = utterances.iter().position(|u| u.is_empty()) {
            return Err(Error::InventoryGap { speaker });
        }
        Ok(Self {
            utterances,
            domains,
        })
    }

    /// Groups `embeddings` by the prototype speaker they belong to.
    /// Embeddings of speakers without a prototype are ignored.
    pub fn from_embeddings(protos: &PrototypeMatrix, embeddings: &[Embedding]) -> Result<Self> {
        let index: HashMap<&str, usize> = protos
            .speakers()
            .iter()
            .enumerate()
            .map(|(j, s)| (s.speaker_id.as_str(), j))
            .collect();
        let mut utterances = vec![Vec::new(); protos.num_speakers()];
        for e in embeddings {
            if let Some(&j) = index.get(e.speaker_id.as_str()) {
                utterances[j].push(e.utt_id.clone());
            }
        }
        let domains = protos.speakers().iter().map(|s| s.domain).collect();
        Self::new(utterances, domains)
    }

    pub fn num_speakers(&self) -> usize {
        self.utterances.len()
    }

    pub fn utterances(&self, speaker: usize) -> &[String] {
        &self.utterances[speaker]
    }

    pub fn domain(&self, speaker: usize) -> Domain {
        self.domains[speaker]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchEntry {
    pub utt_id: String,
    pub speaker: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub index: usize,
    pub entries: Vec<BatchEntry>,
}

/// Batches of one planning pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchManifest {
    pub pass_id: u64,
    /// Tag of the similarity matrix the pass was planned with.
    pub epoch_tag: u64,
    /// Entries per anchor group (`I * U`).
    pub group_size: usize,
    /// Trailing anchor groups that repeat earlier anchors to fill the last batch.
    pub padded_groups: usize,
    pub batches: Vec<Batch>,
}

impl BatchManifest {
    /// Entries of each anchor group, in plan order.
    pub fn groups(&self) -> impl Iterator<Item = &[BatchEntry]> {
        self.batches
            .iter()
            .flat_map(move |b| b.entries.chunks(self.group_size))
    }

    /// Anchor speaker of every group, padding groups included.
    pub fn anchors(&self) -> Vec<usize> {
        self.groups().map(|g| g[0].speaker).collect()
    }

    /// Anchor speakers excluding the padding groups.
    pub fn primary_anchors(&self) -> Vec<usize> {
        let mut a = self.anchors();
        a.truncate(a.len() - self.padded_groups);
        a
    }
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn lane_rng(seed: u64, pass_id: u64, lane: u64) -> ChaCha8Rng {
    stream_rng(seed, (pass_id << 32) | lane)
}

/// Draws `u` utterance ids of `speaker`: without replacement when it has at
/// least `u`, otherwise with replacement.
pub fn sample_utterances<R: Rng + ?Sized>(
    inv: &UtteranceInventory,
    speaker: usize,
    u: usize,
    rng: &mut R,
) -> Result<Vec<String>> {
    if speaker >= inv.num_speakers() {
        return Err(Error::IndexOutOfRange {
            index: speaker,
            len: inv.num_speakers(),
        });
    }
    let pool = inv.utterances(speaker);
    if pool.is_empty() {
        return Err(Error::InventoryGap { speaker });
    }
    if pool.len() >= u {
        Ok(rand::seq::index::sample(rng, pool.len(), u)
            .into_iter()
            .map(|k| pool[k].clone())
            .collect())
    } else {
        Ok((0..u)
            .map(|_| pool[rng.random_range(0..pool.len())].clone())
            .collect())
    }
}

fn check_inputs(
    cfg: &PlannerConfig,
    sim: &SimilarityMatrix,
    inv: &UtteranceInventory,
    pass_id: u64,
) -> Result<()> {
    cfg.validate()?;
    if pass_id >= MAX_PASS_ID {
        return Err(Error::ConfigInvalid(format!(
            "pass id {pass_id} exceeds 2^31"
        )));
    }
    if inv.num_speakers() != sim.len() {
        return Err(Error::DimensionMismatch {
            expected: sim.len(),
            found: inv.num_speakers(),
        });
    }
    if cfg.imposters_per_anchor > sim.len() {
        return Err(Error::KTooLarge {
            k: cfg.imposters_per_anchor,
            n: sim.len(),
        });
    }
    Ok(())
}

fn assemble(
    cfg: &PlannerConfig,
    sim: &SimilarityMatrix,
    inv: &UtteranceInventory,
    pass_id: u64,
    mut anchors: Vec<usize>,
) -> Result<BatchManifest> {
    let a = cfg.anchors_per_batch;
    let primary = anchors.len();
    let padded_groups = (a - primary % a) % a;
    for k in 0..padded_groups {
        anchors.push(anchors[k % primary]);
    }

    let mut batches = Vec::with_capacity(anchors.len() / a);
    for (b, chunk) in anchors.chunks(a).enumerate() {
        let mut entries = Vec::with_capacity(cfg.batch_size);
        for (k, &anchor) in chunk.iter().enumerate() {
            let group = (b * a + k) as u64;
            let speakers = if cfg.restrict_imposters_to_anchor_domain {
                let dom = inv.domain(anchor);
                sim.top_similar_among(anchor, cfg.imposters_per_anchor, |j| inv.domain(j) == dom)?
            } else {
                sim.top_similar(anchor, cfg.imposters_per_anchor)?
            };
            let mut rng = lane_rng(cfg.seed, pass_id, 1 + group);
            for spk in speakers {
                for utt_id in sample_utterances(inv, spk, cfg.utterances_per_speaker, &mut rng)? {
                    entries.push(BatchEntry {
                        utt_id,
                        speaker: spk,
                    });
                }
            }
        }
        batches.push(Batch { index: b, entries });
    }
    Ok(BatchManifest {
        pass_id,
        epoch_tag: sim.epoch_tag(),
        group_size: cfg.group_size(),
        padded_groups,
        batches,
    })
}

/// Plans one broad-HPM pass in which every speaker anchors once.
pub fn plan_pass_broad(
    cfg: &PlannerConfig,
    sim: &SimilarityMatrix,
    inv: &UtteranceInventory,
    pass_id: u64,
) -> Result<BatchManifest> {
    if cfg.mode != PlannerMode::Broad {
        return Err(Error::ConfigInvalid(
            "broad pass requested with a balanced config".into(),
        ));
    }
    check_inputs(cfg, sim, inv, pass_id)?;
    let mut anchors: Vec<usize> = (0..sim.len()).collect();
    anchors.shuffle(&mut lane_rng(cfg.seed, pass_id, 0));
    assemble(cfg, sim, inv, pass_id, anchors)
}

/// Sequence of out-of-domain anchor draws, `draw` distinct speakers each.
///
/// Speakers are consumed from a shuffled copy of the pool; when the pool is
/// exhausted a freshly shuffled copy is appended. A speaker that would occur
/// twice within one draw is deferred to the next draw.
#[derive(Debug, Clone)]
pub struct OutOfDomainSchedule {
    pool: Vec<usize>,
    draw: usize,
    seed: u64,
    cycle: u64,
    queue: VecDeque<usize>,
}

impl OutOfDomainSchedule {
    pub fn new(mut pool: Vec<usize>, draw: usize, seed: u64) -> Result<Self> {
        pool.sort_unstable();
        pool.dedup();
        if draw == 0 {
            return Err(Error::ConfigInvalid(
                "out-of-domain draw size must be >= 1".into(),
            ));
        }
        if pool.len() < draw {
            return Err(Error::DomainTooSmall {
                needed: draw,
                available: pool.len(),
            });
        }
        Ok(Self {
            pool,
            draw,
            seed,
            cycle: 0,
            queue: VecDeque::new(),
        })
    }

    fn refill(&mut self) {
        let mut perm = self.pool.clone();
        perm.shuffle(&mut stream_rng(self.seed, POOL_STREAM | self.cycle));
        self.cycle += 1;
        self.queue.extend(perm);
    }

    pub fn next_draw(&mut self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.draw);
        let mut deferred = Vec::new();
        while out.len() < self.draw {
            if self.queue.is_empty() {
                self.refill();
            }
            let s = self.queue.pop_front().expect("queue refilled");
            if out.contains(&s) {
                deferred.push(s);
            } else {
                out.push(s);
            }
        }
        for s in deferred.into_iter().rev() {
            self.queue.push_front(s);
        }
        out
    }
}

/// Stateful domain-balanced planner producing consecutive passes.
#[derive(Debug, Clone)]
pub struct BalancedPlanner {
    cfg: PlannerConfig,
    inv: UtteranceInventory,
    targets: Vec<usize>,
    schedule: OutOfDomainSchedule,
    next_pass: u64,
}

impl BalancedPlanner {
    pub fn new(cfg: PlannerConfig, inv: UtteranceInventory, target_domain: Domain) -> Result<Self> {
        if cfg.mode != PlannerMode::Balanced {
            return Err(Error::ConfigInvalid(
                "balanced planner requires a balanced config".into(),
            ));
        }
        cfg.validate()?;
        let (targets, others): (Vec<usize>, Vec<usize>) =
            (0..inv.num_speakers()).partition(|&j| inv.domain(j) == target_domain);
        if targets.is_empty() {
            return Err(Error::ConfigInvalid(format!(
                "no speakers in target domain {target_domain}"
            )));
        }
        let schedule = OutOfDomainSchedule::new(others, targets.len(), cfg.seed)?;
        Ok(Self {
            cfg,
            inv,
            targets,
            schedule,
            next_pass: 0,
        })
    }

    pub fn target_speakers(&self) -> &[usize] {
        &self.targets
    }

    pub fn next_pass_id(&self) -> u64 {
        self.next_pass
    }

    /// Plans the next pass. The caller supplies the similarity matrix,
    /// refreshed between passes as prototypes evolve.
    pub fn plan_pass(&mut self, sim: &SimilarityMatrix) -> Result<BatchManifest> {
        let pass_id = self.next_pass;
        check_inputs(&self.cfg, sim, &self.inv, pass_id)?;
        let mut anchors = self.targets.clone();
        anchors.extend(self.schedule.next_draw());
        anchors.shuffle(&mut lane_rng(self.cfg.seed, pass_id, 0));
        let manifest = assemble(&self.cfg, sim, &self.inv, pass_id, anchors)?;
        self.next_pass += 1;
        Ok(manifest)
    }
}

/// Plans balanced pass `pass_id` from scratch, replaying the out-of-domain
/// draws of all earlier passes.
pub fn plan_pass_balanced(
    cfg: &PlannerConfig,
    sim: &SimilarityMatrix,
    inv: &UtteranceInventory,
    target_domain: Domain,
    pass_id: u64,
) -> Result<BatchManifest> {
    let mut planner = BalancedPlanner::new(cfg.clone(), inv.clone(), target_domain)?;
    for _ in 0..pass_id {
        planner.schedule.next_draw();
    }
    planner.next_pass = pass_id;
    planner.plan_pass(sim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Language;
    use crate::prototypes::{similarity_matrix, SpeakerInfo};

    fn random_setup(
        n: usize,
        d: usize,
        seed: u64,
        domains: &[Domain],
    ) -> (SimilarityMatrix, UtteranceInventory) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let infos = (0..n)
            .map(|j| SpeakerInfo {
                speaker_id: format!("s{j}"),
                domain: domains[j % domains.len()],
                language: Language::Unknown,
            })
            .collect();
        let p = PrototypeMatrix::new(cols, infos).unwrap();
        let utts = (0..n)
            .map(|j| (0..1 + j % 4).map(|k| format!("s{j}_u{k}")).collect())
            .collect();
        let doms = p.speakers().iter().map(|s| s.domain).collect();
        (
            similarity_matrix(&p, 0),
            UtteranceInventory::new(utts, doms).unwrap(),
        )
    }

    fn cfg(n: usize, a: usize, i: usize, u: usize, mode: PlannerMode) -> PlannerConfig {
        PlannerConfig {
            batch_size: n,
            anchors_per_batch: a,
            imposters_per_anchor: i,
            utterances_per_speaker: u,
            mode,
            seed: 42,
            restrict_imposters_to_anchor_domain: false,
        }
    }

    #[test]
    fn config_product_must_match_batch_size() {
        assert!(cfg(128, 16, 8, 1, PlannerMode::Broad).validate().is_ok());
        assert!(matches!(
            cfg(128, 3, 8, 1, PlannerMode::Broad).validate(),
            Err(Error::ConfigInvalid(_))
        ));
        assert!(cfg(0, 0, 8, 1, PlannerMode::Broad).validate().is_err());
        assert_eq!(
            PlannerConfig::with_defaults(PlannerMode::Broad, 1),
            cfg(128, 16, 8, 1, PlannerMode::Broad).with_seed(1)
        );
    }

    impl PlannerConfig {
        fn with_seed(mut self, seed: u64) -> Self {
            self.seed = seed;
            self
        }
    }

    #[test]
    fn toy_broad_pass() {
        let (sim, inv) = random_setup(4, 3, 1, &[Domain::Vox]);
        let m = plan_pass_broad(&cfg(4, 2, 2, 1, PlannerMode::Broad), &sim, &inv, 0).unwrap();
        assert_eq!(m.batches.len(), 2);
        assert_eq!(m.padded_groups, 0);
        let mut anchors = m.anchors();
        anchors.sort_unstable();
        assert_eq!(anchors, vec![0, 1, 2, 3]);
    }

    #[test]
    fn production_sized_batches() {
        let (sim, inv) = random_setup(40, 8, 2, &[Domain::Vox]);
        let m = plan_pass_broad(
            &PlannerConfig::with_defaults(PlannerMode::Broad, 9),
            &sim,
            &inv,
            0,
        )
        .unwrap();
        // 40 anchors at 16 per batch: 3 batches, last one padded by 8 groups
        assert_eq!(m.batches.len(), 3);
        assert_eq!(m.padded_groups, 8);
        for b in &m.batches {
            assert_eq!(b.entries.len(), 128);
        }
        let mut primary = m.primary_anchors();
        primary.sort_unstable();
        assert_eq!(primary, (0..40).collect::<Vec<_>>());
        for g in m.groups() {
            let speakers: Vec<usize> = g.iter().map(|e| e.speaker).collect();
            assert_eq!(speakers, sim.top_similar(speakers[0], 8).unwrap());
        }
    }

    #[test]
    fn sampling_rules() {
        let inv = UtteranceInventory::new(
            vec![
                vec!["a".into(), "b".into()],
                vec!["only".into()],
                (0..10).map(|k| format!("u{k}")).collect(),
            ],
            vec![Domain::Vox; 3],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut all = sample_utterances(&inv, 0, 2, &mut rng).unwrap();
        all.sort();
        assert_eq!(all, vec!["a", "b"]);
        assert_eq!(
            sample_utterances(&inv, 1, 2, &mut rng).unwrap(),
            vec!["only", "only"]
        );

        let pair =
            |seed| sample_utterances(&inv, 2, 2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(pair(7), pair(7));
        assert_ne!(pair(7)[0], pair(7)[1]);
        assert!(matches!(
            sample_utterances(&inv, 3, 1, &mut rng),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn inventory_gap_rejected() {
        assert_eq!(
            UtteranceInventory::new(vec![vec!["a".into()], vec![]], vec![Domain::Vox; 2]),
            Err(Error::InventoryGap { speaker: 1 })
        );
    }

    #[test]
    fn balanced_domain_too_small() {
        let doms = [Domain::DeepMine, Domain::DeepMine, Domain::Vox];
        let (sim, inv) = random_setup(8, 3, 3, &doms);
        // 6 target speakers, 2 out-of-domain ones
        let c = cfg(2, 1, 2, 1, PlannerMode::Balanced);
        assert!(matches!(
            plan_pass_balanced(&c, &sim, &inv, Domain::DeepMine, 0),
            Err(Error::DomainTooSmall {
                needed: 6,
                available: 2
            })
        ));
        assert!(matches!(
            plan_pass_broad(&c, &sim, &inv, 0),
            Err(Error::ConfigInvalid(_))
        ));
    }

    #[test]
    fn balanced_pass_structure() {
        let doms = [Domain::DeepMine, Domain::Vox, Domain::Vox, Domain::Libri];
        let (sim, inv) = random_setup(20, 4, 4, &doms);
        let c = cfg(6, 3, 2, 1, PlannerMode::Balanced);
        let mut planner = BalancedPlanner::new(c.clone(), inv.clone(), Domain::DeepMine).unwrap();
        let targets = planner.target_speakers().to_vec();
        assert_eq!(targets.len(), 5);
        for pass in 0..6 {
            let m = planner.plan_pass(&sim).unwrap();
            assert_eq!(m.pass_id, pass);
            assert_eq!(
                m,
                plan_pass_balanced(&c, &sim, &inv, Domain::DeepMine, pass).unwrap()
            );
            let primary = m.primary_anchors();
            assert_eq!(primary.len(), 10);
            let in_domain = primary.iter().filter(|a| targets.contains(a)).count();
            assert_eq!(in_domain * 2, primary.len());
            let mut ood: Vec<usize> = primary
                .iter()
                .copied()
                .filter(|a| !targets.contains(a))
                .collect();
            ood.sort_unstable();
            ood.dedup();
            assert_eq!(ood.len(), 5);
        }
    }

    #[test]
    fn schedule_covers_pool_evenly() {
        let mut s = OutOfDomainSchedule::new((0..10).collect(), 3, 5).unwrap();
        let mut counts = [0usize; 10];
        for _ in 0..1000 {
            let d = s.next_draw();
            let mut u = d.clone();
            u.sort_unstable();
            u.dedup();
            assert_eq!(u.len(), 3);
            d.iter().for_each(|&x| counts[x] += 1);
        }
        for c in counts {
            assert!((c as f64 / 1000.0 - 0.3).abs() <= 0.03, "{c}");
        }
    }

    #[test]
    fn restricted_imposters_stay_in_domain() {
        let doms = [Domain::DeepMine, Domain::Vox];
        let (sim, inv) = random_setup(12, 3, 6, &doms);
        let mut c = cfg(6, 2, 3, 1, PlannerMode::Broad);
        c.restrict_imposters_to_anchor_domain = true;
        let m = plan_pass_broad(&c, &sim, &inv, 0).unwrap();
        for g in m.groups() {
            let dom = inv.domain(g[0].speaker);
            assert!(g.iter().all(|e| inv.domain(e.speaker) == dom));
        }
    }
}
