//! Adversary placements and corruption strategies, and a Monte Carlo
//! simulator measuring how often a corrupted reconstruction goes unnoticed.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{solve_general, Matrix, Packet};
use crate::scheme::{collect_responses, Mode, PartyState, Response, SchemeParams, Status};
use crate::staircase::Slot;

/// Which parties the adversary reads, jams, or both. Ids are 1-based.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub read_only: Vec<usize>,
    pub write_only: Vec<usize>,
    pub read_write: Vec<usize>,
}

impl Placement {
    pub fn new(params: &SchemeParams, read_only: Vec<usize>, write_only: Vec<usize>, read_write: Vec<usize>) -> Result<Self> {
        let b = params.budget();
        if read_only.len() > b.read_only || write_only.len() > b.write_only || read_write.len() > b.read_write {
            return Err(Error::param("placement exceeds the adversary budget"));
        }
        let mut all: Vec<usize> = read_only.iter().chain(&write_only).chain(&read_write).copied().collect();
        all.sort_unstable();
        let len = all.len();
        all.dedup();
        if all.len() != len || all.iter().any(|&i| i == 0 || i > params.n()) {
            return Err(Error::param("placement sets must be disjoint subsets of 1..=n"));
        }
        Ok(Placement { read_only, write_only, read_write })
    }

    /// Uniform placement whose writers all sit inside `contacted`; readers
    /// are drawn from the remaining parties.
    pub fn sample<R: Rng + ?Sized>(params: &SchemeParams, contacted: &[usize], rng: &mut R) -> Result<Self> {
        let b = params.budget();
        if b.z_w() > contacted.len() {
            return Err(Error::param("more writers than contacted parties"));
        }
        let writers: Vec<usize> = sample(rng, contacted.len(), b.z_w()).into_iter().map(|i| contacted[i]).collect();
        let rest: Vec<usize> = (1..=params.n()).filter(|i| !writers.contains(i)).collect();
        let readers: Vec<usize> = sample(rng, rest.len(), b.read_only).into_iter().map(|i| rest[i]).collect();
        let (write_only, read_write) = writers.split_at(b.write_only);
        Placement::new(params, readers, write_only.to_vec(), read_write.to_vec())
    }

    pub fn reads(&self, id: usize) -> bool {
        self.read_only.contains(&id) || self.read_write.contains(&id)
    }

    pub fn writes(&self, id: usize) -> bool {
        self.write_only.contains(&id) || self.read_write.contains(&id)
    }
}

/// Access to dealt states, gated by what the adversary may see.
pub struct View<'a> {
    states: &'a [PartyState],
    visible: Vec<usize>,
}

impl<'a> View<'a> {
    /// Only the placement's read set is visible.
    pub fn limited(states: &'a [PartyState], placement: &Placement) -> Self {
        let visible = placement.read_only.iter().chain(&placement.read_write).copied().collect();
        View { states, visible }
    }

    pub fn omniscient(states: &'a [PartyState]) -> Self {
        View { states, visible: states.iter().map(|s| s.id).collect() }
    }

    pub fn state(&self, id: usize) -> Result<&'a PartyState> {
        if !self.visible.contains(&id) {
            return Err(Error::ContractViolation(id));
        }
        self.states.iter().find(|s| s.id == id).ok_or(Error::ContractViolation(id))
    }

    pub fn sees_everything(&self) -> bool {
        self.states.iter().all(|s| self.visible.contains(&s.id))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// Adds a uniformly random nonzero error to each writer's payload.
    BlindAdditive,
    /// Re-deals a fake secret consistent with what the read-only parties saw
    /// and substitutes the writers' rows.
    FakeSecret,
    /// Blind payload error plus randomised hash shares on every writer.
    HashTargeted,
    /// Samples a world consistent with the adversary's view and picks an
    /// error orthogonal to the honest rows of that guessed world.
    OrthogonalSearch,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::BlindAdditive,
        StrategyKind::FakeSecret,
        StrategyKind::HashTargeted,
        StrategyKind::OrthogonalSearch,
    ];
}

fn nonzero_error<R: Rng + ?Sized>(params: &SchemeParams, packets: usize, rng: &mut R) -> Vec<Packet> {
    let f = params.field();
    loop {
        let e: Vec<Packet> = (0..packets).map(|_| f.random_packet(params.v(), rng)).collect();
        if e.iter().any(|p| !p.is_zero()) {
            return e;
        }
    }
}

/// Draws a full dealing whose read-only rows equal what the adversary saw.
fn consistent_dealing<R: Rng + ?Sized>(
    params: &SchemeParams,
    placement: &Placement,
    view: &View<'_>,
    rng: &mut R,
) -> Result<Vec<PartyState>> {
    let f = params.field();
    let sc = params.staircase()?;
    let layout = sc.layout();
    let (s_len, k_len, v) = (sc.secret_len(), sc.key_len(), params.v());
    let observed: Vec<&PartyState> =
        placement.read_only.iter().map(|&id| view.state(id)).collect::<Result<_>>()?;

    let unknowns = s_len + k_len;
    let mut a = Matrix::zeros(observed.len() * sc.alpha(), unknowns);
    for (oi, st) in observed.iter().enumerate() {
        let x = st.id as u64;
        for c in 0..sc.alpha() {
            let row = oi * sc.alpha() + c;
            let mut pow = 1;
            for grid_row in &layout {
                let col = match grid_row[c] {
                    Slot::Zero => None,
                    Slot::Secret(t) => Some(t),
                    Slot::Key(t) => Some(s_len + t),
                };
                if let Some(col) = col {
                    a.set(row, col, f.add(a.get(row, col), pow));
                }
                pow = f.mul(pow, x);
            }
        }
    }
    let mut secret = vec![0; s_len * v];
    let mut keys = vec![0; k_len * v];
    for lane in 0..v {
        let b: Vec<u64> = observed
            .iter()
            .flat_map(|st| st.payload.iter().map(move |p| p.0[lane]))
            .collect();
        let x = solve_general(f, &a, &b, || f.random(rng))?;
        for t in 0..s_len {
            secret[t * v + lane] = x[t];
        }
        for t in 0..k_len {
            keys[t * v + lane] = x[s_len + t];
        }
    }
    params.deal_with_keys(&secret, &keys, rng)
}

/// Applies `kind` to the writers' in-flight responses. Strategies only read
/// state through `view`; anything outside it raises a contract violation.
pub fn corrupt<R: Rng + ?Sized>(
    kind: StrategyKind,
    params: &SchemeParams,
    placement: &Placement,
    view: &View<'_>,
    responses: &mut [Response],
    rng: &mut R,
) -> Result<()> {
    corrupt_with(kind, params, placement, view, responses, rng, |fake, contacted| {
        collect_responses(params, fake, contacted)
    })
}

fn full_response(state: &PartyState) -> Response {
    Response {
        party: state.id,
        payload: state.payload.clone(),
        hash_shares: state.hash_shares.clone(),
        elements_read: 0,
    }
}

/// Applies `kind` to the writers' stored states (full payload and every hash
/// share) instead of to a single download.
pub fn corrupt_stored<R: Rng + ?Sized>(
    kind: StrategyKind,
    params: &SchemeParams,
    placement: &Placement,
    view: &View<'_>,
    states: &mut [PartyState],
    rng: &mut R,
) -> Result<()> {
    let mut rows: Vec<Response> = states.iter().map(full_response).collect();
    corrupt_with(kind, params, placement, view, &mut rows, rng, |fake, contacted| {
        contacted
            .iter()
            .map(|&id| {
                fake.iter()
                    .find(|s| s.id == id)
                    .map(full_response)
                    .ok_or_else(|| Error::param(format!("no state for party {id}")))
            })
            .collect()
    })?;
    for (s, r) in states.iter_mut().zip(rows) {
        s.payload = r.payload;
        s.hash_shares = r.hash_shares;
    }
    Ok(())
}

fn corrupt_with<R: Rng + ?Sized>(
    kind: StrategyKind,
    params: &SchemeParams,
    placement: &Placement,
    view: &View<'_>,
    responses: &mut [Response],
    rng: &mut R,
    fake_rows: impl Fn(&[PartyState], &[usize]) -> Result<Vec<Response>>,
) -> Result<()> {
    if !responses.iter().any(|r| placement.writes(r.party)) {
        return Ok(());
    }
    let f = params.field();
    let contacted: Vec<usize> = responses.iter().map(|r| r.party).collect();
    match kind {
        StrategyKind::BlindAdditive | StrategyKind::HashTargeted => {
            for r in responses.iter_mut().filter(|r| placement.writes(r.party)) {
                let errors = nonzero_error(params, r.payload.len(), rng);
                for (p, e) in r.payload.iter_mut().zip(errors) {
                    p.add(f, &e);
                }
                if kind == StrategyKind::HashTargeted {
                    for h in &mut r.hash_shares {
                        *h = f.add(*h, f.random_nonzero(rng));
                    }
                }
            }
        }
        StrategyKind::FakeSecret => {
            let fake = consistent_dealing(params, placement, view, rng)?;
            let fake_responses = fake_rows(&fake, &contacted)?;
            for (r, fr) in responses.iter_mut().zip(fake_responses) {
                if placement.writes(r.party) {
                    r.payload = fr.payload;
                    r.hash_shares = fr.hash_shares;
                }
            }
        }
        StrategyKind::OrthogonalSearch => {
            let guess = if view.sees_everything() {
                view.states.to_vec()
            } else {
                consistent_dealing(params, placement, view, rng)?
            };
            let honest: Vec<&PartyState> = contacted
                .iter()
                .filter(|&&id| !placement.writes(id))
                .map(|&id| guess.iter().find(|s| s.id == id).expect("dealing covers all parties"))
                .collect();
            for r in responses.iter_mut().filter(|r| placement.writes(r.party)) {
                for (m, p) in r.payload.iter_mut().enumerate() {
                    let e = orthogonal_error(params, honest.iter().map(|s| &s.payload[m]), rng)?;
                    p.add(f, &e);
                }
            }
        }
    }
    Ok(())
}

/// A nonzero vector orthogonal to every `rows` packet when one exists,
/// otherwise a uniformly random nonzero vector.
fn orthogonal_error<'p, R: Rng + ?Sized>(
    params: &SchemeParams,
    rows: impl Iterator<Item = &'p Packet>,
    rng: &mut R,
) -> Result<Packet> {
    let f = params.field();
    let rows: Vec<Vec<u64>> = rows.map(|p| p.0.clone()).collect();
    if !rows.is_empty() {
        let a = Matrix::from_rows(rows)?;
        for _ in 0..8 {
            let x = solve_general(f, &a, &vec![0; a.rows()], || f.random(rng))?;
            if x.iter().any(|&c| c != 0) {
                return Ok(Packet(x));
            }
        }
    }
    Ok(nonzero_error(params, 1, rng).pop().expect("one packet"))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub strategy: StrategyKind,
    pub d: usize,
    pub trials: u64,
    pub seed: u64,
    /// Fixed contact set; random `d`-subset per trial when absent.
    pub contacts: Option<Vec<usize>>,
    /// Fixed placement; sampled per trial when absent.
    pub placement: Option<Placement>,
}

impl TrialConfig {
    pub fn new(strategy: StrategyKind, d: usize, trials: u64, seed: u64) -> Self {
        TrialConfig { strategy, d, trials, seed, contacts: None, placement: None }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialStats {
    pub trials: u64,
    pub success: u64,
    pub detected_abort: u64,
    pub undetected_wrong: u64,
    /// Reconstructions that hit an internal error.
    pub failure: u64,
}

/// Wilson score interval at 95% for `hits / n`.
pub fn wilson_interval(hits: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let (nf, p) = (n as f64, hits as f64 / n as f64);
    let denom = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

impl TrialStats {
    pub fn undetected_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.undetected_wrong as f64 / self.trials as f64
        }
    }

    pub fn wilson(&self) -> (f64, f64) {
        wilson_interval(self.undetected_wrong, self.trials)
    }

    fn merge(self, o: TrialStats) -> TrialStats {
        TrialStats {
            trials: self.trials + o.trials,
            success: self.success + o.success,
            detected_abort: self.detected_abort + o.detected_abort,
            undetected_wrong: self.undetected_wrong + o.undetected_wrong,
            failure: self.failure + o.failure,
        }
    }
}

fn one_trial(params: &SchemeParams, cfg: &TrialConfig, index: u64) -> Result<TrialStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let f = params.field();
    let secret: Vec<u64> = (0..params.capacity()).map(|_| f.random(&mut rng)).collect();
    let states = params.deal(&secret, &mut rng)?;
    let contacted = match &cfg.contacts {
        Some(c) => c.clone(),
        None => {
            let mut c: Vec<usize> = sample(&mut rng, params.n(), cfg.d).into_iter().map(|i| i + 1).collect();
            c.sort_unstable();
            c
        }
    };
    let placement = match &cfg.placement {
        Some(p) => p.clone(),
        None => Placement::sample(params, &contacted, &mut rng)?,
    };
    let view = match params.mode() {
        Mode::LimitedKnowledge => View::limited(&states, &placement),
        Mode::Omniscient => View::omniscient(&states),
    };
    let mut responses = collect_responses(params, &states, &contacted)?;
    corrupt(cfg.strategy, params, &placement, &view, &mut responses, &mut rng)?;
    let report = params.reconstruct(&responses)?;
    let mut s = TrialStats { trials: 1, ..TrialStats::default() };
    match report.status {
        Status::Success if report.secret.as_deref() == Some(&secret[..]) => s.success = 1,
        Status::Success => s.undetected_wrong = 1,
        Status::DetectedAbort => s.detected_abort = 1,
        Status::Failure => s.failure = 1,
    }
    Ok(s)
}

/// Runs `cfg.trials` independent trials in parallel. Trial `i` draws all
/// randomness from stream `i` of a ChaCha8 generator keyed by `cfg.seed`, so
/// results do not depend on scheduling.
pub fn run_trials(params: &SchemeParams, cfg: &TrialConfig) -> Result<TrialStats> {
    if params.capacity() == 0 {
        return Err(Error::NoSecretCapacity(params.condition_text()));
    }
    if cfg.d < params.k() || cfg.d > params.n() {
        return Err(Error::param(format!("need k <= d <= n, got d = {}", cfg.d)));
    }
    if let Some(c) = &cfg.contacts {
        if c.len() != cfg.d {
            return Err(Error::param("fixed contact set size differs from d"));
        }
    }
    (0..cfg.trials)
        .into_par_iter()
        .map(|i| one_trial(params, cfg, i))
        .try_reduce(TrialStats::default, |a, b| Ok(a.merge(b)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// `(1/q)^(n - d + 1)`.
    pub bound: f64,
    pub empirical: f64,
    pub wilson: (f64, f64),
    /// Binomial standard deviation at the bound.
    pub sigma: f64,
    /// `min(1, q^(z_w - capacity))`: ceiling on a fake secret being accepted.
    pub residual_bound: f64,
    pub passes: bool,
}

pub fn detection_bound(params: &SchemeParams, d: usize) -> f64 {
    (params.field().modulus() as f64).powi(-((params.n() - d + 1) as i32))
}

/// Compares an undetected-error rate against the hash detection bound at
/// bound + 3 sigma.
pub fn compare_to_bound(stats: &TrialStats, params: &SchemeParams, d: usize) -> BoundReport {
    let bound = detection_bound(params, d);
    let sigma = (bound * (1.0 - bound) / stats.trials.max(1) as f64).sqrt();
    let empirical = stats.undetected_rate();
    let exponent = params.z_w() as f64 - params.capacity() as f64;
    let residual_bound = (params.field().modulus() as f64).powf(exponent).min(1.0);
    BoundReport {
        bound,
        empirical,
        wilson: stats.wilson(),
        sigma,
        residual_bound,
        passes: empirical <= bound + 3.0 * sigma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashing::GraphMode;
    use crate::scheme::AdversaryBudget;

    fn intro() -> SchemeParams {
        SchemeParams::new(4, 3, AdversaryBudget::new(0, 0, 1), Mode::LimitedKnowledge, 5, 1, GraphMode::Complete).unwrap()
    }

    #[test]
    fn wilson_reference_values() {
        let (lo, hi) = wilson_interval(0, 100);
        assert!(lo.abs() < 1e-12);
        assert!((hi - 0.036_995).abs() < 1e-5);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.403_832).abs() < 1e-5 && (hi - 0.596_168).abs() < 1e-5);
    }

    #[test]
    fn view_enforces_read_set() {
        let p = intro();
        let states = p.deal(&[1, 2], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let placement = Placement::new(&p, vec![], vec![], vec![2]).unwrap();
        let view = View::limited(&states, &placement);
        assert!(view.state(2).is_ok());
        assert_eq!(view.state(1).unwrap_err(), Error::ContractViolation(1));
        assert!(View::omniscient(&states).state(1).is_ok());
    }

    #[test]
    fn placement_checks() {
        let p = intro();
        assert!(Placement::new(&p, vec![], vec![], vec![5]).is_err());
        assert!(Placement::new(&p, vec![1], vec![], vec![2]).is_err());
        assert!(Placement::new(&p, vec![], vec![], vec![2, 3]).is_err());
        assert!(Placement::new(&p, vec![], vec![], vec![]).is_ok());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let pl = Placement::sample(&p, &[2, 3, 4], &mut rng).unwrap();
            assert!([2, 3, 4].contains(&pl.read_write[0]));
        }
    }

    #[test]
    fn blind_additive_changes_every_writer() {
        let p = intro();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let states = p.deal(&[0, 0], &mut rng).unwrap();
        let placement = Placement::new(&p, vec![], vec![], vec![1]).unwrap();
        let view = View::limited(&states, &placement);
        for _ in 0..100 {
            let clean = collect_responses(&p, &states, &[1, 2, 3, 4]).unwrap();
            let mut dirty = clean.clone();
            corrupt(StrategyKind::BlindAdditive, &p, &placement, &view, &mut dirty, &mut rng).unwrap();
            assert_ne!(dirty[0].payload, clean[0].payload);
            assert_eq!(dirty[1..], clean[1..]);
        }
    }

    #[test]
    fn read_only_adversary_changes_nothing() {
        let p = SchemeParams::new(4, 2, AdversaryBudget::new(1, 0, 0), Mode::LimitedKnowledge, 5, 1, GraphMode::Complete)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let states = p.deal(&vec![3; p.capacity()], &mut rng).unwrap();
        let placement = Placement::new(&p, vec![2], vec![], vec![]).unwrap();
        let view = View::limited(&states, &placement);
        let clean = collect_responses(&p, &states, &[1, 2, 3]).unwrap();
        for kind in StrategyKind::ALL {
            let mut r = clean.clone();
            corrupt(kind, &p, &placement, &view, &mut r, &mut rng).unwrap();
            assert_eq!(r, clean);
        }
    }

    #[test]
    fn fake_secret_matches_read_only_observation() {
        let p = SchemeParams::new(7, 5, AdversaryBudget::new(1, 0, 1), Mode::LimitedKnowledge, 11, 2, GraphMode::Complete)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let secret: Vec<u64> = (0..p.capacity()).map(|_| p.field().random(&mut rng)).collect();
        let states = p.deal(&secret, &mut rng).unwrap();
        let placement = Placement::new(&p, vec![6], vec![], vec![1]).unwrap();
        let view = View::limited(&states, &placement);
        let fake = consistent_dealing(&p, &placement, &view, &mut rng).unwrap();
        assert_eq!(fake[5].payload, states[5].payload);
        assert_ne!(fake[0].payload, states[0].payload);
    }

    #[test]
    fn trials_are_deterministic_and_consistent() {
        let p = intro();
        let cfg = TrialConfig::new(StrategyKind::BlindAdditive, 4, 400, 21);
        let a = run_trials(&p, &cfg).unwrap();
        let b = run_trials(&p, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.success + a.detected_abort + a.undetected_wrong + a.failure, 400);
        assert_eq!(a.failure, 0);
    }

    #[test]
    fn no_adversary_no_errors() {
        let p = SchemeParams::new(5, 3, AdversaryBudget::default(), Mode::LimitedKnowledge, 7, 1, GraphMode::Complete)
            .unwrap();
        for d in 3..=5 {
            let s = run_trials(&p, &TrialConfig::new(StrategyKind::BlindAdditive, d, 100, d as u64)).unwrap();
            assert_eq!(s.success, 100);
        }
    }

    #[test]
    fn bound_values() {
        let p = intro();
        assert!((detection_bound(&p, 4) - 0.2).abs() < 1e-12);
        assert!((detection_bound(&p, 3) - 0.04).abs() < 1e-12);
        let p6 = SchemeParams::new(6, 4, AdversaryBudget::new(0, 0, 1), Mode::LimitedKnowledge, 11, 1, GraphMode::Complete)
            .unwrap();
        assert!((detection_bound(&p6, 6) - 1.0 / 11.0).abs() < 1e-12);
    }
}
