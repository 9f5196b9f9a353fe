//! Player effect regressions with sum-to-zero contrasts.
//!
//! Defender model: `y = β₀ + α_shooter + γ_defender`.
//! Resilience model: `y = β₀ + α_shooter + (b + γ_shooter)·(NDD − c)` where `b`
//! is a league-wide slope and `c` the league mean NDD. The literal variant
//! drops `b` and uses raw NDD (`c = 0`).
//!
//! Each factor with `L` levels gets `L − 1` columns; the level that sorts last
//! is coded −1 in all of them, so its effect is minus the sum of the others.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GameId, PlayerId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EffectsError {
    #[error("{role} factor has {levels} level(s) after filtering; need at least 2")]
    TooFewLevels { role: &'static str, levels: usize },
    #[error("design is rank deficient; aliased columns: {}", .aliased.join(", "))]
    RankDeficient { aliased: Vec<String> },
    #[error("response {value} outside [0, 1] on row {row}")]
    ResponseOutOfRange { row: usize, value: f64 },
    #[error("row {0} is missing a make probability")]
    MissingProbability(usize),
    #[error("non-finite NDD on row {0}")]
    NonFiniteNdd(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Defender,
    Resilience,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseKind {
    /// Binary make/miss outcome.
    Raw,
    /// Modeled make probability.
    Prob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResilienceVariant {
    /// Common slope on league-mean-centered NDD plus per-shooter deviations.
    #[default]
    CommonSlope,
    /// Per-shooter sum-to-zero slopes on raw NDD, no common slope.
    Literal,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Defender => "defender",
            ModelKind::Resilience => "resilience",
        })
    }
}

impl std::fmt::Display for ResponseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ResponseKind::Raw => "raw",
            ResponseKind::Prob => "prob",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub shot_id: String,
    pub game_id: GameId,
    pub shooter: PlayerId,
    pub defender: PlayerId,
    pub ndd: f64,
    /// 1.0 for a make, 0.0 for a miss.
    pub outcome: f64,
    pub prob: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EffectsDataset {
    pub rows: Vec<EffectRow>,
}

impl EffectsDataset {
    pub fn new(rows: Vec<EffectRow>) -> Self {
        EffectsDataset { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn responses(&self, kind: ResponseKind) -> Result<Vec<f64>, EffectsError> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let v = match kind {
                    ResponseKind::Raw => r.outcome,
                    ResponseKind::Prob => r.prob.ok_or(EffectsError::MissingProbability(i))?,
                };
                if !(0.0..=1.0).contains(&v) {
                    return Err(EffectsError::ResponseOutOfRange { row: i, value: v });
                }
                Ok(v)
            })
            .collect()
    }

    /// Rows whose game is in `games`.
    pub fn restrict_to_games(&self, games: &BTreeSet<GameId>) -> Self {
        EffectsDataset { rows: self.rows.iter().filter(|r| games.contains(&r.game_id)).cloned().collect() }
    }

    pub fn games(&self) -> BTreeSet<GameId> {
        self.rows.iter().map(|r| r.game_id.clone()).collect()
    }

    /// Rows in the largest connected block of the shooter-defender graph.
    ///
    /// Two blocks that never meet each share an unidentified offset, which
    /// makes the defender design rank deficient. Short seasons (or halves of
    /// one) can split this way when a pair of teams only played each other.
    /// The block with the most rows wins; ties go to the block holding the
    /// smallest shooter id.
    pub fn largest_connected_block(&self) -> Self {
        let mut index: BTreeMap<(bool, &PlayerId), usize> = BTreeMap::new();
        for r in &self.rows {
            let n = index.len();
            index.entry((false, &r.shooter)).or_insert(n);
            let n = index.len();
            index.entry((true, &r.defender)).or_insert(n);
        }
        let mut parent: Vec<usize> = (0..index.len()).collect();
        fn root(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for r in &self.rows {
            let a = root(&mut parent, index[&(false, &r.shooter)]);
            let b = root(&mut parent, index[&(true, &r.defender)]);
            parent[a.max(b)] = a.min(b);
        }
        let block_of: Vec<usize> = self.rows.iter().map(|r| root(&mut parent, index[&(false, &r.shooter)])).collect();
        let mut size: BTreeMap<usize, (usize, &PlayerId)> = BTreeMap::new();
        for (r, &b) in self.rows.iter().zip(&block_of) {
            let e = size.entry(b).or_insert((0, &r.shooter));
            e.0 += 1;
            e.1 = e.1.min(&r.shooter);
        }
        let best = size.iter().max_by(|a, b| a.1 .0.cmp(&b.1 .0).then_with(|| b.1 .1.cmp(a.1 .1))).map(|(&k, _)| k);
        EffectsDataset {
            rows: self.rows.iter().zip(&block_of).filter(|(_, &b)| Some(b) == best).map(|(r, _)| r.clone()).collect(),
        }
    }
}

fn count_by<'a>(rows: &'a [EffectRow], key: impl Fn(&'a EffectRow) -> &'a PlayerId) -> BTreeMap<&'a PlayerId, usize> {
    let mut m = BTreeMap::new();
    for r in rows {
        *m.entry(key(r)).or_insert(0) += 1;
    }
    m
}

/// Drop rows whose shooter (and, for the defender model, defender) has fewer
/// than `threshold` rows, repeating until nothing changes.
pub fn apply_min_shots_filter_for(dataset: &EffectsDataset, threshold: usize, kind: ModelKind) -> EffectsDataset {
    let mut rows = dataset.rows.clone();
    loop {
        let shooters = count_by(&rows, |r| &r.shooter);
        let defenders = count_by(&rows, |r| &r.defender);
        let keep: Vec<bool> = rows
            .iter()
            .map(|r| shooters[&r.shooter] >= threshold && (kind == ModelKind::Resilience || defenders[&r.defender] >= threshold))
            .collect();
        if keep.iter().all(|&k| k) {
            return EffectsDataset { rows };
        }
        rows = rows.into_iter().zip(keep).filter_map(|(r, k)| k.then_some(r)).collect();
    }
}

/// Fixed-point filter on both shooters and defenders.
pub fn apply_min_shots_filter(dataset: &EffectsDataset, threshold: usize) -> EffectsDataset {
    apply_min_shots_filter_for(dataset, threshold, ModelKind::Defender)
}

/// Sparse contrast-coded design.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastDesign {
    pub kind: ModelKind,
    pub variant: ResilienceVariant,
    pub columns: Vec<String>,
    /// Non-zero entries of each row as `(column, value)`.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub shooters: Vec<PlayerId>,
    pub defenders: Vec<PlayerId>,
    pub ndd_center: f64,
}

impl ContrastDesign {
    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows.len(), self.n_cols());
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] += v;
            }
        }
        m
    }
}

fn levels<'a>(rows: &'a [EffectRow], key: impl Fn(&'a EffectRow) -> &'a PlayerId) -> Vec<PlayerId> {
    rows.iter().map(key).collect::<BTreeSet<_>>().into_iter().cloned().collect()
}

/// Push the sum-to-zero coding of level `idx` among `n` levels, scaled by `scale`,
/// into columns starting at `offset`.
fn push_contrast(row: &mut Vec<(usize, f64)>, offset: usize, idx: usize, n: usize, scale: f64) {
    if idx + 1 < n {
        row.push((offset + idx, scale));
    } else {
        row.extend((0..n - 1).map(|j| (offset + j, -scale)));
    }
}

pub fn build_design(
    dataset: &EffectsDataset,
    kind: ModelKind,
    variant: ResilienceVariant,
) -> Result<ContrastDesign, EffectsError> {
    let rows = &dataset.rows;
    let shooters = levels(rows, |r| &r.shooter);
    let defenders = levels(rows, |r| &r.defender);
    if shooters.len() < 2 {
        return Err(EffectsError::TooFewLevels { role: "shooter", levels: shooters.len() });
    }
    if kind == ModelKind::Defender && defenders.len() < 2 {
        return Err(EffectsError::TooFewLevels { role: "defender", levels: defenders.len() });
    }
    if let Some(i) = rows.iter().position(|r| !r.ndd.is_finite()) {
        if kind == ModelKind::Resilience {
            return Err(EffectsError::NonFiniteNdd(i));
        }
    }
    let s_index: BTreeMap<&PlayerId, usize> = shooters.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let d_index: BTreeMap<&PlayerId, usize> = defenders.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let ns = shooters.len();
    let mut columns = vec!["intercept".to_string()];
    columns.extend(shooters[..ns - 1].iter().map(|p| format!("shooter:{p}")));
    let mut ndd_center = 0.0;
    let common_slope = kind == ModelKind::Resilience && variant == ResilienceVariant::CommonSlope;
    match kind {
        ModelKind::Defender => {
            columns.extend(defenders[..defenders.len() - 1].iter().map(|p| format!("defender:{p}")));
        }
        ModelKind::Resilience => {
            if common_slope {
                ndd_center = rows.iter().map(|r| r.ndd).sum::<f64>() / rows.len() as f64;
                columns.push("ndd".into());
            }
            columns.extend(shooters[..ns - 1].iter().map(|p| format!("ndd:{p}")));
        }
    }
    let slope_offset = ns + usize::from(common_slope);
    let design_rows = rows
        .iter()
        .map(|r| {
            let mut row = vec![(0, 1.0)];
            let si = s_index[&r.shooter];
            push_contrast(&mut row, 1, si, ns, 1.0);
            match kind {
                ModelKind::Defender => push_contrast(&mut row, ns, d_index[&r.defender], defenders.len(), 1.0),
                ModelKind::Resilience => {
                    let x = r.ndd - ndd_center;
                    if common_slope {
                        row.push((ns, x));
                    }
                    push_contrast(&mut row, slope_offset, si, ns, x);
                }
            }
            row
        })
        .collect();
    Ok(ContrastDesign { kind, variant, columns, rows: design_rows, shooters, defenders, ndd_center })
}

/// Cholesky of a symmetric PSD matrix that skips (and reports) columns whose
/// pivot collapses relative to their original diagonal.
fn cholesky_with_aliasing(a: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>, Vec<usize>> {
    let n = a.nrows();
    let mut l = DMatrix::zeros(n, n);
    let mut aliased = Vec::new();
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > rel_tol * a[(j, j)].abs().max(f64::MIN_POSITIVE)) {
            aliased.push(j);
            continue;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    if aliased.is_empty() {
        Ok(l)
    } else {
        Err(aliased)
    }
}

fn solve_lower(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let y = l.solve_lower_triangular(b).expect("non-zero diagonal");
    l.transpose().solve_upper_triangular(&y).expect("non-zero diagonal")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimates {
    pub kind: ModelKind,
    pub response: ResponseKind,
    pub intercept: f64,
    /// α for every shooter, summing to zero.
    pub shooter_effects: BTreeMap<PlayerId, f64>,
    /// γ_k per defender (defender model) or γ_j per shooter (resilience).
    pub player_effects: BTreeMap<PlayerId, f64>,
    pub common_ndd_slope: Option<f64>,
    pub ndd_center: f64,
    pub residual_sse: f64,
    pub n_rows: usize,
    /// Row counts for the players in `player_effects`.
    pub n_shots: BTreeMap<PlayerId, usize>,
    /// Mean modeled make probability over each player's rows, when available.
    pub mean_prob: BTreeMap<PlayerId, f64>,
}

impl EffectEstimates {
    pub fn role(&self) -> &'static str {
        match self.kind {
            ModelKind::Defender => "defender",
            ModelKind::Resilience => "shooter",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EffectsConfig {
    pub min_shots: usize,
    pub resilience_variant: ResilienceVariant,
}

impl Default for EffectsConfig {
    fn default() -> Self {
        Self { min_shots: 100, resilience_variant: ResilienceVariant::CommonSlope }
    }
}

fn expand(coefs: &[f64], levels: &[PlayerId]) -> BTreeMap<PlayerId, f64> {
    let mut m: BTreeMap<PlayerId, f64> = levels[..levels.len() - 1].iter().cloned().zip(coefs.iter().copied()).collect();
    m.insert(levels[levels.len() - 1].clone(), -coefs.iter().sum::<f64>());
    m
}

/// OLS on the contrast design of an already filtered dataset.
pub fn fit_effects(
    dataset: &EffectsDataset,
    kind: ModelKind,
    response: ResponseKind,
    variant: ResilienceVariant,
) -> Result<EffectEstimates, EffectsError> {
    let y = dataset.responses(response)?;
    let design = build_design(dataset, kind, variant)?;
    let p = design.n_cols();
    let mut xtx = DMatrix::zeros(p, p);
    let mut xty = DVector::zeros(p);
    for (row, &yi) in design.rows.iter().zip(&y) {
        for &(i, vi) in row {
            xty[i] += vi * yi;
            for &(j, vj) in row {
                xtx[(i, j)] += vi * vj;
            }
        }
    }
    let l = cholesky_with_aliasing(&xtx, 1e-10).map_err(|cols| EffectsError::RankDeficient {
        aliased: cols.into_iter().map(|c| design.columns[c].clone()).collect(),
    })?;
    let mut beta = solve_lower(&l, &xty);
    // One refinement step tightens ill-conditioned player designs.
    let r = &xty - &xtx * &beta;
    beta += solve_lower(&l, &r);

    let mut sse = 0.0;
    for (row, &yi) in design.rows.iter().zip(&y) {
        let fit: f64 = row.iter().map(|&(j, v)| v * beta[j]).sum();
        sse += (yi - fit) * (yi - fit);
    }
    let ns = design.shooters.len();
    let shooter_effects = expand(&beta.as_slice()[1..ns], &design.shooters);
    let (player_effects, common, role_levels) = match kind {
        ModelKind::Defender => (expand(&beta.as_slice()[ns..], &design.defenders), None, &design.defenders),
        ModelKind::Resilience => match variant {
            ResilienceVariant::CommonSlope => {
                (expand(&beta.as_slice()[ns + 1..], &design.shooters), Some(beta[ns]), &design.shooters)
            }
            ResilienceVariant::Literal => (expand(&beta.as_slice()[ns..], &design.shooters), None, &design.shooters),
        },
    };
    let key = |r: &EffectRow| match kind {
        ModelKind::Defender => r.defender.clone(),
        ModelKind::Resilience => r.shooter.clone(),
    };
    let mut n_shots: BTreeMap<PlayerId, usize> = role_levels.iter().map(|p| (p.clone(), 0)).collect();
    let mut prob_sums: BTreeMap<PlayerId, (f64, usize)> = BTreeMap::new();
    for r in &dataset.rows {
        *n_shots.get_mut(&key(r)).expect("level exists") += 1;
        if let Some(p) = r.prob {
            let e = prob_sums.entry(key(r)).or_insert((0.0, 0));
            e.0 += p;
            e.1 += 1;
        }
    }
    let mean_prob = prob_sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
    Ok(EffectEstimates {
        kind,
        response,
        intercept: beta[0],
        shooter_effects,
        player_effects,
        common_ndd_slope: common,
        ndd_center: design.ndd_center,
        residual_sse: sse,
        n_rows: dataset.len(),
        n_shots,
        mean_prob,
    })
}

/// Filter by `cfg.min_shots`, keep the largest connected block (defender
/// model), then fit.
pub fn fit_filtered(
    dataset: &EffectsDataset,
    kind: ModelKind,
    response: ResponseKind,
    cfg: &EffectsConfig,
) -> Result<(EffectsDataset, EffectEstimates), EffectsError> {
    let mut filtered = apply_min_shots_filter_for(dataset, cfg.min_shots, kind);
    if kind == ModelKind::Defender {
        filtered = filtered.largest_connected_block();
    }
    let est = fit_effects(&filtered, kind, response, cfg.resilience_variant)?;
    Ok((filtered, est))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPlayer {
    pub rank: usize,
    pub player_id: PlayerId,
    pub role: String,
    pub effect: f64,
    /// Defender model: γ·100. Resilience model: −γ·100, the change per foot
    /// closer relative to the league slope.
    pub effect_per_100: f64,
    pub n_shots: usize,
    pub opp_mean_prob: Option<f64>,
}

/// Players ordered by ascending γ (best defenders first, most resilient
/// shooters first), ties broken by id.
pub fn rank_players(est: &EffectEstimates) -> Vec<RankedPlayer> {
    let mut v: Vec<(&PlayerId, f64)> = est.player_effects.iter().map(|(p, &g)| (p, g)).collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    let sign = match est.kind {
        ModelKind::Defender => 1.0,
        ModelKind::Resilience => -1.0,
    };
    v.into_iter()
        .enumerate()
        .map(|(i, (p, g))| RankedPlayer {
            rank: i + 1,
            player_id: p.clone(),
            role: est.role().to_string(),
            effect: g,
            effect_per_100: sign * g * 100.0,
            n_shots: est.n_shots.get(p).copied().unwrap_or(0),
            opp_mean_prob: est.mean_prob.get(p).copied(),
        })
        .collect()
}

/// Fixed-width text table of the top and bottom `n` players.
pub fn format_table(ranked: &[RankedPlayer], n: usize, title: &str) -> String {
    let mut out = format!("{title}\n{:>5}  {:<16} {:>10} {:>9} {:>7}\n", "rank", "player", "per_100", "opp_prob", "shots");
    let pick: Vec<&RankedPlayer> = if ranked.len() <= 2 * n {
        ranked.iter().collect()
    } else {
        ranked[..n].iter().chain(&ranked[ranked.len() - n..]).collect()
    };
    for r in pick {
        let prob = r.opp_mean_prob.map(|p| format!("{:.1}%", p * 100.0)).unwrap_or_else(|| "-".into());
        out += &format!("{:>5}  {:<16} {:>10.2} {:>9} {:>7}\n", r.rank, r.player_id, r.effect_per_100, prob, r.n_shots);
    }
    out
}
