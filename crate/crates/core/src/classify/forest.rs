use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::{derive_seed, rng_from_seed};
use crate::vectorize::DocTermMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_split: usize,
    /// Features examined per split; `None` means `ceil(sqrt(V))`.
    pub mtry: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            min_split: 2,
            mtry: None,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn resolved_mtry(&self, n_features: usize) -> Result<usize> {
        let m = self
            .mtry
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize);
        if n_features > 0 && !(1..=n_features).contains(&m) {
            return Err(Error::invalid(format!("mtry {m} outside [1, {n_features}]")));
        }
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("a forest needs at least one tree"));
        }
        if self.min_split < 2 {
            return Err(Error::invalid("min_split must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        p1: f64,
    },
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(p1: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { p1 }],
        }
    }

    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        let n = nodes.len() as u32;
        if n == 0 {
            return Err(Error::invalid("a tree needs a root"));
        }
        for node in &nodes {
            if let Node::Split { left, right, .. } = node {
                if *left >= n || *right >= n {
                    return Err(Error::invalid("tree child index out of range"));
                }
            }
        }
        Ok(Tree { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features_used(&self) -> Option<u32> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    pub fn predict(&self, row: &[u32]) -> f64 {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf { p1 } => return p1,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if f64::from(row[feature as usize]) <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }
}

/// Column-wise non-zeros, built once per fit.
struct Columns {
    entries: Vec<Vec<(u32, u32)>>,
}

impl Columns {
    fn new(matrix: &DocTermMatrix) -> Self {
        let mut entries = vec![Vec::new(); matrix.n_cols()];
        for i in 0..matrix.n_rows() {
            for (j, &c) in matrix.row(i).iter().enumerate() {
                if c > 0 {
                    entries[j].push((i as u32, c));
                }
            }
        }
        Columns { entries }
    }
}

const OUT_OF_BAG: u32 = u32::MAX;

struct Builder<'a> {
    matrix: &'a DocTermMatrix,
    columns: &'a Columns,
    cfg: &'a ForestConfig,
    mtry: usize,
    weight: Vec<u32>,
    node_of: Vec<u32>,
    features: Vec<u32>,
    nodes: Vec<Node>,
}

struct Candidate {
    score: f64,
    feature: u32,
    threshold: f64,
}

impl Builder<'_> {
    fn class_weights(&self, rows: &[u32]) -> [f64; 2] {
        let mut w = [0.0; 2];
        for &r in rows {
            w[self.matrix.labels()[r as usize] as usize] += f64::from(self.weight[r as usize]);
        }
        w
    }

    /// Best Gini split of node `id`. Features are drawn without replacement;
    /// constant ones do not count towards `mtry`.
    fn best_split<R: Rng>(&mut self, id: u32, totals: [f64; 2], rng: &mut R) -> Option<Candidate> {
        let n_feat = self.features.len();
        let mut best: Option<Candidate> = None;
        let mut informative = 0;
        let mut groups: Vec<(u32, [f64; 2])> = Vec::new();
        for drawn in 0..n_feat {
            if informative == self.mtry {
                break;
            }
            let pick = rng.random_range(drawn..n_feat);
            self.features.swap(drawn, pick);
            let f = self.features[drawn];

            groups.clear();
            let mut nz = [0.0; 2];
            for &(r, c) in &self.columns.entries[f as usize] {
                if self.node_of[r as usize] != id {
                    continue;
                }
                let w = f64::from(self.weight[r as usize]);
                let l = self.matrix.labels()[r as usize] as usize;
                let mut cls = [0.0; 2];
                cls[l] = w;
                nz[l] += w;
                groups.push((c, cls));
            }
            groups.sort_unstable_by_key(|g| g.0);
            groups.dedup_by(|next, kept| {
                if next.0 == kept.0 {
                    kept.1[0] += next.1[0];
                    kept.1[1] += next.1[1];
                    true
                } else {
                    false
                }
            });
            let zeros = [totals[0] - nz[0], totals[1] - nz[1]];
            if zeros[0] + zeros[1] > 0.0 {
                groups.insert(0, (0, zeros));
            }
            if groups.len() < 2 {
                continue;
            }
            informative += 1;

            let mut left = [0.0; 2];
            for k in 0..groups.len() - 1 {
                left[0] += groups[k].1[0];
                left[1] += groups[k].1[1];
                let right = [totals[0] - left[0], totals[1] - left[1]];
                let (nl, nr) = (left[0] + left[1], right[0] + right[1]);
                // maximising this minimises the weighted child Gini impurity
                let score = (left[0] * left[0] + left[1] * left[1]) / nl
                    + (right[0] * right[0] + right[1] * right[1]) / nr;
                if best.as_ref().is_none_or(|b| score > b.score) {
                    best = Some(Candidate {
                        score,
                        feature: f,
                        threshold: 0.5 * (f64::from(groups[k].0) + f64::from(groups[k + 1].0)),
                    });
                }
            }
        }
        best
    }

    fn grow<R: Rng>(mut self, rng: &mut R) -> Tree {
        let root: Vec<u32> = (0..self.matrix.n_rows() as u32)
            .filter(|&r| self.weight[r as usize] > 0)
            .collect();
        for &r in &root {
            self.node_of[r as usize] = 0;
        }
        self.nodes.push(Node::Leaf { p1: 0.0 });
        let mut stack = vec![(0u32, root, 0usize)];
        while let Some((id, rows, depth)) = stack.pop() {
            let totals = self.class_weights(&rows);
            let n = totals[0] + totals[1];
            let leaf = Node::Leaf { p1: totals[1] / n };
            let stop = totals[0] == 0.0
                || totals[1] == 0.0
                || n < self.cfg.min_split as f64
                || self.cfg.max_depth.is_some_and(|d| depth >= d);
            let split = if stop { None } else { self.best_split(id, totals, rng) };
            let Some(c) = split else {
                self.nodes[id as usize] = leaf;
                continue;
            };
            let (l_id, r_id) = (self.nodes.len() as u32, self.nodes.len() as u32 + 1);
            self.nodes.push(Node::Leaf { p1: 0.0 });
            self.nodes.push(Node::Leaf { p1: 0.0 });
            let (left, right): (Vec<u32>, Vec<u32>) = rows
                .into_iter()
                .partition(|&r| f64::from(self.matrix.get(r as usize, c.feature as usize)) <= c.threshold);
            for &r in &left {
                self.node_of[r as usize] = l_id;
            }
            for &r in &right {
                self.node_of[r as usize] = r_id;
            }
            self.nodes[id as usize] = Node::Split {
                feature: c.feature,
                threshold: c.threshold,
                left: l_id,
                right: r_id,
            };
            stack.push((r_id, right, depth + 1));
            stack.push((l_id, left, depth + 1));
        }
        Tree { nodes: self.nodes }
    }
}

/// Bootstrap-aggregated CART trees. Tree `t` draws from the seed
/// `derive_seed([cfg.seed, t])`, so the result does not depend on the
/// number of worker threads.
pub fn fit_trees(matrix: &DocTermMatrix, cfg: &ForestConfig) -> Result<Vec<Tree>> {
    cfg.validate()?;
    let [c0, c1] = matrix.class_counts();
    if c0 == 0 || c1 == 0 {
        return Err(Error::MissingClass(u8::from(c1 == 0)));
    }
    let mtry = cfg.resolved_mtry(matrix.n_cols())?;
    let columns = Columns::new(matrix);
    let d = matrix.n_rows();
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(&[cfg.seed, t as u64]));
            let mut weight = vec![0u32; d];
            for _ in 0..d {
                weight[rng.random_range(0..d)] += 1;
            }
            let builder = Builder {
                matrix,
                columns: &columns,
                cfg,
                mtry,
                weight,
                node_of: vec![OUT_OF_BAG; d],
                features: (0..matrix.n_cols() as u32).collect(),
                nodes: Vec::new(),
            };
            builder.grow(&mut rng)
        })
        .collect();
    Ok(trees)
}
