use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Sample;
use crate::{Error, Result};

/// Stable identity of a sample across pool moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub id: SampleId,
    pub x: Vec<f64>,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnlabeledSample {
    pub id: SampleId,
    pub x: Vec<f64>,
}

/// Labeled, unlabeled and test splits. Labels of unlabeled samples are
/// hidden and only revealed through [`SamplePool::label_query`].
#[derive(Debug, Clone)]
pub struct SamplePool {
    labeled: Vec<LabeledSample>,
    unlabeled: Vec<UnlabeledSample>,
    hidden: BTreeMap<SampleId, usize>,
    test: Vec<LabeledSample>,
    class_count: usize,
}

/// Split `data` into test, class-stratified labeled and unlabeled sets.
/// Sample ids are positions in `data`.
pub fn make_pool<R: rand::Rng + ?Sized>(
    data: &[Sample],
    labeled_n: usize,
    test_n: usize,
    class_count: usize,
    rng: &mut R,
) -> Result<SamplePool> {
    if labeled_n + test_n > data.len() {
        return Err(Error::Config(format!(
            "labeled ({labeled_n}) + test ({test_n}) exceeds dataset size {}",
            data.len()
        )));
    }
    if class_count == 0 {
        return Err(Error::Config("class count must be positive".into()));
    }
    if let Some(s) = data.iter().find(|s| s.class >= class_count) {
        return Err(Error::Config(format!(
            "label {} outside [0, {class_count})",
            s.class
        )));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    let (test_idx, rest) = order.split_at(test_n);

    let mut quota: Vec<usize> = (0..class_count)
        .map(|c| labeled_n / class_count + usize::from(c < labeled_n % class_count))
        .collect();
    let mut take = vec![false; rest.len()];
    let mut taken = 0;
    for (j, &i) in rest.iter().enumerate() {
        let c = data[i].class;
        if quota[c] > 0 {
            quota[c] -= 1;
            take[j] = true;
            taken += 1;
        }
    }
    // classes that ran short: fill from whatever remains, in shuffled order
    for t in take.iter_mut() {
        if taken == labeled_n {
            break;
        }
        if !*t {
            *t = true;
            taken += 1;
        }
    }

    let to_labeled = |i: usize| LabeledSample {
        id: SampleId(i),
        x: data[i].x.clone(),
        class: data[i].class,
    };
    let mut pool = SamplePool {
        labeled: Vec::with_capacity(labeled_n),
        unlabeled: Vec::with_capacity(rest.len() - labeled_n),
        hidden: BTreeMap::new(),
        test: test_idx.iter().map(|&i| to_labeled(i)).collect(),
        class_count,
    };
    for (j, &i) in rest.iter().enumerate() {
        if take[j] {
            pool.labeled.push(to_labeled(i));
        } else {
            pool.unlabeled.push(UnlabeledSample {
                id: SampleId(i),
                x: data[i].x.clone(),
            });
            pool.hidden.insert(SampleId(i), data[i].class);
        }
    }
    Ok(pool)
}

impl SamplePool {
    /// Assemble a pool from explicit splits.
    pub fn from_parts(
        labeled: Vec<LabeledSample>,
        unlabeled: Vec<(UnlabeledSample, usize)>,
        test: Vec<LabeledSample>,
        class_count: usize,
    ) -> Result<Self> {
        let mut hidden = BTreeMap::new();
        let mut seen = std::collections::BTreeSet::new();
        for id in labeled
            .iter()
            .map(|s| s.id)
            .chain(test.iter().map(|s| s.id))
        {
            if !seen.insert(id) {
                return Err(Error::Config(format!("sample {id:?} appears twice")));
            }
        }
        let mut u = Vec::with_capacity(unlabeled.len());
        for (s, c) in unlabeled {
            if !seen.insert(s.id) {
                return Err(Error::Config(format!("sample {:?} appears twice", s.id)));
            }
            hidden.insert(s.id, c);
            u.push(s);
        }
        Ok(SamplePool {
            labeled,
            unlabeled: u,
            hidden,
            test,
            class_count,
        })
    }

    /// Apply `f` to every feature vector in all splits.
    pub fn map_features(&mut self, f: impl Fn(&[f64]) -> Vec<f64>) {
        for s in self.labeled.iter_mut().chain(self.test.iter_mut()) {
            s.x = f(&s.x);
        }
        for s in self.unlabeled.iter_mut() {
            s.x = f(&s.x);
        }
    }

    /// Features of the labeled and unlabeled splits.
    pub fn train_features(&self) -> impl Iterator<Item = &[f64]> {
        self.labeled
            .iter()
            .map(|s| s.x.as_slice())
            .chain(self.unlabeled.iter().map(|s| s.x.as_slice()))
    }

    pub fn labeled(&self) -> &[LabeledSample] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[UnlabeledSample] {
        &self.unlabeled
    }

    pub fn test(&self) -> &[LabeledSample] {
        &self.test
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Reveal the label of the unlabeled sample at `index` and move it to
    /// the labeled set.
    pub fn label_query(&mut self, index: usize) -> Result<usize> {
        if index >= self.unlabeled.len() {
            return Err(Error::OutOfRange {
                index,
                len: self.unlabeled.len(),
            });
        }
        let s = self.unlabeled.remove(index);
        let class = self
            .hidden
            .remove(&s.id)
            .expect("every unlabeled sample has a hidden label");
        self.labeled.push(LabeledSample {
            id: s.id,
            x: s.x,
            class,
        });
        Ok(class)
    }

    /// [`SamplePool::label_query`] addressed by sample id.
    pub fn label_query_id(&mut self, id: SampleId) -> Result<usize> {
        let index = self
            .unlabeled
            .iter()
            .position(|s| s.id == id)
            .ok_or(Error::OutOfRange {
                index: id.0,
                len: self.unlabeled.len(),
            })?;
        self.label_query(index)
    }
}
