//! Per-centre stratified train/validation/test splits.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Subject {
    pub subject_id: String,
    pub centre: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Train => "train",
            Role::Validation => "validation",
            Role::Test => "test",
        })
    }
}

/// Subjects per role within every centre.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quota {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl Default for Quota {
    fn default() -> Self {
        Quota {
            train: 3,
            validation: 1,
            test: 1,
        }
    }
}

impl Quota {
    pub fn total(&self) -> usize {
        self.train + self.validation + self.test
    }

    fn roles(&self) -> Vec<Role> {
        let mut r = vec![Role::Train; self.train];
        r.extend(std::iter::repeat_n(Role::Validation, self.validation));
        r.extend(std::iter::repeat_n(Role::Test, self.test));
        r
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub subject_id: String,
    pub centre: String,
    pub role: Role,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub fold: usize,
    /// Sorted by centre, then subject id.
    pub assignments: Vec<Assignment>,
}

impl SplitPlan {
    pub fn subjects(&self, role: Role) -> Vec<&str> {
        self.assignments
            .iter()
            .filter(|a| a.role == role)
            .map(|a| a.subject_id.as_str())
            .collect()
    }
}

/// Reads a `subject_id,centre` manifest.
pub fn read_manifest<R: Read>(input: R) -> Result<Vec<Subject>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?;
    if header.iter().ne(["subject_id", "centre"]) {
        return Err(Error::invalid(format!(
            "manifest header must be subject_id,centre (found {})",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut subjects: Vec<Subject> = Vec::new();
    for rec in r.deserialize() {
        let s: Subject = rec?;
        if subjects.iter().any(|o| o.subject_id == s.subject_id) {
            return Err(Error::invalid(format!("duplicate subject {}", s.subject_id)));
        }
        subjects.push(s);
    }
    if subjects.is_empty() {
        return Err(Error::invalid("manifest lists no subjects"));
    }
    Ok(subjects)
}

fn by_centre(subjects: &[Subject], quota: &Quota) -> Result<BTreeMap<String, Vec<String>>> {
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for s in subjects {
        groups
            .entry(s.centre.clone())
            .or_default()
            .push(s.subject_id.clone());
    }
    if groups.is_empty() {
        return Err(Error::invalid("no subjects to split"));
    }
    for (centre, ids) in &mut groups {
        if ids.len() != quota.total() {
            return Err(Error::invalid(format!(
                "centre {centre} has {} subjects, quota needs {}",
                ids.len(),
                quota.total()
            )));
        }
        ids.sort();
    }
    Ok(groups)
}

fn plan(fold: usize, groups: &BTreeMap<String, Vec<String>>, roles: &[&[Role]]) -> SplitPlan {
    let mut assignments = Vec::new();
    for ((centre, ids), roles) in groups.iter().zip(roles) {
        for (id, &role) in ids.iter().zip(roles.iter()) {
            assignments.push(Assignment {
                subject_id: id.clone(),
                centre: centre.clone(),
                role,
            });
        }
    }
    SplitPlan { fold, assignments }
}

/// One seeded split; each centre is shuffled on its own stream.
pub fn stratified_split(subjects: &[Subject], quota: &Quota, seed: u64) -> Result<SplitPlan> {
    let groups = by_centre(subjects, quota)?;
    let per_centre: Vec<Vec<Role>> = (0..groups.len())
        .map(|k| {
            let mut roles = quota.roles();
            roles.shuffle(&mut rng::stream(seed, k as u64));
            roles
        })
        .collect();
    let refs: Vec<&[Role]> = per_centre.iter().map(|r| r.as_slice()).collect();
    Ok(plan(0, &groups, &refs))
}

/// Distinct orderings of a multiset, in lexicographic order.
fn role_permutations(quota: &Quota) -> Vec<Vec<Role>> {
    let mut current = quota.roles();
    let mut out = vec![current.clone()];
    // next lexicographic permutation
    loop {
        let n = current.len();
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| current[i] < current[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| current[j] > current[i]).unwrap();
        current.swap(i, j);
        current[i + 1..].reverse();
        out.push(current.clone());
    }
    out
}

/// Every split satisfying the quota in every centre.
pub fn enumerate_folds(subjects: &[Subject], quota: &Quota) -> Result<Vec<SplitPlan>> {
    let groups = by_centre(subjects, quota)?;
    let perms = role_permutations(quota);
    let k = groups.len();
    let total = perms.len().checked_pow(k as u32).ok_or_else(|| {
        Error::invalid("too many folds to enumerate")
    })?;
    let mut out = Vec::with_capacity(total);
    for fold in 0..total {
        let mut rest = fold;
        let mut choice = vec![0usize; k];
        for c in (0..k).rev() {
            choice[c] = rest % perms.len();
            rest /= perms.len();
        }
        let refs: Vec<&[Role]> = choice.iter().map(|&i| perms[i].as_slice()).collect();
        out.push(plan(fold, &groups, &refs));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn subjects(centres: usize, per: usize) -> Vec<Subject> {
        (0..centres)
            .flat_map(|c| {
                (0..per).map(move |s| Subject {
                    subject_id: format!("c{c}s{s}"),
                    centre: format!("centre{c}"),
                })
            })
            .collect()
    }

    #[test]
    fn fifteen_subjects_split_nine_three_three() {
        let p = stratified_split(&subjects(3, 5), &Quota::default(), 1).unwrap();
        assert_eq!(p.subjects(Role::Train).len(), 9);
        assert_eq!(p.subjects(Role::Validation).len(), 3);
        assert_eq!(p.subjects(Role::Test).len(), 3);
        assert_eq!(p, stratified_split(&subjects(3, 5), &Quota::default(), 1).unwrap());
    }

    #[test]
    fn folds_are_complete_and_distinct() {
        let folds = enumerate_folds(&subjects(3, 5), &Quota::default()).unwrap();
        assert_eq!(folds.len(), 8000);
        let distinct: HashSet<_> = folds.iter().map(|f| f.assignments.clone()).collect();
        assert_eq!(distinct.len(), 8000);
        for f in &folds {
            for c in 0..3 {
                let centre = format!("centre{c}");
                let count = |role| {
                    f.assignments
                        .iter()
                        .filter(|a| a.centre == centre && a.role == role)
                        .count()
                };
                assert_eq!((count(Role::Train), count(Role::Validation), count(Role::Test)), (3, 1, 1));
            }
        }
    }

    #[test]
    fn wrong_count_names_the_centre() {
        let mut s = subjects(2, 5);
        s.pop();
        let err = enumerate_folds(&s, &Quota::default()).unwrap_err().to_string();
        assert!(err.contains("centre1"), "{err}");
    }

    #[test]
    fn manifest_header_is_checked() {
        let ok = "subject_id,centre\na,x\nb,y\n";
        assert_eq!(read_manifest(ok.as_bytes()).unwrap().len(), 2);
        assert!(read_manifest("id,centre\na,x\n".as_bytes()).is_err());
        assert!(read_manifest("subject_id,centre\na,x\na,y\n".as_bytes()).is_err());
    }
}
