//! Six-classifier ensemble fusion.
//!
//! The two classifiers of the preferred orientation (axial by default) are
//! merged with a ternary union. The four remaining classifiers then vote
//! voxel by voxel: first on Lesion, then on Uncertainty using the volume
//! produced by the Lesion pass. An unconfirmed voxel drops exactly one
//! class.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Geometry, Label, LabelVolume, Mask, Orientation, Volume};

/// Training focus of a classifier: lesions from inside or from outside.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Focus {
    Lesion,
    Background,
}

impl Focus {
    pub const ALL: [Focus; 2] = [Focus::Lesion, Focus::Background];

    /// Short name used in file names and CLI flags.
    pub fn tag(self) -> &'static str {
        match self {
            Focus::Lesion => "in",
            Focus::Background => "out",
        }
    }
}

/// The outputs of the six directional classifiers for one subject.
#[derive(Clone, Debug)]
pub struct ClassifierBundle {
    volumes: Vec<LabelVolume>,
}

fn slot(o: Orientation, f: Focus) -> usize {
    let oi = match o {
        Orientation::Axial => 0,
        Orientation::Coronal => 1,
        Orientation::Sagittal => 2,
    };
    oi * 2 + (f == Focus::Background) as usize
}

impl ClassifierBundle {
    pub fn from_fn(mut f: impl FnMut(Orientation, Focus) -> Result<LabelVolume>) -> Result<Self> {
        let mut volumes = Vec::with_capacity(6);
        for o in Orientation::ALL {
            for focus in Focus::ALL {
                volumes.push(f(o, focus)?);
            }
        }
        let g = *volumes[0].geometry();
        for (i, v) in volumes.iter().enumerate().skip(1) {
            g.ensure_same(v.geometry(), &format!("classifier volume {i}"))?;
        }
        Ok(ClassifierBundle { volumes })
    }

    /// Every classifier reports the same volume.
    pub fn unanimous(v: &LabelVolume) -> Self {
        ClassifierBundle {
            volumes: vec![v.clone(); 6],
        }
    }

    pub fn get(&self, o: Orientation, f: Focus) -> &LabelVolume {
        &self.volumes[slot(o, f)]
    }

    pub fn geometry(&self) -> &Geometry {
        self.volumes[0].geometry()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Orientation, Focus, &LabelVolume)> {
        Orientation::ALL
            .into_iter()
            .flat_map(|o| Focus::ALL.into_iter().map(move |f| (o, f)))
            .map(|(o, f)| (o, f, self.get(o, f)))
    }

    /// The four classifiers outside the preferred orientation.
    pub fn confirmers(&self, preferred: Orientation) -> [&LabelVolume; 4] {
        let mut others = Orientation::ALL.into_iter().filter(|&o| o != preferred);
        let a = others.next().unwrap();
        let b = others.next().unwrap();
        [
            self.get(a, Focus::Lesion),
            self.get(a, Focus::Background),
            self.get(b, Focus::Lesion),
            self.get(b, Focus::Background),
        ]
    }
}

/// What counts as a confirming vote for an ordered class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfirmationRule {
    /// A confirmer votes for class `c` when its label is at least `c`.
    #[default]
    Ordered,
    /// A confirmer votes for class `c` only when its label equals `c`.
    Strict,
}

impl ConfirmationRule {
    #[inline]
    pub fn confirms(self, vote: Label, target: Label) -> bool {
        match self {
            ConfirmationRule::Ordered => vote >= target,
            ConfirmationRule::Strict => vote == target,
        }
    }
}

impl fmt::Display for ConfirmationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConfirmationRule::Ordered => "ordered",
            ConfirmationRule::Strict => "strict",
        })
    }
}

impl FromStr for ConfirmationRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ordered" => Ok(ConfirmationRule::Ordered),
            "strict" => Ok(ConfirmationRule::Strict),
            other => Err(Error::invalid(format!("unknown confirmation rule '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionConfig {
    /// Confirmations needed to keep a class, in `1..=4`.
    pub min_votes: usize,
    pub rule: ConfirmationRule,
    /// Let a voxel downgraded in the Lesion pass drop again in the
    /// Uncertainty pass.
    pub allow_double_downgrade: bool,
    /// Orientation whose two classifiers are united; the others confirm.
    pub preferred: Orientation,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            min_votes: 2,
            rule: ConfirmationRule::Ordered,
            allow_double_downgrade: false,
            preferred: Orientation::Axial,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.min_votes) {
            return Err(Error::invalid(format!(
                "min_votes {} must lie in 1..=4",
                self.min_votes
            )));
        }
        Ok(())
    }
}

/// Pointwise maximum under `Background < Uncertainty < Lesion`.
pub fn ternary_union(a: &LabelVolume, b: &LabelVolume) -> Result<LabelVolume> {
    a.zip_map(b, Label::max)
}

/// One majority-vote pass over voxels currently labelled `target`.
///
/// Returns the updated volume and the voxels this pass downgraded. Voxels
/// in `frozen` are left untouched.
pub fn confirmation_pass(
    current: &LabelVolume,
    confirmers: [&LabelVolume; 4],
    target: Label,
    cfg: &FusionConfig,
    frozen: Option<&Mask>,
) -> Result<(LabelVolume, Mask)> {
    if target == Label::Background {
        return Err(Error::invalid("confirmation target must be Lesion or Uncertainty"));
    }
    cfg.validate()?;
    let g = current.geometry();
    for (i, c) in confirmers.iter().enumerate() {
        g.ensure_same(c.geometry(), &format!("confirmer {i}"))?;
    }
    if let Some(f) = frozen {
        g.ensure_same(f.geometry(), "frozen set")?;
    }

    let mut out = current.data().to_vec();
    let mut downgraded = vec![false; out.len()];
    for (i, label) in out.iter_mut().enumerate() {
        if *label != target || frozen.is_some_and(|f| f.data()[i]) {
            continue;
        }
        let votes = confirmers
            .iter()
            .filter(|c| cfg.rule.confirms(c.data()[i], target))
            .count();
        if votes < cfg.min_votes {
            *label = label.downgrade();
            downgraded[i] = true;
        }
    }
    Ok((Volume::new(*g, out)?, Volume::new(*g, downgraded)?))
}

/// Intermediate volumes of a fusion run.
#[derive(Clone, Debug)]
pub struct FusionTrace {
    pub union: LabelVolume,
    pub after_lesion_pass: LabelVolume,
    pub lesion_downgraded: Mask,
    pub fused: LabelVolume,
}

pub fn fuse(bundle: &ClassifierBundle, cfg: &FusionConfig) -> Result<LabelVolume> {
    fuse_traced(bundle, cfg).map(|t| t.fused)
}

pub fn fuse_traced(bundle: &ClassifierBundle, cfg: &FusionConfig) -> Result<FusionTrace> {
    cfg.validate()?;
    let union = ternary_union(
        bundle.get(cfg.preferred, Focus::Lesion),
        bundle.get(cfg.preferred, Focus::Background),
    )?;
    let confirmers = bundle.confirmers(cfg.preferred);
    let (after_lesion_pass, lesion_downgraded) =
        confirmation_pass(&union, confirmers, Label::Lesion, cfg, None)?;
    let frozen = (!cfg.allow_double_downgrade).then_some(&lesion_downgraded);
    let (fused, _) =
        confirmation_pass(&after_lesion_pass, confirmers, Label::Uncertainty, cfg, frozen)?;
    Ok(FusionTrace {
        union,
        after_lesion_pass,
        lesion_downgraded,
        fused,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Background as B, Lesion as L, Uncertainty as U};

    fn vox(l: Label) -> LabelVolume {
        LabelVolume::filled(Geometry::with_dims([1, 1, 1]).unwrap(), l)
    }

    fn bundle(axial: [Label; 2], confirmers: [Label; 4]) -> ClassifierBundle {
        ClassifierBundle::from_fn(|o, f| {
            Ok(vox(match (o, f) {
                (Orientation::Axial, Focus::Lesion) => axial[0],
                (Orientation::Axial, Focus::Background) => axial[1],
                (Orientation::Coronal, Focus::Lesion) => confirmers[0],
                (Orientation::Coronal, Focus::Background) => confirmers[1],
                (Orientation::Sagittal, Focus::Lesion) => confirmers[2],
                (Orientation::Sagittal, Focus::Background) => confirmers[3],
            }))
        })
        .unwrap()
    }

    fn pass(current: Label, votes: [Label; 4], target: Label, rule: ConfirmationRule) -> Label {
        let cfg = FusionConfig {
            rule,
            ..FusionConfig::default()
        };
        let vs = votes.map(vox);
        let refs = [&vs[0], &vs[1], &vs[2], &vs[3]];
        confirmation_pass(&vox(current), refs, target, &cfg, None)
            .unwrap()
            .0
            .data()[0]
    }

    #[test]
    fn union_table() {
        assert_eq!(ternary_union(&vox(L), &vox(B)).unwrap().data()[0], L);
        assert_eq!(ternary_union(&vox(U), &vox(B)).unwrap().data()[0], U);
        assert_eq!(ternary_union(&vox(B), &vox(B)).unwrap().data()[0], B);
    }

    #[test]
    fn union_rejects_mismatched_dims() {
        let a = LabelVolume::filled(Geometry::with_dims([2, 1, 1]).unwrap(), B);
        assert!(ternary_union(&a, &vox(B)).is_err());
    }

    #[test]
    fn lesion_pass_examples() {
        let o = ConfirmationRule::Ordered;
        assert_eq!(pass(L, [L, L, B, B], L, o), L);
        assert_eq!(pass(L, [L, B, B, B], L, o), U);
    }

    #[test]
    fn uncertainty_pass_rules_differ() {
        assert_eq!(pass(U, [U, L, B, B], U, ConfirmationRule::Ordered), U);
        assert_eq!(pass(U, [U, L, B, B], U, ConfirmationRule::Strict), B);
    }

    #[test]
    fn pass_leaves_other_classes_alone() {
        assert_eq!(pass(U, [B, B, B, B], L, ConfirmationRule::Ordered), U);
        assert_eq!(pass(B, [B, B, B, B], U, ConfirmationRule::Ordered), B);
    }

    #[test]
    fn background_target_is_rejected() {
        let v = vox(B);
        let cfg = FusionConfig::default();
        assert!(confirmation_pass(&v, [&v, &v, &v, &v], B, &cfg, None).is_err());
    }

    #[test]
    fn fuse_examples() {
        let cfg = FusionConfig::default();
        let f = |a, c| fuse(&bundle(a, c), &cfg).unwrap().data()[0];
        assert_eq!(f([L, B], [L, B, L, U]), L);
        assert_eq!(f([L, B], [B, B, B, U]), U);
        assert_eq!(f([U, U], [B, B, B, B]), B);
    }

    #[test]
    fn double_downgrade_flag() {
        let cfg = FusionConfig {
            allow_double_downgrade: true,
            ..FusionConfig::default()
        };
        let b = bundle([L, B], [B, B, B, U]);
        assert_eq!(fuse(&b, &cfg).unwrap().data()[0], B);
    }

    #[test]
    fn unanimous_bundle_is_fixed_point() {
        let g = Geometry::with_dims([3, 2, 2]).unwrap();
        let v = LabelVolume::from_fn(g, |[x, y, z]| Label::from_code(((x + y + z) % 3) as u8).unwrap())
            .unwrap();
        assert_eq!(fuse(&ClassifierBundle::unanimous(&v), &FusionConfig::default()).unwrap(), v);
    }

    #[test]
    fn preferred_orientation_swaps_roles() {
        let cfg = FusionConfig {
            preferred: Orientation::Coronal,
            ..FusionConfig::default()
        };
        // coronal pair (L, B); axial pair and sagittal pair vote.
        let b = bundle([L, L], [L, B, B, B]);
        assert_eq!(fuse(&b, &cfg).unwrap().data()[0], L);
    }

    #[test]
    fn min_votes_is_validated() {
        let cfg = FusionConfig {
            min_votes: 5,
            ..FusionConfig::default()
        };
        assert!(fuse(&bundle([L, L], [L, L, L, L]), &cfg).is_err());
    }
}
