use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use super::{read_trajectory, Episode, Manifest, MANIFEST_VERSION};
use crate::error::{Error, Result};
use crate::io::write_atomic;

/// Reads a manifest, validates the schema and checks that every trajectory
/// file exists with one column per joint.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?;
    validate_manifest(&manifest)?;
    let root = path.parent().unwrap_or(Path::new("."));
    for ep in &manifest.episodes {
        read_trajectory(&root.join(&ep.trajectory_path), Some(ep.dof as usize)).map_err(|e| {
            if e.is_io() {
                e
            } else {
                Error::episode(&ep.id, format!("trajectory_path: {e}"))
            }
        })?;
    }
    Ok(manifest)
}

/// Canonical text: pretty JSON with keys sorted at every level, trailing newline.
pub fn to_canonical_string(manifest: &Manifest) -> Result<String> {
    // serde_json::Map is a BTreeMap here, so going through Value sorts keys.
    let value = serde_json::to_value(manifest).map_err(|e| Error::parse("manifest", e))?;
    let mut text = serde_json::to_string_pretty(&value).map_err(|e| Error::parse("manifest", e))?;
    text.push('\n');
    Ok(text)
}

pub fn save_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    write_atomic(path, to_canonical_string(manifest)?.as_bytes())
}

fn check_episode(ep: &Episode) -> Result<()> {
    let fail = |m: &str| Err(Error::episode(&ep.id, m));
    if ep.id.is_empty() {
        return Err(Error::Validation("episode id must be non-empty".into()));
    }
    if ep.dof != 7 && ep.dof != 14 {
        return fail("dof must be 7 or 14");
    }
    if !(ep.duration_s.is_finite() && ep.duration_s >= 0.0) {
        return fail("duration_s must be a finite value >= 0");
    }
    for (field, p) in [("trajectory_path", &ep.trajectory_path), ("frame_dir", &ep.frame_dir)] {
        if p.is_empty() || Path::new(p).is_absolute() {
            return fail(&format!("{field} must be a non-empty relative path"));
        }
    }
    let l = &ep.labels;
    if let Some(s) = l.eg_score {
        if !(1..=10).contains(&s) {
            return fail("eg_score must lie in [1,10]");
        }
    }
    if let Some(s) = l.rg_score {
        if !(s.is_finite() && (0.0..=10.0).contains(&s)) {
            return fail("rg_score must lie in [0,10]");
        }
    }
    match (l.expert_rank, &l.rank_batch) {
        (Some(0), _) => return fail("expert_rank must be a positive integer"),
        (Some(_), None) => return fail("expert_rank requires rank_batch"),
        (None, Some(_)) => return fail("rank_batch requires expert_rank"),
        _ => {}
    }
    Ok(())
}

/// Schema checks that need no filesystem access.
pub fn validate_manifest(m: &Manifest) -> Result<()> {
    if m.version != MANIFEST_VERSION {
        return Err(Error::Validation(format!(
            "unsupported manifest version {:?}, expected {MANIFEST_VERSION:?}",
            m.version
        )));
    }
    let mut seen = HashSet::new();
    let mut batches: BTreeMap<&str, Vec<(u32, &str)>> = BTreeMap::new();
    for ep in &m.episodes {
        check_episode(ep)?;
        if !seen.insert(ep.id.as_str()) {
            return Err(Error::episode(&ep.id, "duplicate episode id"));
        }
        if let (Some(rank), Some(batch)) = (ep.labels.expert_rank, &ep.labels.rank_batch) {
            batches.entry(batch).or_default().push((rank, ep.id.as_str()));
        }
    }
    for (batch, mut members) in batches {
        members.sort();
        for (expected, (rank, id)) in (1..).zip(&members) {
            if *rank != expected {
                return Err(Error::episode(
                    *id,
                    format!(
                        "expert ranks in batch {batch:?} must be a permutation of 1..{}",
                        members.len()
                    ),
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{write_trajectory, LabelSet, Source};
    use crate::kinematics::JointTrajectory;

    fn episode(id: &str) -> Episode {
        Episode {
            id: id.into(),
            task_description: "stack the bowls".into(),
            dof: 7,
            trajectory_path: format!("traj/{id}.csv"),
            frame_dir: format!("frames/{id}"),
            views: vec!["wrist".into()],
            success: true,
            collision: false,
            source: Source::Policy,
            duration_s: 3.0,
            labels: LabelSet {
                eg_score: Some(7),
                ..Default::default()
            },
        }
    }

    fn write_dir(episodes: Vec<Episode>) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("traj")).unwrap();
        let q = JointTrajectory::from_rows(&vec![vec![0.0; 7]; 4]).unwrap();
        for ep in &episodes {
            write_trajectory(&dir.path().join(&ep.trajectory_path), &q).unwrap();
        }
        let path = dir.path().join("manifest.json");
        save_manifest(&path, &Manifest::new(episodes)).unwrap();
        (dir, path)
    }

    #[test]
    fn loads_valid_manifest() {
        let (_d, path) = write_dir(vec![episode("ep0"), episode("ep1")]);
        assert_eq!(load_manifest(&path).unwrap().episodes.len(), 2);
    }

    #[test]
    fn duplicate_id_is_named() {
        let (_d, path) = write_dir(vec![episode("ep1"), episode("ep1")]);
        let err = load_manifest(&path).unwrap_err().to_string();
        assert!(err.contains("ep1") && err.contains("duplicate"), "{err}");
    }

    #[test]
    fn bad_dof_is_named() {
        let mut ep = episode("ep7");
        ep.dof = 6;
        let err = validate_manifest(&Manifest::new(vec![ep])).unwrap_err().to_string();
        assert!(err.contains("ep7") && err.contains("dof must be 7 or 14"), "{err}");
    }

    #[test]
    fn trajectory_width_must_match_dof() {
        let mut ep = episode("wide");
        ep.dof = 14;
        let (_d, path) = write_dir(vec![ep]);
        let err = load_manifest(&path).unwrap_err().to_string();
        assert!(err.contains("wide") && err.contains("dof is 14"), "{err}");
    }

    #[test]
    fn label_ranges() {
        let mut ep = episode("a");
        ep.labels.eg_score = Some(11);
        assert!(validate_manifest(&Manifest::new(vec![ep])).is_err());
        let mut ep = episode("b");
        ep.labels.rg_score = Some(-0.1);
        assert!(validate_manifest(&Manifest::new(vec![ep])).is_err());
        let mut ep = episode("c");
        ep.duration_s = -1.0;
        assert!(validate_manifest(&Manifest::new(vec![ep])).is_err());
    }

    #[test]
    fn rank_batches_must_be_permutations() {
        let mut a = episode("a");
        let mut b = episode("b");
        a.labels.rank_batch = Some("x".into());
        b.labels.rank_batch = Some("x".into());
        a.labels.expert_rank = Some(1);
        b.labels.expert_rank = Some(3);
        let err = validate_manifest(&Manifest::new(vec![a.clone(), b.clone()])).unwrap_err();
        assert!(err.to_string().contains("permutation"));
        b.labels.expert_rank = Some(2);
        validate_manifest(&Manifest::new(vec![a, b])).unwrap();
    }

    #[test]
    fn malformed_file_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(&path, "{ not json").unwrap();
        assert!(matches!(load_manifest(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn canonical_save_is_byte_stable() {
        let (_d, path) = write_dir(vec![episode("ep0"), episode("ep1")]);
        let first = fs::read(&path).unwrap();
        let m = load_manifest(&path).unwrap();
        save_manifest(&path, &m).unwrap();
        assert_eq!(first, fs::read(&path).unwrap());
    }
}
