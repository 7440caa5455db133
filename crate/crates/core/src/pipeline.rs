//! RANSAC initialization followed by annealed refinement.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{Camera, Correspondence, LandmarkSet, Pose};
use crate::pnp::{ransac_pnp, RansacConfig, RansacResult};
use crate::refine::{sa_lmpe, AnnealSchedule, RefineResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub ransac: RansacResult,
    pub refined: RefineResult,
    /// Input positions of the correspondences marked visible; refinement
    /// indices refer to this list.
    pub visible_indices: Vec<usize>,
}

impl Estimate {
    pub fn initial_pose(&self) -> Pose {
        self.ransac.pose
    }

    pub fn pose(&self) -> Pose {
        self.refined.pose
    }

    /// Input positions of the correspondences pruned during refinement.
    pub fn removed(&self) -> Vec<usize> {
        self.refined
            .removed_indices(self.visible_indices.len())
            .into_iter()
            .map(|k| self.visible_indices[k])
            .collect()
    }

    /// Input positions of the correspondences that survived refinement.
    pub fn surviving(&self) -> Vec<usize> {
        self.refined
            .surviving_indices
            .iter()
            .map(|&k| self.visible_indices[k])
            .collect()
    }
}

/// Full estimate. Refinement starts from the RANSAC pose but sees every
/// visible correspondence, not only the consensus set.
pub fn estimate(
    correspondences: &[Correspondence],
    landmarks: &LandmarkSet,
    camera: &Camera,
    ransac: &RansacConfig,
    schedule: &AnnealSchedule,
) -> Result<Estimate> {
    schedule.validate()?;
    let init = ransac_pnp(correspondences, landmarks, camera, ransac)?;
    let visible_indices: Vec<usize> = (0..correspondences.len())
        .filter(|&i| correspondences[i].visible)
        .collect();
    let visible: Vec<Correspondence> = visible_indices.iter().map(|&i| correspondences[i]).collect();
    let refined = sa_lmpe(&visible, landmarks, camera, &init.pose, schedule)?;
    Ok(Estimate {
        ransac: init,
        refined,
        visible_indices,
    })
}
