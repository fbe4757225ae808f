//! Study configuration, the grasp-score objective and report tables.

use crate::dynamics::WorldConfig;
use crate::optimizer::{Dependency, Dimension, OptimizeConfig, SearchSpace, StudyRecord, TpeConfig};
use crate::scenario::{
    evaluate, measure_grasp_force, Evaluation, ObjectSpec, ProtocolConfig, SimConfig,
    SimulationError, CATALOG_NAMES,
};
use crate::transmission::{DesignParams, DesignParamsMm, TransmissionConfig, PARAM_BOUNDS, PARAM_NAMES};
use serde::{Deserialize, Serialize};

/// Spacer widths of the grasp-force table (mm).
pub const GRASP_FORCE_WIDTHS_MM: [f64; 5] = [10.0, 20.0, 30.0, 50.0, 70.0];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct StudyConfigError(pub String);

/// Search bounds in the units of the design table, `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpaceBoundsMm {
    pub dp_length_mm: [f64; 2],
    pub pp_length_mm: [f64; 2],
    pub mp_spacing_mm: [f64; 2],
    pub ip_pulley_radius_mm: [f64; 2],
    pub ip_moment_arm_mm: [f64; 2],
    pub mp_moment_arm_mm: [f64; 2],
    pub slider_stiffness_n_per_mm: [f64; 2],
    pub slider_pretension_n: [f64; 2],
    /// The pulley radius stays this far below the IP moment arm.
    pub pulley_margin_mm: f64,
}

/// Factors from SI to the table units, in vector order.
const TO_TABLE_UNITS: [f64; 8] = [1e3, 1e3, 1e3, 1e3, 1e3, 1e3, 1e-3, 1.0];

impl Default for SpaceBoundsMm {
    fn default() -> Self {
        let b: [[f64; 2]; 8] =
            std::array::from_fn(|i| [PARAM_BOUNDS[i].0 * TO_TABLE_UNITS[i], PARAM_BOUNDS[i].1 * TO_TABLE_UNITS[i]]);
        Self {
            dp_length_mm: b[0],
            pp_length_mm: b[1],
            mp_spacing_mm: b[2],
            ip_pulley_radius_mm: b[3],
            ip_moment_arm_mm: b[4],
            mp_moment_arm_mm: b[5],
            slider_stiffness_n_per_mm: b[6],
            slider_pretension_n: b[7],
            pulley_margin_mm: 1.0,
        }
    }
}

impl SpaceBoundsMm {
    fn as_array(&self) -> [[f64; 2]; 8] {
        [
            self.dp_length_mm,
            self.pp_length_mm,
            self.mp_spacing_mm,
            self.ip_pulley_radius_mm,
            self.ip_moment_arm_mm,
            self.mp_moment_arm_mm,
            self.slider_stiffness_n_per_mm,
            self.slider_pretension_n,
        ]
    }

    pub fn to_space(&self) -> SearchSpace {
        SearchSpace {
            dims: self
                .as_array()
                .iter()
                .enumerate()
                .map(|(i, [lo, hi])| Dimension {
                    name: PARAM_NAMES[i].to_string(),
                    lower: lo / TO_TABLE_UNITS[i],
                    upper: hi / TO_TABLE_UNITS[i],
                })
                .collect(),
            dependency: Some(Dependency {
                dim: 3,
                on: 4,
                margin: self.pulley_margin_mm * 1e-3,
            }),
        }
    }

    /// Bounds must lie inside the admissible design box, and the pulley
    /// margin may not be below the one the transmission assumes.
    pub fn validate(&self) -> Result<(), StudyConfigError> {
        let keys = [
            "dp_length_mm",
            "pp_length_mm",
            "mp_spacing_mm",
            "ip_pulley_radius_mm",
            "ip_moment_arm_mm",
            "mp_moment_arm_mm",
            "slider_stiffness_n_per_mm",
            "slider_pretension_n",
        ];
        for (i, [lo, hi]) in self.as_array().iter().enumerate() {
            let (min, max) = (PARAM_BOUNDS[i].0 * TO_TABLE_UNITS[i], PARAM_BOUNDS[i].1 * TO_TABLE_UNITS[i]);
            let tol = 1e-9 * max.abs();
            if !(lo < hi) || *lo < min - tol || *hi > max + tol {
                return Err(StudyConfigError(format!(
                    "space.{}: [{lo}, {hi}] must be increasing and inside [{min}, {max}]",
                    keys[i]
                )));
            }
        }
        if !(self.pulley_margin_mm >= 1.0) {
            return Err(StudyConfigError("space.pulley_margin_mm must be at least 1".into()));
        }
        self.to_space()
            .validate()
            .map_err(|e| StudyConfigError(format!("space: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub n_iter: usize,
    pub seed: u64,
    pub parallelism: usize,
    /// Trials per object and design.
    pub m: usize,
    /// Names from the standard object catalog.
    pub objects: Vec<String>,
    pub space: SpaceBoundsMm,
    pub tpe: TpeConfig,
    pub protocol: ProtocolConfig,
    pub world: WorldConfig,
    pub transmission: TransmissionConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            n_iter: 2000,
            seed: 0,
            parallelism: 1,
            m: 4,
            objects: CATALOG_NAMES.iter().map(|s| s.to_string()).collect(),
            space: SpaceBoundsMm::default(),
            tpe: TpeConfig::default(),
            protocol: ProtocolConfig::default(),
            world: WorldConfig::default(),
            transmission: TransmissionConfig::default(),
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<(), StudyConfigError> {
        let err = |m: String| Err(StudyConfigError(m));
        if self.n_iter < 1 {
            return err("n_iter must be at least 1".into());
        }
        if self.parallelism < 1 {
            return err("parallelism must be at least 1".into());
        }
        if self.m < 1 {
            return err("m must be at least 1".into());
        }
        if self.objects.is_empty() {
            return err("objects must not be empty".into());
        }
        for name in &self.objects {
            if ObjectSpec::by_name(name).is_none() {
                return err(format!(
                    "unknown object {name:?}; known objects: {}",
                    CATALOG_NAMES.join(", ")
                ));
            }
        }
        self.space.validate()?;
        self.tpe.validate().map_err(|e| StudyConfigError(e.to_string()))?;
        // The stiffest slider in the space is the hardest case for the
        // tendon stiffness check.
        let mut probe = DesignParams::table_optimum();
        probe.slider_stiffness = self.space.slider_stiffness_n_per_mm[1] * 1e3;
        self.sim().validate(&probe).map_err(|e| StudyConfigError(e.to_string()))
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            protocol: self.protocol,
            world: self.world,
            transmission: self.transmission,
        }
    }

    pub fn catalog(&self) -> Vec<ObjectSpec> {
        self.objects
            .iter()
            .map(|n| ObjectSpec::by_name(n).expect("validated object name"))
            .collect()
    }

    pub fn optimize_config(&self) -> OptimizeConfig {
        OptimizeConfig {
            n_iter: self.n_iter,
            seed: self.seed,
            parallelism: self.parallelism,
            tpe: self.tpe,
        }
    }

    /// Grasp score of a design over the configured catalog.
    pub fn objective(&self) -> impl Fn(&DesignParams, u64) -> Result<Evaluation, String> + Sync {
        let catalog = self.catalog();
        let sim = self.sim();
        let m = self.m;
        move |params: &DesignParams, seed: u64| {
            params.validate().map_err(|e| e.to_string())?;
            Ok(evaluate(params, &catalog, m, seed, &sim))
        }
    }
}

/// Summary of the best trial of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestReport {
    pub index: usize,
    pub score: f64,
    pub params: DesignParams,
    pub params_table_units: DesignParamsMm,
    pub per_object_h: Vec<(String, f64)>,
}

impl BestReport {
    /// `objects` names the entries of `per_object_h`; unnamed heights are
    /// dropped.
    pub fn from_study(study: &StudyRecord, objects: &[String]) -> Option<Self> {
        let best = study.best()?;
        Some(Self {
            index: best.index,
            score: best.score,
            params: best.params,
            params_table_units: best.params.into(),
            per_object_h: objects.iter().cloned().zip(best.per_object_h.iter().copied()).collect(),
        })
    }
}

/// Score and best score so far per iteration.
pub fn report_csv(study: &StudyRecord) -> String {
    let mut out = String::from("iteration,score,best-so-far\n");
    for (t, best) in study.trials().iter().zip(study.best_curve()) {
        out.push_str(&format!("{},{},{}\n", t.index, t.score, best));
    }
    out
}

/// Steady squeeze force against spacer width for one design.
pub fn grasp_force_csv(params: &DesignParams, sim: &SimConfig) -> Result<String, SimulationError> {
    let mut out = String::from("width_mm,force_n\n");
    for w in GRASP_FORCE_WIDTHS_MM {
        let f = measure_grasp_force(params, w * 1e-3, sim)?;
        out.push_str(&format!("{w},{f}\n"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bounds_match_design_box() {
        let s = SpaceBoundsMm::default();
        assert_eq!(s.dp_length_mm, [40.0, 80.0]);
        assert_eq!(s.slider_stiffness_n_per_mm, [0.02, 5.0]);
        let space = s.to_space();
        assert_eq!(space, SearchSpace::table());
        s.validate().unwrap();
    }

    #[test]
    fn default_config_is_valid() {
        StudyConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = StudyConfig::default();
        c.objects = vec!["sphere".into()];
        let e = c.validate().unwrap_err().0;
        assert!(e.contains("box_50x10") && e.contains("cyl_80"), "{e}");
        let mut c = StudyConfig::default();
        c.space.dp_length_mm = [30.0, 80.0];
        assert!(c.validate().is_err());
        let mut c = StudyConfig::default();
        c.m = 0;
        assert!(c.validate().is_err());
        let mut c = StudyConfig::default();
        c.protocol.lift_speed = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn objective_rejects_invalid_designs() {
        let c = StudyConfig {
            objects: vec!["box_50x10".into()],
            m: 1,
            ..StudyConfig::default()
        };
        let mut p = DesignParams::table_optimum();
        p.ip_pulley_radius = p.ip_moment_arm;
        assert!(c.objective()(&p, 0).is_err());
    }

    #[test]
    fn report_has_one_row_per_trial() {
        let mut s = StudyRecord::new();
        for (i, score) in [1.5, 1.2, 2.0].iter().enumerate() {
            s.tell(crate::optimizer::Trial {
                index: i,
                params: DesignParams::table_optimum(),
                per_object_h: vec![],
                score: *score,
                seed: 0,
                wall_ms: 0,
            })
            .unwrap();
        }
        assert_eq!(report_csv(&s), "iteration,score,best-so-far\n0,1.5,1.5\n1,1.2,1.5\n2,2,2\n");
    }
}
