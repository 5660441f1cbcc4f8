//! Refinement objective backed by an external scoring service.
//!
//! The service owns the heavy model; this client only ships the combined
//! sample cloud out and chains the returned per-point gradients to control
//! points. Wire contract:
//!
//! request (POST, JSON):
//!   {"points": [[x,y,z],...], "unfrozen_range": [start,end),
//!    "image_ref": "...", "step": n}
//!
//! response (JSON):
//!   {"grads": [[gx,gy,gz],...]}   with one gradient per unfrozen point
//!   (an optional "value" field is echoed into telemetry when present)
//!
//! Service failures surface as errors; there is no silent fallback.

use std::ops::Range;
use std::time::Duration;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::refine::{ObjectiveEval, RefinementObjective};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Serialize)]
struct GradientRequest<'a> {
    points: &'a [[f64; 3]],
    unfrozen_range: [usize; 2],
    image_ref: &'a str,
    step: usize,
}

#[derive(Debug, Deserialize)]
struct GradientResponse {
    grads: Vec<[f64; 3]>,
    #[serde(default)]
    value: Option<f64>,
}

pub struct SdsObjective {
    endpoint: String,
    image_ref: String,
    agent: ureq::Agent,
}

impl SdsObjective {
    pub fn new(endpoint: impl Into<String>, image_ref: impl Into<String>, timeout: Duration) -> SdsObjective {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        SdsObjective {
            endpoint: endpoint.into(),
            image_ref: image_ref.into(),
            agent,
        }
    }
}

impl RefinementObjective for SdsObjective {
    fn value_and_grad(
        &mut self,
        points: &[Point3<f64>],
        unfrozen: Range<usize>,
        step: usize,
    ) -> Result<ObjectiveEval> {
        let raw: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let request = GradientRequest {
            points: &raw,
            unfrozen_range: [unfrozen.start, unfrozen.end],
            image_ref: &self.image_ref,
            step,
        };
        let response = self
            .agent
            .post(&self.endpoint)
            .send_json(&request)
            .map_err(|e| Error::Service {
                msg: format!("gradient service request failed: {e}"),
            })?;
        let parsed: GradientResponse = response.into_json().map_err(|e| Error::Service {
            msg: format!("malformed gradient service response: {e}"),
        })?;
        if parsed.grads.len() != unfrozen.len() {
            return Err(Error::GradientCount {
                expected: unfrozen.len(),
                got: parsed.grads.len(),
            });
        }
        Ok(ObjectiveEval {
            value: parsed.value.unwrap_or(0.0),
            point_grads: parsed
                .grads
                .iter()
                .map(|g| Vector3::new(g[0], g[1], g[2]))
                .collect(),
        })
    }
}
