//! Deterministic synthetic workloads shaped like perception, localization,
//! control and manipulation stages, plus the reference benchmark suite.

pub mod kernels;
mod reference;

pub use reference::{reference_graphs, ReferenceBenchmark, REFERENCE_LOG_FILE};

use bytes::Bytes;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock;
use crate::envelope::MessageEnvelope;
use crate::par::ExecMode;
use crate::pubsub::{CallbackContext, CallbackError, NodeDescriptor, SubscriptionSpec, TopicId};
use kernels::{PidLoop, RectifyMap};

#[derive(Debug, Error, PartialEq)]
pub enum WorkloadError {
    #[error("bad workload parameters: {0}")]
    BadParameters(String),
}

/// Kind and size parameters of a workload, as written in `benchmark.yaml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WorkloadKind {
    ImageRectify { width: usize, height: usize },
    ImageResize { width: usize, height: usize, scale: f64 },
    /// Two inputs; output is attributed to the primary input.
    Disparity { width: usize, height: usize, max_disparity: usize },
    PoseGraphStep { poses: usize, iterations: usize },
    PidStep { kp: f64, ki: f64, kd: f64, dt_s: f64 },
    JointTrajInterp { joints: usize, samples_per_segment: usize },
    IkIterative { links: usize, iterations: usize },
    FkChain { links: usize },
    /// Spins on the monotonic clock for the target duration.
    BusyLoop { duration_us: u64 },
    PassThrough,
    /// Forwards even ids and swallows odd ones.
    DropOdd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    pub seed: u64,
}

impl WorkloadSpec {
    pub fn new(kind: WorkloadKind, seed: u64) -> Self {
        WorkloadSpec { kind, seed }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |msg: &str| Err(WorkloadError::BadParameters(msg.to_owned()));
        let positive = |v: f64| v > 0.0 && v.is_finite();
        match self.kind {
            WorkloadKind::ImageRectify { width, height } if width == 0 || height == 0 => {
                bad("image dimensions must be positive")
            }
            WorkloadKind::ImageResize { width, height, scale } => {
                if width == 0 || height == 0 {
                    bad("image dimensions must be positive")
                } else if !positive(scale) {
                    bad("scale must be positive")
                } else {
                    Ok(())
                }
            }
            WorkloadKind::Disparity { width, height, max_disparity } => {
                if width == 0 || height == 0 || max_disparity == 0 {
                    bad("disparity sizes must be positive")
                } else {
                    Ok(())
                }
            }
            WorkloadKind::PoseGraphStep { poses, iterations } if poses < 2 || iterations == 0 => {
                bad("pose graph needs at least 2 poses and 1 iteration")
            }
            WorkloadKind::PidStep { dt_s, kp, ki, kd } => {
                if !positive(dt_s) {
                    bad("dt_s must be positive")
                } else if !(kp.is_finite() && ki.is_finite() && kd.is_finite()) {
                    bad("gains must be finite")
                } else {
                    Ok(())
                }
            }
            WorkloadKind::JointTrajInterp { joints, samples_per_segment }
                if joints == 0 || samples_per_segment == 0 =>
            {
                bad("joints and samples_per_segment must be positive")
            }
            WorkloadKind::IkIterative { links, iterations } if links == 0 || iterations == 0 => {
                bad("links and iterations must be positive")
            }
            WorkloadKind::FkChain { links: 0 } => bad("links must be positive"),
            WorkloadKind::BusyLoop { duration_us: 0 } => bad("duration must be positive"),
            _ => Ok(()),
        }
    }

    pub fn is_fan_in(&self) -> bool {
        matches!(self.kind, WorkloadKind::Disparity { .. })
    }

    /// A fresh kernel instance for this spec.
    pub fn kernel(&self, mode: ExecMode) -> Result<Box<dyn Kernel>, WorkloadError> {
        self.validate()?;
        let seed = self.seed;
        Ok(match self.kind.clone() {
            WorkloadKind::ImageRectify { width, height } => Box::new(Rectify {
                map: RectifyMap::new(width, height, seed),
                mode,
            }),
            WorkloadKind::ImageResize { width, height, scale } => Box::new(Resize {
                width,
                height,
                scale,
                mode,
            }),
            WorkloadKind::Disparity { width, height, max_disparity } => Box::new(Disparity {
                width,
                height,
                max_disparity,
                latest_secondary: vec![0; width * height],
                mode,
            }),
            WorkloadKind::PoseGraphStep { poses, iterations } => {
                Box::new(move |input: KernelInput<'_>| {
                    let odo = kernels::decode_f64s(input.payload, poses * 2);
                    Some(kernels::encode_f64s(&kernels::relax_pose_chain(&odo, poses, iterations)).into())
                })
            }
            WorkloadKind::PidStep { kp, ki, kd, dt_s } => {
                let mut pid = PidLoop::new(kp, ki, kd, dt_s);
                Box::new(move |input: KernelInput<'_>| {
                    let setpoint = kernels::decode_f64s(input.payload, 1)[0];
                    let (u, y) = pid.step(setpoint);
                    Some(kernels::encode_f64s(&[u, y]).into())
                })
            }
            WorkloadKind::JointTrajInterp { joints, samples_per_segment } => {
                Box::new(move |input: KernelInput<'_>| {
                    let n = (input.payload.len() / 8 / joints).max(2) * joints;
                    let wp = kernels::decode_f64s(input.payload, n);
                    Some(
                        kernels::encode_f64s(&kernels::interpolate_trajectory(&wp, joints, samples_per_segment))
                            .into(),
                    )
                })
            }
            WorkloadKind::IkIterative { links, iterations } => {
                let lengths = kernels::link_lengths(links, seed);
                Box::new(move |input: KernelInput<'_>| {
                    let t = kernels::decode_f64s(input.payload, 2);
                    Some(
                        kernels::encode_f64s(&kernels::inverse_kinematics((t[0], t[1]), &lengths, iterations))
                            .into(),
                    )
                })
            }
            WorkloadKind::FkChain { links } => {
                let lengths = kernels::link_lengths(links, seed);
                Box::new(move |input: KernelInput<'_>| {
                    let angles = kernels::decode_f64s(input.payload, links);
                    Some(kernels::encode_f64s(&kernels::forward_kinematics(&angles, &lengths)).into())
                })
            }
            WorkloadKind::BusyLoop { duration_us } => Box::new(move |input: KernelInput<'_>| {
                clock::spin_for(duration_us * 1_000);
                Some(input.payload.clone())
            }),
            WorkloadKind::PassThrough => {
                Box::new(|input: KernelInput<'_>| Some(input.payload.clone()))
            }
            WorkloadKind::DropOdd => Box::new(|input: KernelInput<'_>| {
                input.id.is_multiple_of(2).then(|| input.payload.clone())
            }),
        })
    }
}

/// One message as seen by a kernel.
#[derive(Debug, Clone, Copy)]
pub struct KernelInput<'a> {
    /// False only for non-primary inputs of fan-in kinds.
    pub primary: bool,
    pub id: u64,
    pub payload: &'a Bytes,
}

/// The computation of a workload node. `None` means no output for this input.
pub trait Kernel: Send {
    fn process(&mut self, input: KernelInput<'_>) -> Option<Bytes>;
}

impl<F> Kernel for F
where
    F: FnMut(KernelInput<'_>) -> Option<Bytes> + Send,
{
    fn process(&mut self, input: KernelInput<'_>) -> Option<Bytes> {
        self(input)
    }
}

struct Rectify {
    map: RectifyMap,
    mode: ExecMode,
}

impl Kernel for Rectify {
    fn process(&mut self, input: KernelInput<'_>) -> Option<Bytes> {
        let img = kernels::image_from_payload(input.payload, self.map.width, self.map.height);
        Some(self.map.apply(&img, self.mode).into())
    }
}

struct Resize {
    width: usize,
    height: usize,
    scale: f64,
    mode: ExecMode,
}

impl Kernel for Resize {
    fn process(&mut self, input: KernelInput<'_>) -> Option<Bytes> {
        let img = kernels::image_from_payload(input.payload, self.width, self.height);
        Some(kernels::resize(&img, self.width, self.height, self.scale, self.mode).into())
    }
}

struct Disparity {
    width: usize,
    height: usize,
    max_disparity: usize,
    latest_secondary: Vec<u8>,
    mode: ExecMode,
}

impl Kernel for Disparity {
    fn process(&mut self, input: KernelInput<'_>) -> Option<Bytes> {
        let img = kernels::image_from_payload(input.payload, self.width, self.height);
        if !input.primary {
            self.latest_secondary = img;
            return None;
        }
        Some(
            kernels::disparity(
                &img,
                &self.latest_secondary,
                self.width,
                self.height,
                self.max_disparity,
                self.mode,
            )
            .into(),
        )
    }
}

/// Topic wiring of a workload node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeWiring {
    pub inputs: Vec<SubscriptionSpec>,
    pub output: Option<TopicId>,
    /// Input whose id is propagated by fan-in kinds. Defaults to the first input.
    pub primary_input: Option<TopicId>,
}

impl NodeWiring {
    pub fn chain(input: TopicId, output: TopicId) -> Self {
        NodeWiring {
            inputs: vec![input.into()],
            output: Some(output),
            primary_input: None,
        }
    }
}

/// Build a graph node running `spec`'s kernel.
///
/// Every output envelope copies the id and origin stamp of the input that
/// produced it.
pub fn instantiate(spec: &WorkloadSpec, name: &str, wiring: &NodeWiring) -> Result<NodeDescriptor, WorkloadError> {
    instantiate_with_mode(spec, name, wiring, ExecMode::default())
}

pub fn instantiate_with_mode(
    spec: &WorkloadSpec,
    name: &str,
    wiring: &NodeWiring,
    mode: ExecMode,
) -> Result<NodeDescriptor, WorkloadError> {
    if wiring.inputs.is_empty() {
        return Err(WorkloadError::BadParameters(format!("node {name:?} has no inputs")));
    }
    if spec.is_fan_in() && wiring.inputs.len() < 2 {
        return Err(WorkloadError::BadParameters(format!(
            "fan-in node {name:?} needs two inputs"
        )));
    }
    let primary = match wiring.primary_input {
        Some(p) if wiring.inputs.iter().any(|s| s.topic == p) => p,
        Some(p) => {
            return Err(WorkloadError::BadParameters(format!(
                "primary input {p} is not an input of {name:?}"
            )))
        }
        None => wiring.inputs[0].topic,
    };
    let fan_in = spec.is_fan_in();
    let output = wiring.output;
    let mut kernel = spec.kernel(mode)?;
    let callback = move |ctx: &mut CallbackContext<'_>,
                         topic: TopicId,
                         env: &MessageEnvelope|
          -> Result<(), CallbackError> {
        let input = KernelInput {
            primary: !fan_in || topic == primary,
            id: env.id,
            payload: &env.payload,
        };
        if let (Some(out), Some(topic)) = (kernel.process(input), output) {
            ctx.publish(topic, env.derive(out))?;
        }
        Ok(())
    };
    let mut node = NodeDescriptor::new(name, callback);
    node.subscriptions = wiring.inputs.clone();
    node.publications = output.into_iter().collect();
    Ok(node)
}
