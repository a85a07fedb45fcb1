//! The reference suite: one or more graphs per category, each with a
//! deterministically generated input log.

use bytes::Bytes;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernels::encode_f64s;
use super::WorkloadKind;
use crate::descriptor::{
    BenchmarkDescriptor, Category, GraphSpec, InputSpec, MetricKind, NodeSpec, SCHEMA_VERSION,
};
use crate::harness::{LogRecord, MessageLog, PlaybackPolicy};
use crate::par::{self, ExecMode};
use crate::pubsub::TopicId;

pub const REFERENCE_LOG_FILE: &str = "input.gpl";

/// A reference descriptor together with its generated input.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceBenchmark {
    pub descriptor: BenchmarkDescriptor,
    pub log: MessageLog,
}

fn node(name: &str, workload: WorkloadKind, subscribe: &[&str], publish: &str) -> NodeSpec {
    NodeSpec {
        name: name.into(),
        workload,
        seed: 7,
        subscribe: subscribe.iter().map(|s| (*s).to_owned()).collect(),
        publish: Some(publish.into()),
        queue_depth: None,
    }
}

struct Shape<'a> {
    id: &'a str,
    name: &'a str,
    description: &'a str,
    category: Category,
    topics: &'a [&'a str],
    nodes: Vec<NodeSpec>,
    source: &'a str,
    sink: &'a str,
    primary: Option<&'a str>,
    hz: f64,
    metrics: &'a [MetricKind],
}

impl Shape<'_> {
    fn descriptor(self) -> BenchmarkDescriptor {
        BenchmarkDescriptor {
            schema: SCHEMA_VERSION,
            id: self.id.into(),
            name: self.name.into(),
            description: self.description.into(),
            category: self.category,
            graph: GraphSpec {
                workers: 2,
                topics: self.topics.iter().map(|s| (*s).to_owned()).collect(),
                nodes: self.nodes,
            },
            input: InputSpec {
                log: REFERENCE_LOG_FILE.into(),
                playback: PlaybackPolicy::fixed_rate(self.hz),
            },
            source_topic: self.source.into(),
            sink_node: self.sink.into(),
            primary_input_topic: self.primary.map(str::to_owned),
            metrics_requested: self.metrics.to_vec(),
            accepted_results: Vec::new(),
        }
    }
}

fn frame_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Synthetic grayscale frame: a drifting gradient plus noise.
fn image_frame(w: usize, h: usize, seed: u64, index: usize) -> Vec<u8> {
    let mut rng = frame_rng(seed, index);
    (0..w * h)
        .map(|p| {
            let (x, y) = (p % w, p / w);
            let base = (x * 3 + y * 2 + index * 5) % 200;
            (base + rng.gen_range(0..56)) as u8
        })
        .collect()
}

fn reals(n: usize, seed: u64, index: usize, lo: f64, hi: f64) -> Vec<u8> {
    let mut rng = frame_rng(seed, index);
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    encode_f64s(&v)
}

/// Single-topic log of `count` frames recorded at `hz`.
fn single_topic_log<F>(topic: &str, count: usize, hz: f64, make: F) -> MessageLog
where
    F: Fn(usize) -> Vec<u8> + Sync + Send,
{
    let period = (1e9 / hz) as u64;
    let payloads = par::map_indices(ExecMode::default(), count, make);
    MessageLog {
        topics: vec![(topic.into(), TopicId(0))],
        records: payloads
            .into_iter()
            .enumerate()
            .map(|(i, p)| LogRecord {
                topic: TopicId(0),
                recorded_stamp: i as u64 * period,
                payload: Bytes::from(p),
            })
            .collect(),
    }
}

/// Stereo log: each right frame immediately precedes the left frame of the
/// same instant, so the disparity node always pairs with a fresh right image.
fn stereo_log(count: usize, hz: f64, w: usize, h: usize, seed: u64) -> MessageLog {
    let period = (1e9 / hz) as u64;
    let frames = par::map_indices(ExecMode::default(), count, |i| {
        let left = image_frame(w, h, seed, i);
        let shift = 4 + i % 5;
        let right: Vec<u8> = (0..w * h)
            .map(|p| {
                let (x, y) = (p % w, p / w);
                left[y * w + (x + shift).min(w - 1)]
            })
            .collect();
        (left, right)
    });
    let mut records = Vec::with_capacity(count * 2);
    for (i, (left, right)) in frames.into_iter().enumerate() {
        let stamp = i as u64 * period;
        records.push(LogRecord {
            topic: TopicId(1),
            recorded_stamp: stamp,
            payload: right.into(),
        });
        records.push(LogRecord {
            topic: TopicId(0),
            recorded_stamp: stamp,
            payload: left.into(),
        });
    }
    MessageLog {
        topics: vec![("left".into(), TopicId(0)), ("right".into(), TopicId(1))],
        records,
    }
}

const LOG_SEED: u64 = 0x6772_6170_6870_6572;

/// The reference suite, covering all four categories.
pub fn reference_graphs() -> Vec<ReferenceBenchmark> {
    use MetricKind::{Latency, Power, Throughput};
    let all = &[Latency, Throughput, Power][..];
    let (w, h) = (256, 192);
    let (sw, sh) = (128, 96);
    let mut out = Vec::new();
    let mut add = |shape: Shape<'_>, log: MessageLog| {
        out.push(ReferenceBenchmark {
            descriptor: shape.descriptor(),
            log,
        })
    };

    add(
        Shape {
            id: "a1_rectify_resize_chain",
            name: "Rectify and resize chain",
            description: "Two-node perception chain: lens rectification then half-scale bilinear resize.",
            category: Category::Perception,
            topics: &["image_raw", "image_rect", "image_resized"],
            nodes: vec![
                node("rectify", WorkloadKind::ImageRectify { width: w, height: h }, &["image_raw"], "image_rect"),
                node(
                    "resize",
                    WorkloadKind::ImageResize { width: w, height: h, scale: 0.5 },
                    &["image_rect"],
                    "image_resized",
                ),
            ],
            source: "image_raw",
            sink: "resize",
            primary: None,
            hz: 50.0,
            metrics: all,
        },
        single_topic_log("image_raw", 100, 50.0, |i| image_frame(w, h, LOG_SEED, i)),
    );
    add(
        Shape {
            id: "a2_stereo_disparity",
            name: "Stereo disparity",
            description: "Fan-in block-matching disparity over a left/right pair; ids follow the left image.",
            category: Category::Perception,
            topics: &["left", "right", "disparity"],
            nodes: vec![node(
                "disparity",
                WorkloadKind::Disparity { width: sw, height: sh, max_disparity: 16 },
                &["left", "right"],
                "disparity",
            )],
            source: "left",
            sink: "disparity",
            primary: Some("left"),
            hz: 40.0,
            metrics: all,
        },
        stereo_log(60, 20.0, sw, sh, LOG_SEED + 1),
    );
    add(
        Shape {
            id: "a3_image_resize",
            name: "Image resize",
            description: "Single bilinear resize to three quarters scale.",
            category: Category::Perception,
            topics: &["image_raw", "image_resized"],
            nodes: vec![node(
                "resize",
                WorkloadKind::ImageResize { width: w, height: h, scale: 0.75 },
                &["image_raw"],
                "image_resized",
            )],
            source: "image_raw",
            sink: "resize",
            primary: None,
            hz: 50.0,
            metrics: all,
        },
        single_topic_log("image_raw", 100, 50.0, |i| image_frame(w, h, LOG_SEED + 2, i)),
    );
    add(
        Shape {
            id: "b1_pose_graph_step",
            name: "Pose graph step",
            description: "Gauss-Seidel relaxation of a 64-pose odometry chain per incoming odometry batch.",
            category: Category::Localization,
            topics: &["odometry", "poses"],
            nodes: vec![node(
                "relax",
                WorkloadKind::PoseGraphStep { poses: 64, iterations: 20 },
                &["odometry"],
                "poses",
            )],
            source: "odometry",
            sink: "relax",
            primary: None,
            hz: 50.0,
            metrics: all,
        },
        single_topic_log("odometry", 100, 50.0, |i| reals(128, LOG_SEED + 3, i, -0.5, 1.0)),
    );
    let setpoint_log = || {
        single_topic_log("setpoint", 200, 100.0, |i| {
            encode_f64s(&[if (i / 50) % 2 == 0 { 1.0 } else { -1.0 }])
        })
    };
    add(
        Shape {
            id: "c1_pid_step",
            name: "PID step",
            description: "PID controller on a first-order plant, driven by a square-wave setpoint at 100 Hz.",
            category: Category::Control,
            topics: &["setpoint", "command"],
            nodes: vec![node(
                "pid",
                WorkloadKind::PidStep { kp: 2.0, ki: 0.5, kd: 0.05, dt_s: 0.01 },
                &["setpoint"],
                "command",
            )],
            source: "setpoint",
            sink: "pid",
            primary: None,
            hz: 100.0,
            metrics: all,
        },
        setpoint_log(),
    );
    for (id, name, us) in [
        ("c2_busy_loop_10ms", "Busy loop 10 ms", 10_000),
        ("c3_busy_loop_2ms", "Busy loop 2 ms", 2_000),
    ] {
        add(
            Shape {
                id,
                name,
                description: "Pass-through node spinning on the monotonic clock; hardware-independent cost.",
                category: Category::Control,
                topics: &["input", "output"],
                nodes: vec![node("busy", WorkloadKind::BusyLoop { duration_us: us }, &["input"], "output")],
                source: "input",
                sink: "busy",
                primary: None,
                hz: 50.0,
                metrics: all,
            },
            single_topic_log("input", 200, 50.0, |i| (i as u32).to_le_bytes().to_vec()),
        );
    }
    add(
        Shape {
            id: "d1_ik_fk_chain",
            name: "IK then FK chain",
            description: "Iterative inverse kinematics of a 6-link planar arm, verified by forward kinematics.",
            category: Category::Manipulation,
            topics: &["target", "joints", "effector"],
            nodes: vec![
                node("ik", WorkloadKind::IkIterative { links: 6, iterations: 50 }, &["target"], "joints"),
                node("fk", WorkloadKind::FkChain { links: 6 }, &["joints"], "effector"),
            ],
            source: "target",
            sink: "fk",
            primary: None,
            hz: 50.0,
            metrics: all,
        },
        single_topic_log("target", 100, 50.0, |i| reals(2, LOG_SEED + 4, i, -2.0, 2.0)),
    );
    add(
        Shape {
            id: "d2_joint_trajectory",
            name: "Joint trajectory interpolation",
            description: "Catmull-Rom interpolation of 8 six-joint waypoints at 20 samples per segment.",
            category: Category::Manipulation,
            topics: &["waypoints", "trajectory"],
            nodes: vec![node(
                "interp",
                WorkloadKind::JointTrajInterp { joints: 6, samples_per_segment: 20 },
                &["waypoints"],
                "trajectory",
            )],
            source: "waypoints",
            sink: "interp",
            primary: None,
            hz: 50.0,
            metrics: all,
        },
        single_topic_log("waypoints", 100, 50.0, |i| reals(48, LOG_SEED + 5, i, -3.1, 3.1)),
    );
    out
}
