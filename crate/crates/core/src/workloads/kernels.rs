//! Deterministic compute kernels behind the synthetic workloads.
//!
//! These are small, numerically honest analogues of common robotics stages
//! (remap-based rectification, bilinear resize, block-matching stereo,
//! pose-chain relaxation, PID, spline interpolation, planar kinematics).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::par::{self, ExecMode};

/// Interpret `payload` as a `width`×`height` grayscale image, zero-padding or
/// truncating as needed.
pub fn image_from_payload(payload: &[u8], width: usize, height: usize) -> Vec<u8> {
    let mut img = vec![0u8; width * height];
    let n = img.len().min(payload.len());
    img[..n].copy_from_slice(&payload[..n]);
    img
}

#[inline]
fn bilinear(img: &[u8], width: usize, height: usize, x: f32, y: f32) -> f32 {
    if x < 0.0 || y < 0.0 || x > (width - 1) as f32 || y > (height - 1) as f32 {
        return 0.0;
    }
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = x - x0 as f32;
    let fy = y - y0 as f32;
    let p = |xx: usize, yy: usize| img[yy * width + xx] as f32;
    let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
    let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Precomputed undistortion map for radial lens distortion.
#[derive(Debug, Clone)]
pub struct RectifyMap {
    pub width: usize,
    pub height: usize,
    map: Vec<(f32, f32)>,
}

impl RectifyMap {
    /// Radial coefficients are drawn from `seed`.
    pub fn new(width: usize, height: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k1 = -0.05 - 0.10 * rng.gen::<f64>();
        let k2 = 0.02 * rng.gen::<f64>();
        let cx = (width as f64 - 1.0) / 2.0;
        let cy = (height as f64 - 1.0) / 2.0;
        let f = width.max(height) as f64 / 2.0;
        let mut map = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let u = (x as f64 - cx) / f;
                let v = (y as f64 - cy) / f;
                let r2 = u * u + v * v;
                let factor = 1.0 + k1 * r2 + k2 * r2 * r2;
                map.push(((cx + u * factor * f) as f32, (cy + v * factor * f) as f32));
            }
        }
        RectifyMap { width, height, map }
    }

    pub fn apply(&self, img: &[u8], mode: ExecMode) -> Vec<u8> {
        let (w, h) = (self.width, self.height);
        let mut out = vec![0u8; w * h];
        par::for_each_row(mode, &mut out, w, |y, row| {
            for (x, px) in row.iter_mut().enumerate() {
                let (sx, sy) = self.map[y * w + x];
                *px = bilinear(img, w, h, sx, sy).round().clamp(0.0, 255.0) as u8;
            }
        });
        out
    }
}

/// Output dimensions for a resize by `scale`.
pub fn resized_dims(width: usize, height: usize, scale: f64) -> (usize, usize) {
    (
        ((width as f64 * scale).round() as usize).max(1),
        ((height as f64 * scale).round() as usize).max(1),
    )
}

/// Bilinear resize with pixel-centre alignment. `scale == 1.0` is the identity.
pub fn resize(img: &[u8], width: usize, height: usize, scale: f64, mode: ExecMode) -> Vec<u8> {
    let (ow, oh) = resized_dims(width, height, scale);
    if (ow, oh) == (width, height) {
        return img.to_vec();
    }
    let sx = width as f32 / ow as f32;
    let sy = height as f32 / oh as f32;
    let mut out = vec![0u8; ow * oh];
    par::for_each_row(mode, &mut out, ow, |y, row| {
        let src_y = ((y as f32 + 0.5) * sy - 0.5).clamp(0.0, (height - 1) as f32);
        for (x, px) in row.iter_mut().enumerate() {
            let src_x = ((x as f32 + 0.5) * sx - 0.5).clamp(0.0, (width - 1) as f32);
            *px = bilinear(img, width, height, src_x, src_y).round().clamp(0.0, 255.0) as u8;
        }
    });
    out
}

/// Block-matching stereo (5×5 SAD). Output is disparity scaled to 0..=255.
pub fn disparity(
    left: &[u8],
    right: &[u8],
    width: usize,
    height: usize,
    max_disparity: usize,
    mode: ExecMode,
) -> Vec<u8> {
    const RADIUS: isize = 2;
    let max_d = max_disparity.max(1);
    let at = |img: &[u8], x: isize, y: isize| {
        let xx = x.clamp(0, width as isize - 1) as usize;
        let yy = y.clamp(0, height as isize - 1) as usize;
        img[yy * width + xx] as i32
    };
    let mut out = vec![0u8; width * height];
    par::for_each_row(mode, &mut out, width, |y, row| {
        let y = y as isize;
        for (x, px) in row.iter_mut().enumerate() {
            let x = x as isize;
            let mut best = (i32::MAX, 0usize);
            for d in 0..max_d.min(x as usize + 1) {
                let mut sad = 0i32;
                for dy in -RADIUS..=RADIUS {
                    for dx in -RADIUS..=RADIUS {
                        sad += (at(left, x + dx, y + dy) - at(right, x + dx - d as isize, y + dy)).abs();
                    }
                }
                if sad < best.0 {
                    best = (sad, d);
                }
            }
            *px = (best.1 * 255 / max_d) as u8;
        }
    });
    out
}

pub fn decode_f64s(payload: &[u8], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (v, chunk) in out.iter_mut().zip(payload.chunks_exact(8)) {
        *v = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    out
}

pub fn encode_f64s(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Relax a closed 2-D pose chain built from odometry increments.
///
/// `odometry` holds `(dx, dy)` per edge; the chain is closed by a loop
/// constraint back to the origin. Returns relaxed positions, flattened.
pub fn relax_pose_chain(odometry: &[f64], poses: usize, iterations: usize) -> Vec<f64> {
    let n = poses.max(2);
    let edge = |i: usize| (odometry[2 * i], odometry[2 * i + 1]);
    let mut p = vec![(0.0f64, 0.0f64); n];
    for i in 1..n {
        let (dx, dy) = edge(i - 1);
        p[i] = (p[i - 1].0 + dx, p[i - 1].1 + dy);
    }
    // Loop closure: the last pose is constrained to return to the origin
    // through the final edge.
    for _ in 0..iterations {
        for i in 1..n {
            let (dx, dy) = edge(i - 1);
            let from_prev = (p[i - 1].0 + dx, p[i - 1].1 + dy);
            let from_next = if i + 1 < n {
                let (ex, ey) = edge(i);
                (p[i + 1].0 - ex, p[i + 1].1 - ey)
            } else {
                let (ex, ey) = edge(n - 1);
                (p[0].0 - ex, p[0].1 - ey)
            };
            p[i] = (
                0.5 * (from_prev.0 + from_next.0),
                0.5 * (from_prev.1 + from_next.1),
            );
        }
    }
    p.into_iter().flat_map(|(x, y)| [x, y]).collect()
}

/// Discrete PID controller driving a first-order plant.
#[derive(Debug, Clone)]
pub struct PidLoop {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub dt: f64,
    pub plant_tau: f64,
    integral: f64,
    prev_error: Option<f64>,
    plant: f64,
}

impl PidLoop {
    pub fn new(kp: f64, ki: f64, kd: f64, dt: f64) -> Self {
        PidLoop {
            kp,
            ki,
            kd,
            dt,
            plant_tau: 0.05,
            integral: 0.0,
            prev_error: None,
            plant: 0.0,
        }
    }

    /// One control step toward `setpoint`; returns (command, plant output).
    pub fn step(&mut self, setpoint: f64) -> (f64, f64) {
        let error = setpoint - self.plant;
        self.integral += error * self.dt;
        let derivative = self.prev_error.map_or(0.0, |p| (error - p) / self.dt);
        self.prev_error = Some(error);
        let command = self.kp * error + self.ki * self.integral + self.kd * derivative;
        self.plant += self.dt * (command - self.plant) / self.plant_tau;
        (command, self.plant)
    }
}

/// Catmull-Rom interpolation through per-joint waypoints.
///
/// `waypoints` is row-major `[waypoint][joint]`. Returns
/// `(waypoints - 1) * samples_per_segment + 1` rows of `joints` values.
pub fn interpolate_trajectory(waypoints: &[f64], joints: usize, samples_per_segment: usize) -> Vec<f64> {
    let count = waypoints.len() / joints;
    if count < 2 {
        return waypoints.to_vec();
    }
    let at = |i: isize, j: usize| waypoints[(i.clamp(0, count as isize - 1) as usize) * joints + j];
    let mut out = Vec::with_capacity(((count - 1) * samples_per_segment + 1) * joints);
    for seg in 0..count - 1 {
        for s in 0..samples_per_segment {
            let t = s as f64 / samples_per_segment as f64;
            let (t2, t3) = (t * t, t * t * t);
            let i = seg as isize;
            for j in 0..joints {
                let (p0, p1, p2, p3) = (at(i - 1, j), at(i, j), at(i + 1, j), at(i + 2, j));
                out.push(
                    0.5 * (2.0 * p1
                        + (-p0 + p2) * t
                        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2
                        + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t3),
                );
            }
        }
    }
    out.extend_from_slice(&waypoints[(count - 1) * joints..count * joints]);
    out
}

/// Link lengths of a planar arm, drawn from `seed`.
pub fn link_lengths(links: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4c49_4e4b);
    (0..links).map(|_| 0.2 + 0.3 * rng.gen::<f64>()).collect()
}

/// Joint positions of a planar serial chain, flattened `(x, y)` per link end.
pub fn forward_kinematics(angles: &[f64], lengths: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(lengths.len() * 2);
    let (mut x, mut y, mut theta) = (0.0f64, 0.0f64, 0.0f64);
    for (a, l) in angles.iter().zip(lengths) {
        theta += a;
        x += l * theta.cos();
        y += l * theta.sin();
        out.push(x);
        out.push(y);
    }
    out
}

/// Cyclic coordinate descent toward `target`, starting from zero angles.
pub fn inverse_kinematics(target: (f64, f64), lengths: &[f64], iterations: usize) -> Vec<f64> {
    let n = lengths.len();
    let mut angles = vec![0.0; n];
    for _ in 0..iterations {
        for j in (0..n).rev() {
            let pos = forward_kinematics(&angles, lengths);
            let (ex, ey) = (pos[2 * n - 2], pos[2 * n - 1]);
            let (bx, by) = if j == 0 { (0.0, 0.0) } else { (pos[2 * j - 2], pos[2 * j - 1]) };
            let to_end = (ey - by).atan2(ex - bx);
            let to_target = (target.1 - by).atan2(target.0 - bx);
            angles[j] += to_target - to_end;
        }
    }
    angles
}
